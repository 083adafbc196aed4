"""ESS estimation, running MSE curves, and the acceptance-rate tuner."""

import numpy as np
import pytest

from auxmc.core import RngStream
from auxmc.diagnostics import (
    TuneResult,
    ZeroVarianceError,
    checkpoint_grid,
    ess,
    ess_report,
    mse_vs_reference,
    tune_step_size,
)
from auxmc.models import TruncatedHeteroGaussian, synth_gaussian_data
from auxmc.samplers import rwm_step


def ar1(n, rho, rng):
    z = rng.gen.standard_normal(n)
    x = np.empty(n)
    x[0] = z[0]
    scale = np.sqrt(1 - rho**2)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + scale * z[t]
    return x


class TestEss:
    def test_iid_draws_near_full_size(self):
        rng = RngStream(200)
        x = rng.gen.standard_normal(100_000)
        assert 0.95 <= ess(x) / 100_000 <= 1.05

    def test_ar1_integrated_autocorrelation(self):
        # tau = (1+rho)/(1-rho) = 3 for rho = 0.5, so ESS ~ n/3.
        rng = RngStream(201)
        x = ar1(1_000_000, 0.5, rng)
        assert abs(ess(x) / (1_000_000 / 3.0) - 1.0) < 0.10

    def test_constant_column_undefined(self):
        with pytest.raises(ZeroVarianceError):
            ess(np.ones(1000))

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            ess(np.arange(50, dtype=float))

    def test_affine_invariance_exact(self):
        rng = RngStream(202)
        x = ar1(20_000, 0.3, rng)
        assert abs(ess(3.7 * x - 11.0) - ess(x)) < 1e-10 * ess(x)

    def test_never_exceeds_sample_count(self):
        rng = RngStream(203)
        for _ in range(5):
            x = rng.gen.standard_normal(5000)
            assert 0 < ess(x) <= 5000

    def test_report_summary(self):
        rng = RngStream(204)
        xs = rng.gen.standard_normal((20_000, 3))
        rep = ess_report(xs, elapsed_seconds=2.0)
        assert rep.minimum <= rep.median <= rep.maximum
        assert rep.per_second()[1] == pytest.approx(rep.median / 2.0)


class TestMseCurve:
    def test_constant_trace_at_reference(self):
        ref = np.array([1.0, -2.0])
        thetas = np.tile(ref, (500, 1))
        steps, mse = mse_vs_reference(thetas, ref)
        assert np.all(mse == 0.0)

    def test_first_point_is_single_sample_error(self):
        ref = np.zeros(3)
        thetas = np.vstack([np.array([1.0, 2.0, 2.0]), np.zeros((99, 3))])
        steps, mse = mse_vs_reference(thetas, ref)
        assert steps[0] == 1
        assert mse[0] == pytest.approx(np.sum([1.0, 4.0, 4.0]) / 3.0)

    def test_clt_decay_rate(self):
        # For iid draws the running-mean MSE decays like 1/n.
        rng = RngStream(210)
        thetas = rng.gen.standard_normal((200_000, 1))
        steps, mse = mse_vs_reference(thetas, np.zeros(1))
        i = np.searchsorted(steps, 1000)
        j = len(steps) - 1
        ratio = (mse[i] / mse[j]) / (steps[j] / steps[i])
        assert 1 / 3 < ratio < 3

    def test_variance_curve(self):
        rng = RngStream(211)
        thetas = rng.gen.standard_normal((50_000, 2))
        steps, mse_m, mse_v = mse_vs_reference(thetas, np.zeros(2), np.ones(2))
        assert mse_v[-1] < 0.01

    def test_checkpoint_grid_log_spaced(self):
        g = checkpoint_grid(10_000, 50)
        assert g[0] == 1 and g[-1] == 10_000
        assert np.all(np.diff(g) > 0)


class TestTuner:
    def test_invalid_target_rejected(self):
        with pytest.raises(ValueError):
            tune_step_size(lambda s: None, np.zeros(1), 1.0, RngStream(220))

    def test_accept_all_regime_grows_step(self):
        # Flat target accepts everything, so the tuner must push sigma up in
        # every early block (rate - target = 0.75 > 0).
        sizes = []

        def factory(s):
            sizes.append(s)
            return lambda th, r: rwm_step(lambda t: 0.0, th, s, r)

        res = tune_step_size(factory, np.zeros(1), 0.25, RngStream(221), max_blocks=6)
        assert not res.converged
        assert all(b > a for a, b in zip(sizes, sizes[1:]))

    def test_achieves_target_on_truncated_gaussian(self):
        rng = RngStream(222)
        sig = 1.0 - 0.05 * np.arange(5)
        y = synth_gaussian_data(2000, 5, sig, rng)
        model = TruncatedHeteroGaussian(y, beta=1e-3, sigma_diag=sig, K=3.0)

        def logpi(theta):
            if not model.support(theta):
                return -np.inf
            return model.phi_total(theta)

        factory = lambda s: (lambda th, r: rwm_step(logpi, th, s, r))
        res = tune_step_size(factory, np.zeros(5), 0.25, RngStream(223))
        assert isinstance(res, TuneResult)
        assert res.converged
        assert 0.20 <= res.achieved_rate <= 0.30
