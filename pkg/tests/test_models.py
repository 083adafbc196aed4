"""Experiment posteriors: promise probes, bound derivations, synthetic data."""

import numpy as np
import pytest
from scipy import stats

from auxmc.core import RngStream, full_log_target
from auxmc.models import (
    BayesLogistic,
    FiniteExpFamily,
    LinearLipschitzToy,
    QuadraticBoundedToy,
    RobustLinReg,
    TruncatedHeteroGaussian,
    bound_check,
    load_data_csv,
    save_data_csv,
    synth_gaussian_data,
    synth_logistic_data,
    synth_robust_data,
)


def make_gaussian(rng, N=50, d=3, beta=0.1, K=2.5):
    sig = np.array([1.0, 0.6, 0.3])[:d]
    y = synth_gaussian_data(N, d, sig, rng)
    return TruncatedHeteroGaussian(y, beta, sig, K)


class TestTruncatedHeteroGaussian:
    def test_promise_probes(self):
        model = make_gaussian(RngStream(50))
        report = bound_check(model, 10_000, RngStream(51))
        assert report.ok, f"bound violated by {report.max_violation}"

    def test_lambda_max_of_diagonal(self):
        model = make_gaussian(RngStream(52))
        # lambda_max(Sigma^{-1}) = 1/min(Sigma_jj) enters every M_i linearly.
        assert model.M[0] == pytest.approx(
            0.5 * model.beta * (1.0 / model.sigma_diag.min())
            * np.sum((np.abs(model.y[0]) + model.K) ** 2)
        )

    def test_phi_hits_upper_bound_at_datum(self):
        rng = RngStream(53)
        y = rng.gen.uniform(-1.0, 1.0, (5, 2))
        model = TruncatedHeteroGaussian(y, 0.3, np.array([1.0, 0.5]), K=2.0)
        for i in range(5):
            assert model.phi(i, y[i]) == pytest.approx(model.M[i], abs=1e-12)

    def test_shift_invariance_of_target_differences(self):
        # Pairwise log-target differences must not depend on the +M_i shifts.
        model = make_gaussian(RngStream(54))
        rng = RngStream(55)

        def unshifted(theta):
            r = theta[None, :] - model.y
            return -0.5 * model.beta * np.sum(r * r * model.inv_diag[None, :])

        for _ in range(50):
            a = rng.gen.uniform(-2.0, 2.0, 3)
            b = rng.gen.uniform(-2.0, 2.0, 3)
            lhs = full_log_target(model, a) - full_log_target(model, b)
            rhs = unshifted(a) - unshifted(b)
            assert abs(lhs - rhs) < 1e-10

    def test_reference_moments_match_truncated_normal(self):
        model = make_gaussian(RngStream(56), N=200)
        mean, var = model.reference_moments()
        ybar = model.y.mean(axis=0)
        for j in range(model.d):
            scale = np.sqrt(model.sigma_diag[j] / (model.beta * model.N))
            a = (-model.K - ybar[j]) / scale
            b = (model.K - ybar[j]) / scale
            ref_m = stats.truncnorm.mean(a, b, loc=ybar[j], scale=scale)
            ref_v = stats.truncnorm.var(a, b, loc=ybar[j], scale=scale)
            assert mean[j] == pytest.approx(ref_m, abs=1e-8)
            assert var[j] == pytest.approx(ref_v, rel=1e-6)


class TestRobustLinReg:
    def make(self, rng, N=60, d=3):
        x, y = synth_robust_data(N, d, rng)
        return RobustLinReg(x, y, v=4.0, beta=0.2, R=4.0)

    def test_promise_probes(self):
        model = self.make(RngStream(60))
        report = bound_check(model, 10_000, RngStream(61))
        assert report.ok

    def test_analytic_maximizer_attains_zero_phi(self):
        model = self.make(RngStream(62))
        for i in range(model.N):
            theta_star = model.residual_maximizer(i)
            assert model.phi(i, theta_star) == pytest.approx(0.0, abs=1e-9)

    def test_out_of_ball_rejected(self):
        model = self.make(RngStream(63))
        assert not model.support(np.array([5.0, 0.0, 0.0]))


class TestBayesLogistic:
    def test_lipschitz_probe(self):
        rng = RngStream(70)
        x, y = synth_logistic_data(30, 3, rng)
        model = BayesLogistic(x, y)
        probe = RngStream(71)
        idx = np.arange(model.N)
        for _ in range(10_000):
            a = probe.gen.standard_normal(3) * 2.0
            b = probe.gen.standard_normal(3) * 2.0
            du = np.abs(model.U_batch(idx, b) - model.U_batch(idx, a))
            cap = model.c * np.linalg.norm(b - a)
            assert np.all(du <= cap + 1e-10)

    def test_labels_validated(self):
        with pytest.raises(ValueError):
            BayesLogistic(np.ones((3, 2)), np.array([0.0, 2.0, 1.0]))

    def test_accuracy_plugin(self):
        rng = RngStream(72)
        theta_star = np.ones(4)
        x, y = synth_logistic_data(4000, 4, rng, theta_star)
        model = BayesLogistic(x, y)
        # The true parameter classifies well above chance on its own data.
        assert model.accuracy(theta_star, x, y) > 0.75


class TestFiniteExpFamily:
    def make(self):
        return FiniteExpFamily(
            suff_stat=0.5 * np.arange(6),
            theta_grid=np.linspace(-1, 1, 5),
            prior_weights=np.ones(5),
            observed=3,
        )

    def test_outcome_probs_normalized_to_enumeration(self):
        fef = self.make()
        for t in fef.theta_grid:
            p = fef.outcome_probs(t)
            direct = np.exp(t * fef.suff_stat)
            direct /= direct.sum()
            assert np.max(np.abs(p - direct)) < 1e-12

    def test_exact_sampler_frequencies(self):
        fef = self.make()
        rng = RngStream(80)
        n = 200_000
        draws = np.array([fef.exact_sample(0.6, rng) for _ in range(n)])
        freq = np.bincount(draws, minlength=6) / n
        p = fef.outcome_probs(0.6)
        assert np.all(np.abs(freq - p) < 3 * np.sqrt(p * (1 - p) / n) + 1e-9)

    def test_posterior_sums_to_one(self):
        post = self.make().posterior()
        assert post.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(post > 0)


class TestSyntheticData:
    def test_gaussian_column_variances(self):
        sig = np.array([1.0, 0.5, 0.25])
        y = synth_gaussian_data(100_000, 3, sig, RngStream(90))
        assert np.all(np.abs(y.var(axis=0) / sig - 1.0) < 0.05)

    def test_robust_least_squares_recovers_ones(self):
        x, y = synth_robust_data(100_000, 4, RngStream(91))
        coef, *_ = np.linalg.lstsq(x, y, rcond=None)
        assert np.max(np.abs(coef - 1.0)) < 0.02

    def test_single_row(self):
        y = synth_gaussian_data(1, 2, np.array([1.0, 1.0]), RngStream(92))
        assert y.shape == (1, 2)

    def test_csv_round_trip(self, tmp_path):
        rng = RngStream(93)
        x, y = synth_robust_data(20, 3, rng)
        path = tmp_path / "data.csv"
        save_data_csv(path, y[:, None] if y.ndim == 1 else y, x)
        x2, y2 = load_data_csv(path)
        assert np.allclose(x, x2) and np.allclose(y, y2)


class TestBoundCheckReporting:
    def test_detects_violation(self):
        # Deliberately undersized bounds: M_i halved.
        class Broken(QuadraticBoundedToy):
            def __init__(self):
                super().__init__(y=np.array([0.5]), w=np.array([1.0]), K=2.0)
                self.M = self.M / 2.0

        report = bound_check(Broken(), 500, RngStream(94))
        assert not report.ok and report.max_violation > 0

    def test_lipschitz_models_probe_pairs(self):
        report = bound_check(LinearLipschitzToy(a=np.array([0.7, -0.3])), 500, RngStream(95))
        assert report.ok
