"""Chain diagnostics: effective sample size, running MSE, step-size tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AuxmcError, RngStream


class ZeroVarianceError(AuxmcError):
    """ESS is undefined for a constant sample column."""


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased-normalization autocovariances gamma_0..gamma_{n-1} via FFT."""
    n = x.shape[0]
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[:n].real
    return acov / n


def ess(x: np.ndarray) -> float:
    """Effective sample size by the initial monotone positive sequence rule.

    Autocorrelations are summed in adjacent pairs; the pair sums are kept
    while positive and forced nonincreasing, which gives a consistent,
    deterministic truncation.  Scale-free: ESS(a*x + b) == ESS(x).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 100:
        raise ValueError("need at least 100 samples for an ESS estimate")
    acov = _autocovariance(x)
    if acov[0] <= 0:
        raise ZeroVarianceError("zero-variance column: ESS undefined")
    rho = acov / acov[0]
    n_pairs = (n - 1) // 2
    tau = 1.0
    if n_pairs > 0:
        pair = rho[1 : 2 * n_pairs + 1 : 2] + rho[2 : 2 * n_pairs + 1 : 2]
        positive = pair > 0
        stop = int(np.argmin(positive)) if not positive.all() else n_pairs
        if stop > 0:
            kept = np.minimum.accumulate(pair[:stop])
            tau = 1.0 + 2.0 * float(kept.sum())
    return float(min(n, n / max(tau, 1e-12)))


@dataclass
class EssReport:
    """Per-dimension ESS plus the summary triple used in the result tables."""

    per_dim: np.ndarray
    elapsed_seconds: float

    @property
    def minimum(self) -> float:
        return float(np.min(self.per_dim))

    @property
    def median(self) -> float:
        return float(np.median(self.per_dim))

    @property
    def maximum(self) -> float:
        return float(np.max(self.per_dim))

    def per_second(self) -> tuple[float, float, float]:
        t = self.elapsed_seconds
        return (self.minimum / t, self.median / t, self.maximum / t)


def ess_report(samples: np.ndarray, elapsed_seconds: float) -> EssReport:
    """ESS of every column of an (n, d) sample matrix."""
    samples = np.atleast_2d(samples)
    per_dim = np.array([ess(samples[:, j]) for j in range(samples.shape[1])])
    return EssReport(per_dim=per_dim, elapsed_seconds=elapsed_seconds)


def checkpoint_grid(n: int, n_points: int = 200) -> np.ndarray:
    """Log-spaced 1-based step indices ending at n."""
    if n < 1:
        return np.array([], dtype=np.int64)
    pts = np.unique(np.round(np.logspace(0, math.log10(n), n_points)).astype(np.int64))
    return pts[(pts >= 1) & (pts <= n)]


def mse_vs_reference(thetas: np.ndarray, ref_mean: np.ndarray,
                     ref_var: np.ndarray | None = None,
                     steps: np.ndarray | None = None):
    """Running-estimate squared error against reference moments.

    Returns (steps, mse_mean) or (steps, mse_mean, mse_var): at each recorded
    step t, the squared error of the running mean (and running population
    variance) of the first t samples, averaged over dimensions.
    """
    thetas = np.atleast_2d(thetas)
    n, d = thetas.shape
    if steps is None:
        steps = checkpoint_grid(n)
    csum = np.cumsum(thetas, axis=0)
    mean_t = csum[steps - 1] / steps[:, None]
    mse_mean = np.mean((mean_t - ref_mean[None, :]) ** 2, axis=1)
    if ref_var is None:
        return steps, mse_mean
    csum2 = np.cumsum(thetas**2, axis=0)
    var_t = csum2[steps - 1] / steps[:, None] - mean_t**2
    mse_var = np.mean((var_t - ref_var[None, :]) ** 2, axis=1)
    return steps, mse_mean, mse_var


@dataclass
class TuneResult:
    step_size: float
    achieved_rate: float
    pilot_iterations: int
    converged: bool


def tune_step_size(step_factory, theta0: np.ndarray, target_rate: float,
                   rng: RngStream, initial: float = 0.1, block: int = 200,
                   tol: float = 0.05, max_blocks: int = 50) -> TuneResult:
    """Stochastic approximation on the log step size toward a target rate.

    ``step_factory(step_size)`` must return a one-step function
    ``(theta, rng) -> StepResult``.  Each pilot block evaluates the current
    step size on fresh transitions; the chain position carries over between
    blocks.  Larger steps lower the acceptance rate, so the update
    log(s) += gamma_k * (rate - target) pushes in the right direction.
    Non-convergence returns the best iterate, flagged.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target rate must be strictly inside (0, 1)")
    log_s = math.log(initial)
    theta = np.asarray(theta0, dtype=float)
    used = 0
    best = (math.inf, initial, 0.0)
    for k in range(1, max_blocks + 1):
        step_fn = step_factory(math.exp(log_s))
        n_acc = 0
        for _ in range(block):
            res = step_fn(theta, rng)
            theta = res.theta_new
            n_acc += res.accepted
        used += block
        rate = n_acc / block
        if abs(rate - target_rate) < best[0]:
            best = (abs(rate - target_rate), math.exp(log_s), rate)
        if abs(rate - target_rate) <= tol:
            return TuneResult(math.exp(log_s), rate, used, True)
        log_s += (rate - target_rate) / k**0.6
    return TuneResult(best[1], best[2], used, False)
