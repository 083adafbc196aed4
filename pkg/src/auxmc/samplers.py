"""One-transition step functions for all samplers.

Every step function consumes the current position and an RngStream and
returns a StepResult; none mutates its inputs.  Rejected steps return the
input position object unchanged.  Chains are driven by ``run_chain``.

Full-batch kernels (random walk, MALA, Barker, HMC) take callables for the
log-target and its gradient.  Minibatch kernels take a factor model plus the
subsampling hyperparameter and touch only the data points whose Poisson
count is positive.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import AuxmcError, DoublyIntractableModel, RngStream
from .minibatch import (
    AliasTable,
    PoissonAuxState,
    draw_poisson_minibatch,
    draw_tuna_minibatch,
    tuna_phi,
)

BALANCING_TAGS = ("sqrt", "barker")


def log_balancing(tag: str, a: float | np.ndarray):
    """log g(e^a) for the two supported balancing functions.

    sqrt: g(t) = sqrt(t), so log g(e^a) = a/2.
    barker: g(t) = t/(1+t), so log g(e^a) = -softplus(-a).
    Both satisfy g(t) = t * g(1/t).
    """
    if tag == "sqrt":
        return 0.5 * np.asarray(a, dtype=float)
    if tag == "barker":
        return -np.logaddexp(0.0, -np.asarray(a, dtype=float))
    raise ValueError(f"unknown balancing tag {tag!r}")


def balancing(tag: str):
    """The balancing function g itself (direct domain)."""
    if tag == "sqrt":
        return np.sqrt
    if tag == "barker":
        return lambda t: t / (1.0 + t)
    raise ValueError(f"unknown balancing tag {tag!r}")


@dataclass
class StepResult:
    theta_new: np.ndarray
    accepted: bool
    log_accept_ratio: float
    batch_size: int
    proposal_kind: str


def _decide(theta, theta_p, log_r: float, rng: RngStream, batch: int, kind: str) -> StepResult:
    accept = rng.gen.random() < math.exp(min(0.0, log_r))
    return StepResult(
        theta_new=theta_p if accept else theta,
        accepted=accept,
        log_accept_ratio=float(log_r),
        batch_size=batch,
        proposal_kind=kind,
    )


def _reject(theta, batch: int, kind: str) -> StepResult:
    return StepResult(theta, False, -math.inf, batch, kind)


class GaussianRWProposal:
    """Isotropic Gaussian random-walk proposal with evaluable density."""

    def __init__(self, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def sample(self, theta, rng: RngStream):
        return theta + self.sigma * rng.gen.standard_normal(theta.shape)

    def log_density(self, frm, to) -> float:
        d = np.asarray(frm).size
        r2 = float(np.sum((np.asarray(to) - np.asarray(frm)) ** 2))
        return -0.5 * r2 / self.sigma**2 - 0.5 * d * math.log(2 * math.pi * self.sigma**2)


class GridProposal:
    """Uniform proposal over the other points of a finite grid (symmetric)."""

    def __init__(self, grid: np.ndarray):
        self.grid = np.asarray(grid, dtype=float)
        self.n = self.grid.shape[0]

    def index(self, theta) -> int:
        return int(np.argmin(np.abs(self.grid - float(np.atleast_1d(theta)[0]))))

    def sample(self, theta, rng: RngStream):
        i = self.index(theta)
        j = int(rng.gen.integers(0, self.n - 1))
        if j >= i:
            j += 1
        return np.atleast_1d(self.grid[j]).astype(float)

    def log_density(self, frm, to) -> float:
        return -math.log(self.n - 1)


# ---------------------------------------------------------------------------
# Full-batch kernels
# ---------------------------------------------------------------------------


def rwm_step(logpi, theta, sigma: float, rng: RngStream) -> StepResult:
    """Random-walk Metropolis with isotropic Gaussian proposal."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    theta_p = theta + sigma * rng.gen.standard_normal(theta.shape)
    lp_new = logpi(theta_p)
    if lp_new == -math.inf:
        return _reject(theta, 0, "rwm")
    log_r = lp_new - logpi(theta)
    return _decide(theta, theta_p, log_r, rng, 0, "rwm")


def mala_step(logpi, gradlogpi, theta, sigma: float, rng: RngStream) -> StepResult:
    """Metropolis-adjusted Langevin: Gaussian drift proposal plus correction."""
    g = gradlogpi(theta)
    _require_finite(g)
    mean_fwd = theta + 0.5 * sigma**2 * g
    theta_p = mean_fwd + sigma * rng.gen.standard_normal(theta.shape)
    lp_new = logpi(theta_p)
    if lp_new == -math.inf:
        return _reject(theta, 0, "mala")
    g_new = gradlogpi(theta_p)
    _require_finite(g_new)
    mean_rev = theta_p + 0.5 * sigma**2 * g_new
    log_q_fwd = -0.5 * float(np.sum((theta_p - mean_fwd) ** 2)) / sigma**2
    log_q_rev = -0.5 * float(np.sum((theta - mean_rev) ** 2)) / sigma**2
    log_r = lp_new - logpi(theta) + log_q_rev - log_q_fwd
    return _decide(theta, theta_p, log_r, rng, 0, "mala")


def barker_step(logpi, gradlogpi, theta, sigma: float, rng: RngStream) -> StepResult:
    """Componentwise Barker proposal: move +z or -z with skew prob sigmoid(g*z)."""
    g = gradlogpi(theta)
    _require_finite(g)
    z = sigma * rng.gen.standard_normal(theta.shape)
    p_plus = 1.0 / (1.0 + np.exp(-np.clip(g * z, -700, 700)))
    b = np.where(rng.gen.random(theta.shape) < p_plus, 1.0, -1.0)
    delta = b * z
    theta_p = theta + delta
    lp_new = logpi(theta_p)
    if lp_new == -math.inf:
        return _reject(theta, 0, "barker")
    g_new = gradlogpi(theta_p)
    _require_finite(g_new)
    # Density ratio of the skew proposal; the symmetric kernel part cancels.
    log_q_diff = float(
        np.sum(np.logaddexp(0.0, -g * delta) - np.logaddexp(0.0, g_new * delta))
    )
    log_r = lp_new - logpi(theta) + log_q_diff
    return _decide(theta, theta_p, log_r, rng, 0, "barker")


def hmc_step(logpi, gradlogpi, theta, epsilon: float, n_leapfrog: int, rng: RngStream) -> StepResult:
    """Hamiltonian Monte Carlo with identity mass and fixed leapfrog count."""
    if n_leapfrog < 1:
        raise ValueError("n_leapfrog must be >= 1")
    p0 = rng.gen.standard_normal(theta.shape)
    th = theta.copy()
    p = p0.copy()
    g = gradlogpi(th)
    _require_finite(g)
    p = p + 0.5 * epsilon * g
    for leap in range(n_leapfrog):
        th = th + epsilon * p
        g = gradlogpi(th)
        _require_finite(g)
        if leap < n_leapfrog - 1:
            p = p + epsilon * g
    p = p + 0.5 * epsilon * g
    lp_new = logpi(th)
    if lp_new == -math.inf:
        return _reject(theta, 0, "hmc")
    log_r = lp_new - logpi(theta) - 0.5 * float(np.sum(p**2) - np.sum(p0**2))
    return _decide(theta, th, log_r, rng, 0, "hmc")


def _require_finite(g):
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient encountered")


# ---------------------------------------------------------------------------
# Auxiliary-variable kernels
# ---------------------------------------------------------------------------


def exchange_step(model: DoublyIntractableModel, theta, proposal, rng: RngStream) -> StepResult:
    """One exchange transition; the intractable normalizer never appears.

    The auxiliary outcome is simulated at the proposed state; its
    unnormalized likelihoods swap roles between numerator and denominator so
    Z(theta) cancels exactly.
    """
    theta_p = proposal.sample(theta, rng)
    w = model.exact_sample(theta_p, rng)
    x = model.observed
    log_r = (
        model.log_prior(theta_p)
        + model.log_f(theta_p, x)
        + model.log_f(theta, w)
        - model.log_prior(theta)
        - model.log_f(theta, x)
        - model.log_f(theta_p, w)
        + proposal.log_density(theta_p, theta)
        - proposal.log_density(theta, theta_p)
    )
    return _decide(theta, theta_p, log_r, rng, 1, "exchange")


def poissonmh_step(model, theta, lam: float, proposal, rng: RngStream,
                   alias: AliasTable | None = None) -> StepResult:
    """Bounded-factor minibatch MH: Poisson counts drawn at the current state.

    The sparse acceptance ratio sums s_i * [log(lam*M_i/L + phi_i(theta'))
    - log(lam*M_i/L + phi_i(theta))] over the minibatch only.
    """
    theta_p = proposal.sample(theta, rng)
    if not model.support(theta_p):
        return _reject(theta, 0, "poissonmh")
    aux = draw_poisson_minibatch(model, theta, lam, rng, alias)
    log_r = _poisson_sparse_ratio(model, theta, theta_p, lam, aux)
    log_r += proposal.log_density(theta_p, theta) - proposal.log_density(theta, theta_p)
    return _decide(theta, theta_p, log_r, rng, aux.total_draws, "poissonmh")


def _poisson_sparse_ratio(model, theta, theta_p, lam, aux: PoissonAuxState) -> float:
    if aux.size == 0:
        return 0.0
    base = lam * model.M[aux.indices] / model.L
    phi_cur = np.clip(model.phi_batch(aux.indices, theta), 0.0, None)
    phi_new = np.clip(model.phi_batch(aux.indices, theta_p), 0.0, None)
    return float(np.sum(aux.counts * (np.log(base + phi_new) - np.log(base + phi_cur))))


def tunamh_step(model, theta, chi: float, proposal, rng: RngStream,
                alias: AliasTable | None = None) -> StepResult:
    """Lipschitz-factor minibatch MH: counts drawn from the pair (theta, theta')."""
    theta_p = proposal.sample(theta, rng)
    if not model.support(theta_p):
        return _reject(theta, 0, "tunamh")
    aux = draw_tuna_minibatch(model, theta, theta_p, chi, rng, alias)
    log_r = _tuna_sparse_ratio(model, theta, theta_p, aux)
    log_r += proposal.log_density(theta_p, theta) - proposal.log_density(theta, theta_p)
    return _decide(theta, theta_p, log_r, rng, aux.total_draws, "tunamh")


def _tuna_sparse_ratio(model, theta, theta_p, aux: PoissonAuxState) -> float:
    if aux.size == 0:
        return 0.0
    m_val = float(model.M(theta, theta_p))
    base = aux.lambda_used * model.c[aux.indices] / model.C
    phi_fwd = np.clip(tuna_phi(model, theta, theta_p, aux.indices, m_val), 0.0, None)
    # phi(theta', theta) = c_i*M - phi(theta, theta'), but recompute for clarity.
    phi_rev = np.clip(tuna_phi(model, theta_p, theta, aux.indices, m_val), 0.0, None)
    return float(np.sum(aux.counts * (np.log(base + phi_rev) - np.log(base + phi_fwd))))


def minibatch_grad_log_proxy(model, theta, lam: float, aux: PoissonAuxState) -> np.ndarray:
    """Gradient of the minibatch proxy log-density log[pi(theta) P_theta(omega1)].

    Equals sum over the minibatch of s_i * grad phi_i / (lam*M_i/L + phi_i);
    the full-dataset terms cancel, so the cost is O(|S| * d).
    """
    if aux.size == 0:
        return np.zeros(model.d)
    base = lam * model.M[aux.indices] / model.L
    phi = np.clip(model.phi_batch(aux.indices, theta), 0.0, None)
    grads = model.grad_phi_batch(aux.indices, theta)
    weights = aux.counts / (base + phi)
    return grads.T @ weights


def lb_poisson_step(model, theta, lam: float, g_tag: str, sigma: float, rng: RngStream,
                    alias: AliasTable | None = None) -> StepResult:
    """Locally balanced minibatch step: proposal steered by the proxy gradient.

    The same count vector serves as proposal auxiliary and ratio estimator,
    so the acceptance ratio touches only the minibatch: the sparse target
    part plus the proposal density ratio, whose reverse drift re-evaluates
    the proxy gradient at theta' under the identical counts.

    g_tag='sqrt' gives the Langevin-type variant, g_tag='barker' the
    two-sided skew variant.
    """
    if g_tag not in BALANCING_TAGS:
        raise ValueError(f"unknown balancing tag {g_tag!r}")
    aux = draw_poisson_minibatch(model, theta, lam, rng, alias)
    grad_cur = minibatch_grad_log_proxy(model, theta, lam, aux)
    kind = "poisson-mala" if g_tag == "sqrt" else "poisson-barker"

    if g_tag == "sqrt":
        mean_fwd = theta + 0.5 * sigma**2 * grad_cur
        theta_p = mean_fwd + sigma * rng.gen.standard_normal(theta.shape)
        if not model.support(theta_p):
            return _reject(theta, aux.total_draws, kind)
        grad_new = minibatch_grad_log_proxy(model, theta_p, lam, aux)
        mean_rev = theta_p + 0.5 * sigma**2 * grad_new
        log_q_diff = (
            -0.5 * float(np.sum((theta - mean_rev) ** 2)) / sigma**2
            + 0.5 * float(np.sum((theta_p - mean_fwd) ** 2)) / sigma**2
        )
    else:
        z = sigma * rng.gen.standard_normal(theta.shape)
        p_plus = 1.0 / (1.0 + np.exp(-np.clip(grad_cur * z, -700, 700)))
        b = np.where(rng.gen.random(theta.shape) < p_plus, 1.0, -1.0)
        delta = b * z
        theta_p = theta + delta
        if not model.support(theta_p):
            return _reject(theta, aux.total_draws, kind)
        grad_new = minibatch_grad_log_proxy(model, theta_p, lam, aux)
        log_q_diff = float(
            np.sum(np.logaddexp(0.0, -grad_cur * delta) - np.logaddexp(0.0, grad_new * delta))
        )

    log_r = _poisson_sparse_ratio(model, theta, theta_p, lam, aux) + log_q_diff
    return _decide(theta, theta_p, log_r, rng, aux.total_draws, kind)


def tuna_sgld_step(model, theta, chi: float, K: int, epsilon: float,
                   grad_clip: float | None, rng: RngStream,
                   alias: AliasTable | None = None) -> StepResult:
    """Langevin proposal from a uniform minibatch, corrected by a Tuna ratio.

    The proposal minibatch B (size K, without replacement) estimates the
    log-target gradient; an independent second minibatch of Poisson counts
    estimates the target ratio.  The reverse proposal density reuses the same
    B at theta', with the identical norm-clipping rule, so clipping lives
    entirely inside the proposal and never biases the stationary law.
    """
    if K > model.N:
        raise ValueError("K must be at most N")
    batch = rng.choice_without_replacement(model.N, K)
    drift_fwd = _sgld_drift(model, theta, batch, epsilon, grad_clip)
    theta_p = theta + drift_fwd + epsilon * rng.gen.standard_normal(theta.shape)
    if not model.support(theta_p):
        return _reject(theta, 0, "tuna-sgld")
    aux = draw_tuna_minibatch(model, theta, theta_p, chi, rng, alias)
    drift_rev = _sgld_drift(model, theta_p, batch, epsilon, grad_clip)
    log_q_diff = (
        -0.5 * float(np.sum((theta - theta_p - drift_rev) ** 2)) / epsilon**2
        + 0.5 * float(np.sum((theta_p - theta - drift_fwd) ** 2)) / epsilon**2
    )
    log_r = _tuna_sparse_ratio(model, theta, theta_p, aux) + log_q_diff
    return _decide(theta, theta_p, log_r, rng, aux.total_draws, "tuna-sgld")


def _sgld_drift(model, theta, batch, epsilon, grad_clip):
    grad_est = -(model.N / batch.shape[0]) * np.sum(model.grad_U_batch(batch, theta), axis=0)
    if grad_clip is not None:
        norm = float(np.linalg.norm(grad_est))
        if norm > grad_clip:
            grad_est = grad_est * (grad_clip / norm)
    return 0.5 * epsilon**2 * grad_est


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------


@dataclass
class ChainTrace:
    """Positions plus per-step metadata for one chain run."""

    thetas: np.ndarray
    accepted: np.ndarray
    batch_sizes: np.ndarray
    step_seconds: np.ndarray
    partial: bool = False
    error: str | None = None

    @property
    def n_steps(self) -> int:
        return self.accepted.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.n_steps else 0.0

    @property
    def cumulative_seconds(self) -> np.ndarray:
        return np.cumsum(self.step_seconds)

    @property
    def elapsed_seconds(self) -> float:
        return float(self.step_seconds.sum())


def run_chain(step_fn, theta0: np.ndarray, T: int, rng: RngStream,
              budget_seconds: float | None = None) -> ChainTrace:
    """Drive ``step_fn`` for T transitions from theta0.

    ``step_fn(theta, rng) -> StepResult``.  A step error aborts the run and
    returns the partial trace with the error recorded.  A wall-time budget
    truncates the trace at the step where it ran out (a normal outcome, not
    flagged as partial).  Identical (seed, stream_id) reproduce the random
    content of the trace exactly; wall times are environment-dependent and
    excluded from any determinism contract.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    theta0 = np.asarray(theta0, dtype=float)
    thetas = np.empty((T + 1, theta0.size))
    thetas[0] = theta0
    accepted = np.zeros(T, dtype=bool)
    batch_sizes = np.zeros(T, dtype=np.int64)
    seconds = np.zeros(T)
    theta = theta0
    spent = 0.0
    for t in range(T):
        tic = time.perf_counter()
        try:
            res = step_fn(theta, rng)
        except (AuxmcError, FloatingPointError, ValueError) as exc:
            return ChainTrace(
                thetas=thetas[: t + 1].copy(),
                accepted=accepted[:t].copy(),
                batch_sizes=batch_sizes[:t].copy(),
                step_seconds=seconds[:t].copy(),
                partial=True,
                error=f"{type(exc).__name__}: {exc}",
            )
        seconds[t] = time.perf_counter() - tic
        spent += seconds[t]
        theta = res.theta_new
        thetas[t + 1] = theta
        accepted[t] = res.accepted
        batch_sizes[t] = res.batch_size
        if budget_seconds is not None and spent >= budget_seconds:
            return ChainTrace(
                thetas=thetas[: t + 2].copy(),
                accepted=accepted[: t + 1].copy(),
                batch_sizes=batch_sizes[: t + 1].copy(),
                step_seconds=seconds[: t + 1].copy(),
            )
    return ChainTrace(thetas, accepted, batch_sizes, seconds)
