"""Poisson minibatch generation by thinning, with O(1) categorical draws.

The subsampling trick: instead of drawing N independent Poisson counts per
step, draw one total count B from a Poisson whose mean upper-bounds the sum
of the per-datum means, assign each of the B balls to a datum through an
alias table, and keep a ball at datum i with the ratio of the true mean to
the bounding mean.  The kept counts are exactly the independent Poissons the
samplers need, at O(B) cost per step after an O(N) one-time table build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import LipschitzFactorModel, ModelContractError, RngStream, ZeroDensityError

# Floating-point slack at the promise boundaries: potentials in [-TOL, 0) are
# treated as exactly 0, and keep-probabilities may overshoot 1 by TOL.
PROMISE_TOL = 1e-12


class InvalidWeightsError(ValueError):
    """Alias construction rejected the weight vector."""


@dataclass(frozen=True)
class AliasTable:
    """Walker alias table for a categorical distribution on {0..N-1}.

    ``prob[i]`` is the probability of keeping column i in cell i; otherwise the
    draw forwards to ``alias[i]``.
    """

    prob: np.ndarray
    alias: np.ndarray

    @property
    def n(self) -> int:
        return self.prob.shape[0]

    def draw(self, rng: RngStream, size: int) -> np.ndarray:
        """Draw ``size`` indices in O(size)."""
        cells = rng.gen.integers(0, self.n, size=size)
        keep = rng.gen.random(size) < self.prob[cells]
        return np.where(keep, cells, self.alias[cells])

    def reconstructed(self) -> np.ndarray:
        """Recover the normalized weights encoded by the table."""
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / self.n


def build_alias(weights: np.ndarray) -> AliasTable:
    """Build an alias table from nonnegative weights (not necessarily normalized).

    Two-worklist construction: cells below average probability are paired with
    cells above it; ties at exactly 1.0 stay on the large list.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidWeightsError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidWeightsError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise InvalidWeightsError("at least one weight must be positive")

    n = w.size
    scaled = w * (n / total)
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    # Leftovers are 1.0 up to rounding.
    for i in small + large:
        prob[i] = 1.0
    return AliasTable(prob=prob, alias=alias)


@dataclass
class PoissonAuxState:
    """Sparse Poisson count vector: the minibatch.

    ``indices`` and ``counts`` are aligned, sorted by index, counts >= 1.
    ``total_draws`` is the number of balls B drawn before thinning (the
    per-step cost driver); ``lambda_used`` is the rate hyperparameter the
    draw was made with.
    """

    indices: np.ndarray
    counts: np.ndarray
    total_draws: int
    lambda_used: float

    @property
    def size(self) -> int:
        """Number of distinct data points in the minibatch."""
        return self.indices.shape[0]

    @property
    def kept_total(self) -> int:
        return int(self.counts.sum())

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=np.int64)
        out[self.indices] = self.counts
        return out


def _thin(drawn: np.ndarray, keep_prob_of_unique, rng: RngStream):
    """Group drawn balls by datum and keep each with its datum's probability.

    ``keep_prob_of_unique`` maps the unique index array to keep probabilities;
    grouping first means each datum's potential is evaluated once regardless
    of multiplicity.  Binomial thinning of the grouped counts has exactly the
    per-ball Bernoulli law.
    """
    uniq, mult = np.unique(drawn, return_counts=True)
    p = keep_prob_of_unique(uniq)
    bad = (p < -PROMISE_TOL) | (p > 1.0 + PROMISE_TOL)
    if np.any(bad):
        i = int(uniq[np.argmax(bad)])
        raise ModelContractError(
            f"keep probability outside [0, 1] at datum {i}: promise violated"
        )
    p = np.clip(p, 0.0, 1.0)
    kept = rng.gen.binomial(mult, p)
    nz = kept > 0
    return uniq[nz], kept[nz].astype(np.int64)


def poisson_keep_probs(model, theta: np.ndarray, lam: float, idx: np.ndarray) -> np.ndarray:
    """Thinning probabilities (lam*M_i/L + phi_i(theta)) / (lam*M_i/L + M_i)."""
    base = lam * model.M[idx] / model.L
    phi = model.phi_batch(idx, theta)
    if np.any(phi < -PROMISE_TOL) or np.any(phi > model.M[idx] + PROMISE_TOL):
        i = int(idx[np.argmax((phi < -PROMISE_TOL) | (phi > model.M[idx] + PROMISE_TOL))])
        raise ModelContractError(f"phi_{i}(theta) outside [0, M_{i}]: promise violated")
    return (base + np.clip(phi, 0.0, None)) / (base + model.M[idx])


def draw_poisson_minibatch(
    model,
    theta: np.ndarray,
    lam: float,
    rng: RngStream,
    alias: AliasTable | None = None,
) -> PoissonAuxState:
    """Draw counts s_i ~ Poi(lam*M_i/L + phi_i(theta)) jointly, by thinning.

    Expected ball count is lam + L; expected kept total is lam + sum_i phi_i.
    The alias table over Lambda_i = lam*M_i/L + M_i can be precomputed once
    per (model, lam); note Lambda_i is proportional to M_i, so any table built
    from the M vector works for every lam.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not model.support(theta):
        raise ZeroDensityError("cannot draw a minibatch outside the support")
    if alias is None:
        alias = build_alias(model.M)
    big_lambda = lam + model.L
    n_balls = int(rng.gen.poisson(big_lambda))
    if n_balls == 0:
        return PoissonAuxState(
            indices=np.empty(0, dtype=np.int64),
            counts=np.empty(0, dtype=np.int64),
            total_draws=0,
            lambda_used=lam,
        )
    drawn = alias.draw(rng, n_balls)
    idx, counts = _thin(drawn, lambda u: poisson_keep_probs(model, theta, lam, u), rng)
    return PoissonAuxState(indices=idx, counts=counts, total_draws=n_balls, lambda_used=lam)


def tuna_phi(model: LipschitzFactorModel, theta, theta_p, idx: np.ndarray, m_val: float):
    """Pair potential phi_i(theta, theta') = (U_i(theta')-U_i(theta))/2 + c_i*M/2."""
    du = model.U_batch(idx, theta_p) - model.U_batch(idx, theta)
    return 0.5 * du + 0.5 * model.c[idx] * m_val


def tuna_keep_probs(
    model: LipschitzFactorModel, theta, theta_p, lam: float, m_val: float, idx: np.ndarray
) -> np.ndarray:
    """Thinning probabilities (lam*c_i + C*phi_i(theta,theta')) / (lam*c_i + C*c_i*M)."""
    phi = tuna_phi(model, theta, theta_p, idx, m_val)
    hi = model.c[idx] * m_val
    if np.any(phi < -PROMISE_TOL) or np.any(phi > hi + PROMISE_TOL):
        i = int(idx[np.argmax((phi < -PROMISE_TOL) | (phi > hi + PROMISE_TOL))])
        raise ModelContractError(
            f"pair potential at datum {i} outside [0, c_i*M]: Lipschitz promise violated"
        )
    num = lam * model.c[idx] + model.C * np.clip(phi, 0.0, None)
    den = lam * model.c[idx] + model.C * hi
    return num / den


def draw_tuna_minibatch(
    model: LipschitzFactorModel,
    theta: np.ndarray,
    theta_p: np.ndarray,
    chi: float,
    rng: RngStream,
    alias: AliasTable | None = None,
) -> PoissonAuxState:
    """Draw counts s_i ~ Poi(lam*c_i/C + phi_i(theta,theta')) with lam = chi*C^2*M^2.

    The alias table is over p_i = c_i / C and is proposal-independent, so it is
    built once per model.  A null move (M = 0) yields an empty minibatch.
    """
    if chi <= 0:
        raise ValueError("chi must be positive")
    if not (model.support(theta) and model.support(theta_p)):
        raise ZeroDensityError("cannot draw a minibatch outside the support")
    m_val = float(model.M(theta, theta_p))
    lam = chi * model.C**2 * m_val**2
    if m_val == 0.0:
        return PoissonAuxState(
            indices=np.empty(0, dtype=np.int64),
            counts=np.empty(0, dtype=np.int64),
            total_draws=0,
            lambda_used=0.0,
        )
    if alias is None:
        alias = build_alias(model.c)
    n_balls = int(rng.gen.poisson(lam + model.C * m_val))
    if n_balls == 0:
        return PoissonAuxState(
            indices=np.empty(0, dtype=np.int64),
            counts=np.empty(0, dtype=np.int64),
            total_draws=0,
            lambda_used=lam,
        )
    drawn = alias.draw(rng, n_balls)
    idx, counts = _thin(
        drawn, lambda u: tuna_keep_probs(model, theta, theta_p, lam, m_val, u), rng
    )
    return PoissonAuxState(indices=idx, counts=counts, total_draws=n_balls, lambda_used=lam)


def draw_poisson_minibatch_many(model, theta, lam, rng: RngStream, n_draws: int) -> np.ndarray:
    """Dense count matrix (n_draws, N) of independent minibatch draws.

    Literal ball-by-ball thinning vectorized across replicate draws; shares
    the keep-probability computation with the per-step path.  Oracle and
    calibration use only (dense output, so small N).
    """
    alias = build_alias(model.M)
    b = rng.gen.poisson(lam + model.L, size=n_draws)
    out = np.zeros((n_draws, model.N), dtype=np.int64)
    total = int(b.sum())
    if total == 0:
        return out
    balls = alias.draw(rng, total)
    keep_all = poisson_keep_probs(model, theta, lam, np.arange(model.N))
    kept = rng.gen.random(total) < keep_all[balls]
    rep = np.repeat(np.arange(n_draws), b)
    np.add.at(out, (rep[kept], balls[kept]), 1)
    return out


def draw_tuna_minibatch_many(
    model: LipschitzFactorModel, theta, theta_p, chi, rng: RngStream, n_draws: int
) -> np.ndarray:
    """Dense Tuna-style count matrix (n_draws, N); see draw_poisson_minibatch_many."""
    m_val = float(model.M(theta, theta_p))
    lam = chi * model.C**2 * m_val**2
    out = np.zeros((n_draws, model.N), dtype=np.int64)
    if m_val == 0.0:
        return out
    alias = build_alias(model.c)
    b = rng.gen.poisson(lam + model.C * m_val, size=n_draws)
    total = int(b.sum())
    if total == 0:
        return out
    balls = alias.draw(rng, total)
    keep_all = tuna_keep_probs(model, theta, theta_p, lam, m_val, np.arange(model.N))
    kept = rng.gen.random(total) < keep_all[balls]
    rep = np.repeat(np.arange(n_draws), b)
    np.add.at(out, (rep[kept], balls[kept]), 1)
    return out


def poisson_means(model, theta, lam: float) -> np.ndarray:
    """Per-datum Poisson means lam*M_i/L + phi_i(theta) over the full dataset."""
    idx = np.arange(model.N)
    return lam * model.M / model.L + model.phi_batch(idx, theta)


def tuna_means(model: LipschitzFactorModel, theta, theta_p, chi: float) -> np.ndarray:
    """Per-datum Tuna means lam*c_i/C + phi_i(theta,theta') over the full dataset."""
    m_val = float(model.M(theta, theta_p))
    lam = chi * model.C**2 * m_val**2
    idx = np.arange(model.N)
    return lam * model.c / model.C + tuna_phi(model, theta, theta_p, idx, m_val)


def aux_log_density_full(model, theta, state: PoissonAuxState, theta_p=None) -> float:
    """Exact log-density of a full count vector, zero coordinates included.

    For a bounded model the means are taken at ``theta``; passing ``theta_p``
    switches to the Tuna pair means.  Enumeration-oracle use only: the cost is
    O(N).
    """
    if theta_p is None:
        mu = poisson_means(model, theta, state.lambda_used)
    else:
        m_val = float(model.M(theta, theta_p))
        idx = np.arange(model.N)
        mu = state.lambda_used * model.c / model.C + tuna_phi(
            model, theta, theta_p, idx, m_val
        )
    s = state.dense(model.N).astype(float)
    # log pmf = -mu + s*log(mu) - log(s!); 0*log(0) handled as 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(s > 0, s * np.log(mu), 0.0)
    if np.any((s > 0) & (mu <= 0)):
        return -np.inf
    return float(np.sum(-mu + term - gammaln(s + 1.0)))
