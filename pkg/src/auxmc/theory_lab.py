"""Exact finite-state kernels for the auxiliary-variable samplers.

On a small enumerated parameter grid with N <= 3 data points, every sampler's
transition kernel can be computed exactly by summing over the (truncated)
auxiliary spaces.  Three kernels are built per sampler:

* P_ideal -- Metropolis-Hastings with the mixture proposal
  q_ideal(theta, .) = E_{omega1}[q_{omega1}(theta, .)];
* P_MwG   -- the kernel that reuses omega1 as the ratio estimator
  (Metropolis-within-Gibbs on the augmented target);
* P_aux   -- the implemented two-auxiliary kernel.

These satisfy the off-diagonal ordering p_aux <= p_MwG <= p_ideal, the
pointwise bound p_aux >= (1 - d_TV) p_MwG, and spectral-gap comparisons; the
functions here turn each statement into a numerical check.

Poisson supports are infinite, so enumerations truncate per coordinate at
tail mass <= tail/N.  Truncated mass is never renormalized: it lands on the
kernel diagonal as rejection and the deficit is reported, erroring out above
1e-10.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln
from scipy.stats import poisson as poisson_dist

from .core import AuxmcError
from .minibatch import tuna_phi
from .models import FiniteExpFamily, LinearLipschitzToy, QuadraticBoundedToy
from .samplers import log_balancing

DEFAULT_TAIL = 1e-12


class EnumerationDeficitError(AuxmcError):
    """Truncated auxiliary enumeration left more mass behind than allowed."""


# ---------------------------------------------------------------------------
# Poisson enumeration helpers
# ---------------------------------------------------------------------------


def poisson_tail_cap(mu: float, tail: float) -> int:
    """Smallest k with P(Poi(mu) > k) <= tail."""
    if mu <= 0:
        return 0
    k = int(mu + 10.0 * math.sqrt(mu) + 10.0)
    while poisson_dist.sf(k, mu) > tail:
        k += max(1, k // 4)
    while k > 0 and poisson_dist.sf(k - 1, mu) <= tail:
        k -= 1
    return k


def enumerate_count_vectors(mu_max: np.ndarray, tail: float) -> np.ndarray:
    """All count vectors with per-coordinate cap at tail mass tail/N."""
    n = mu_max.shape[0]
    caps = [poisson_tail_cap(float(m), tail / n) for m in mu_max]
    axes = [np.arange(c + 1) for c in caps]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def product_poisson_logpmf(counts: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Joint log-pmf of independent Poissons for each row of ``counts``."""
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(counts > 0, counts * np.log(mu)[None, :], 0.0)
    out = np.sum(-mu[None, :] + logs - gammaln(counts + 1.0), axis=1)
    dead = np.any((counts > 0) & (mu[None, :] <= 0), axis=1)
    out[dead] = -np.inf
    return out


def _accept_prob(log_r: np.ndarray, accept: str) -> np.ndarray:
    """a(r) in log-ratio form: 'min' -> min(1, r); 'barker' -> r/(1+r)."""
    log_r = np.asarray(log_r, dtype=float)
    if accept == "min":
        return np.exp(np.minimum(0.0, log_r))
    if accept == "barker":
        return expit(log_r)
    raise ValueError(f"unknown acceptance function {accept!r}")


# ---------------------------------------------------------------------------
# Toy chain specifications
# ---------------------------------------------------------------------------


class ExactToy:
    """Enumerable instantiation of one sampler on a finite grid.

    Subclasses fix the auxiliary structure: the omega1 support with its
    per-state log-probabilities, the proposal matrix for each omega1, and the
    conditional omega2 law for each ordered state pair.  The builder only
    sees this interface.
    """

    name: str = "toy"
    grid: np.ndarray
    log_pi: np.ndarray

    def pi(self) -> np.ndarray:
        w = np.exp(self.log_pi - self.log_pi.max())
        return w / w.sum()

    @property
    def n_states(self) -> int:
        return self.grid.shape[0]

    def omega1_logp(self) -> np.ndarray:
        """(n_states, n_omega1) log-probabilities; a single Null column by default."""
        return np.zeros((self.n_states, 1))

    def omega1_deficit(self) -> float:
        return 0.0

    def proposal(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def omega2_logs(self, i: int, j: int, k: int):
        """(log p_fwd, log p_rev, deficit) over the pair's omega2 enumeration.

        Forward means the transition grid[i] -> grid[j].  The enumeration set
        must be identical for (i, j) and (j, i) so that truncation removes
        only symmetric mass.
        """
        zero = np.zeros(1)
        return zero, zero, 0.0

    def pair_tv(self, i: int, j: int) -> float:
        """sup over omega1 of d_TV between the two conditional omega2 laws."""
        lpf, lpr, deficit = self.omega2_logs(i, j, 0)
        return 0.5 * float(np.sum(np.abs(np.exp(lpf) - np.exp(lpr)))) + deficit


def uniform_other_proposal(n: int) -> np.ndarray:
    q = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(q, 0.0)
    return q


class RwmToy(ExactToy):
    """Plain Metropolis on the grid: both auxiliaries are Null."""

    name = "rwm"

    def __init__(self, model: QuadraticBoundedToy, grid: np.ndarray, Q: np.ndarray | None = None):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.Q = uniform_other_proposal(self.n_states) if Q is None else Q
        self.log_pi = np.array(
            [model.phi_total(np.atleast_1d(t)) for t in self.grid]
        )

    def proposal(self, k):
        return self.Q


class ExchangeToy(ExactToy):
    """Exchange sampler on a finite exponential family: omega2 is a fresh outcome."""

    name = "exchange"

    def __init__(self, fef: FiniteExpFamily, Q: np.ndarray | None = None):
        self.fef = fef
        self.grid = fef.theta_grid
        self.Q = uniform_other_proposal(self.n_states) if Q is None else Q
        logz = np.array(
            [np.log(np.sum(np.exp(t * fef.suff_stat))) for t in fef.theta_grid]
        )
        self.log_pi = (
            np.log(fef.prior_weights)
            + fef.theta_grid * fef.suff_stat[fef.observed]
            - logz
        )
        self._outcome_logp = np.stack(
            [np.log(fef.outcome_probs(t)) for t in fef.theta_grid]
        )

    def proposal(self, k):
        return self.Q

    def omega2_logs(self, i, j, k):
        # The outcome is simulated at the proposed state.
        return self._outcome_logp[j], self._outcome_logp[i], 0.0


class PoissonMHToy(ExactToy):
    """Bounded-factor minibatch MH: omega2 is the count vector drawn at the source."""

    name = "poissonmh"

    def __init__(self, model: QuadraticBoundedToy, grid: np.ndarray, lam: float,
                 Q: np.ndarray | None = None, tail: float = DEFAULT_TAIL):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.lam = float(lam)
        self.tail = tail
        self.Q = uniform_other_proposal(self.n_states) if Q is None else Q
        self.log_pi = np.array([model.phi_total(np.atleast_1d(t)) for t in self.grid])
        idx = np.arange(model.N)
        self.means = np.stack(
            [
                self.lam * model.M / model.L + model.phi_batch(idx, np.atleast_1d(t))
                for t in self.grid
            ]
        )
        self.counts = enumerate_count_vectors(self.means.max(axis=0), tail)
        self._logpmf = np.stack(
            [product_poisson_logpmf(self.counts, self.means[s]) for s in range(self.n_states)]
        )
        self._deficit = float(np.max(1.0 - np.exp(self._logpmf).sum(axis=1)))

    def proposal(self, k):
        return self.Q

    def omega2_logs(self, i, j, k):
        return self._logpmf[i], self._logpmf[j], self._deficit

    def pair_means(self, i, j):
        return self.means[i], self.means[j]


class TunaMHToy(ExactToy):
    """Lipschitz-factor minibatch MH: counts drawn from the ordered pair."""

    name = "tunamh"

    def __init__(self, model: LinearLipschitzToy, grid: np.ndarray, chi: float,
                 Q: np.ndarray | None = None, tail: float = DEFAULT_TAIL):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.chi = float(chi)
        self.tail = tail
        self.Q = uniform_other_proposal(self.n_states) if Q is None else Q
        self.log_pi = np.array([-model.U_total(np.atleast_1d(t)) for t in self.grid])
        self._cache: dict = {}

    def proposal(self, k):
        return self.Q

    def pair_means(self, i, j):
        model = self.model
        ti = np.atleast_1d(self.grid[i])
        tj = np.atleast_1d(self.grid[j])
        m_val = model.M(ti, tj)
        lam = self.chi * model.C**2 * m_val**2
        idx = np.arange(model.N)
        mu_fwd = lam * model.c / model.C + np.clip(tuna_phi(model, ti, tj, idx, m_val), 0, None)
        mu_rev = lam * model.c / model.C + np.clip(tuna_phi(model, tj, ti, idx, m_val), 0, None)
        return mu_fwd, mu_rev

    def _pair(self, i, j):
        a, b = (i, j) if i < j else (j, i)
        if (a, b) not in self._cache:
            mu_fwd, mu_rev = self.pair_means(a, b)
            counts = enumerate_count_vectors(np.maximum(mu_fwd, mu_rev), self.tail)
            lpf = product_poisson_logpmf(counts, mu_fwd)
            lpr = product_poisson_logpmf(counts, mu_rev)
            deficit = float(max(1.0 - np.exp(lpf).sum(), 1.0 - np.exp(lpr).sum()))
            self._cache[(a, b)] = (lpf, lpr, deficit)
        lpf, lpr, deficit = self._cache[(a, b)]
        return (lpf, lpr, deficit) if (i, j) == (a, b) else (lpr, lpf, deficit)

    def omega2_logs(self, i, j, k):
        return self._pair(i, j)


class LbPoissonToy(ExactToy):
    """Locally balanced minibatch sampler: omega1 = omega2 = the count vector.

    The proposal for each count vector is the grid-normalized first-order
    locally balanced kernel whose drift is the proxy gradient under those
    counts.
    """

    def __init__(self, model: QuadraticBoundedToy, grid: np.ndarray, lam: float,
                 g_tag: str, sigma: float, tail: float = DEFAULT_TAIL):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.lam = float(lam)
        self.g_tag = g_tag
        self.sigma = float(sigma)
        self.name = "poisson-mala" if g_tag == "sqrt" else "poisson-barker"
        self.log_pi = np.array([model.phi_total(np.atleast_1d(t)) for t in self.grid])
        idx = np.arange(model.N)
        self.means = np.stack(
            [
                self.lam * model.M / model.L + model.phi_batch(idx, np.atleast_1d(t))
                for t in self.grid
            ]
        )
        self.counts = enumerate_count_vectors(self.means.max(axis=0), tail)
        self._lp1 = np.stack(
            [product_poisson_logpmf(self.counts, self.means[s]) for s in range(self.n_states)]
        )
        self._deficit = float(np.max(1.0 - np.exp(self._lp1).sum(axis=1)))
        # Proxy drift per (omega1, state): counts @ [phi'_c / (base_c + phi_c)].
        n = self.n_states
        drift = np.empty((self.counts.shape[0], n))
        for s in range(n):
            t = np.atleast_1d(self.grid[s])
            g = model.grad_phi_batch(idx, t)[:, 0]
            drift[:, s] = self.counts @ (g / self.means[s])
        self._drift = drift
        disp = self.grid[None, :] - self.grid[:, None]
        log_mu = -0.5 * disp**2 / self.sigma**2
        # rows[v, i, j] = normalized q_{omega1=v}(theta_i, theta_j)
        logw = log_balancing(g_tag, drift[:, :, None] * disp[None, :, :]) + log_mu[None, :, :]
        logw -= logw.max(axis=2, keepdims=True)
        w = np.exp(logw)
        self._rows = w / w.sum(axis=2, keepdims=True)

    def omega1_logp(self):
        return self._lp1

    def omega1_deficit(self):
        return self._deficit

    def proposal(self, k):
        return self._rows[k]

    def omega2_logs(self, i, j, k):
        # omega2 coincides with omega1: a single point of conditional mass one.
        zero = np.zeros(1)
        return zero, zero, 0.0

    def pair_tv(self, i, j):
        return 0.0

    def proxy_log_target(self, k: int) -> np.ndarray:
        """log [pi(theta) * P_theta(omega1_k)] over states, unnormalized."""
        return self.log_pi + self._lp1[:, k]


class TunaSgldToy(ExactToy):
    """Langevin-from-subset proposal with an independent Tuna ratio estimator.

    omega1 ranges over all K-subsets of the data (uniform, state-independent);
    omega2 is the pair-dependent count vector, independent of omega1.
    """

    name = "tuna-sgld"

    def __init__(self, model: LinearLipschitzToy, grid: np.ndarray, chi: float,
                 K: int, epsilon: float, grad_clip: float | None,
                 tail: float = DEFAULT_TAIL):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.chi = float(chi)
        self.tail = tail
        self.log_pi = np.array([-model.U_total(np.atleast_1d(t)) for t in self.grid])
        self.subsets = list(itertools.combinations(range(model.N), K))
        n = self.n_states
        disp = self.grid[None, :] - self.grid[:, None]
        self._rows = np.empty((len(self.subsets), n, n))
        for k, sub in enumerate(self.subsets):
            batch = np.asarray(sub)
            drifts = np.empty(n)
            for s in range(n):
                t = np.atleast_1d(self.grid[s])
                g_est = -(model.N / K) * float(np.sum(model.grad_U_batch(batch, t)))
                if grad_clip is not None and abs(g_est) > grad_clip:
                    g_est = math.copysign(grad_clip, g_est)
                drifts[s] = 0.5 * epsilon**2 * g_est
            logw = -0.5 * (disp - drifts[:, None]) ** 2 / epsilon**2
            logw -= logw.max(axis=1, keepdims=True)
            w = np.exp(logw)
            self._rows[k] = w / w.sum(axis=1, keepdims=True)
        self._tuna = TunaMHToy(model, grid, chi, tail=tail)

    def omega1_logp(self):
        m = len(self.subsets)
        return np.full((self.n_states, m), -math.log(m))

    def proposal(self, k):
        return self._rows[k]

    def omega2_logs(self, i, j, k):
        return self._tuna.omega2_logs(i, j, 0)

    def pair_means(self, i, j):
        return self._tuna.pair_means(i, j)


# ---------------------------------------------------------------------------
# Kernel construction
# ---------------------------------------------------------------------------


@dataclass
class KernelTriple:
    """Exact kernels over the enumerated grid plus the normalized target."""

    P_ideal: np.ndarray
    P_MwG: np.ndarray
    P_aux: np.ndarray
    pi: np.ndarray
    grid: np.ndarray
    max_deficit: float


def mh_kernel(log_pi: np.ndarray, Q: np.ndarray, accept: str = "min") -> np.ndarray:
    """Metropolis-Hastings kernel for a fixed proposal matrix."""
    n = log_pi.shape[0]
    P = np.zeros((n, n))
    with np.errstate(divide="ignore"):
        logQ = np.log(Q)
    for i in range(n):
        for j in range(n):
            if i == j or Q[i, j] == 0.0:
                continue
            if Q[j, i] == 0.0:
                continue  # zero reverse flow: acceptance 0
            log_r = log_pi[j] + logQ[j, i] - log_pi[i] - logQ[i, j]
            P[i, j] = Q[i, j] * float(_accept_prob(log_r, accept))
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def build_kernels(toy: ExactToy, accept: str = "min",
                  max_deficit: float = 1e-10) -> KernelTriple:
    """Exact P_ideal, P_MwG, P_aux for a toy by summation over auxiliaries."""
    n = toy.n_states
    log_pi = toy.log_pi
    lp1 = toy.omega1_logp()
    m = lp1.shape[1]
    p1 = np.exp(lp1)
    rows = [toy.proposal(k) for k in range(m)]
    deficit = toy.omega1_deficit()

    q_ideal = np.zeros((n, n))
    for k in range(m):
        q_ideal += p1[:, k][:, None] * rows[k]
    # Truncated omega1 mass would leave substochastic mixture rows; the
    # deficit is reported rather than renormalized.
    P_ideal = mh_kernel(log_pi, q_ideal, accept)

    P_mwg = np.zeros((n, n))
    P_aux = np.zeros((n, n))
    for k in range(m):
        Q = rows[k]
        with np.errstate(divide="ignore"):
            logQ = np.log(Q)
        for i in range(n):
            for j in range(n):
                if i == j or Q[i, j] == 0.0:
                    continue
                base = log_pi[j] + lp1[j, k] + logQ[j, i] - log_pi[i] - lp1[i, k] - logQ[i, j]
                weight = p1[i, k] * Q[i, j]
                P_mwg[i, j] += weight * float(_accept_prob(base, accept))
                lpf, lpr, d2 = toy.omega2_logs(i, j, k)
                deficit = max(deficit, d2)
                acc = _accept_prob(base + lpr - lpf, accept)
                P_aux[i, j] += weight * float(np.sum(np.exp(lpf) * acc))
    if deficit > max_deficit:
        raise EnumerationDeficitError(
            f"enumeration deficit {deficit:.3e} exceeds {max_deficit:.1e}"
        )
    np.fill_diagonal(P_mwg, 1.0 - P_mwg.sum(axis=1))
    np.fill_diagonal(P_aux, 1.0 - P_aux.sum(axis=1))
    return KernelTriple(P_ideal, P_mwg, P_aux, toy.pi(), toy.grid, deficit)


def conditional_kernel(toy: LbPoissonToy, k: int, accept: str = "min") -> np.ndarray:
    """Kernel conditional on a fixed omega1: MH targeting the proxy density."""
    return mh_kernel(toy.proxy_log_target(k), toy.proposal(k), accept)


# ---------------------------------------------------------------------------
# Spectral and comparison checks
# ---------------------------------------------------------------------------


def detailed_balance_residual(P: np.ndarray, pi: np.ndarray) -> float:
    """max_ij |pi_i P_ij - pi_j P_ji|."""
    flow = pi[:, None] * P
    return float(np.max(np.abs(flow - flow.T)))


def spectral_gap(P: np.ndarray, pi: np.ndarray, reversibility_tol: float = 1e-9) -> float:
    """1 minus the largest nontrivial absolute eigenvalue of a reversible kernel.

    The kernel is symmetrized as D^{1/2} P D^{-1/2} with D = diag(pi); this is
    only valid for reversible P, so the residual is checked first.
    """
    res = detailed_balance_residual(P, pi)
    if res > reversibility_tol:
        raise ValueError(f"kernel is not reversible (residual {res:.3e})")
    d = np.sqrt(pi)
    S = (d[:, None] * P) / d[None, :]
    S = 0.5 * (S + S.T)
    vals = np.linalg.eigvalsh(S)
    # Ascending order: vals[-1] is the trivial unit eigenvalue.
    return float(1.0 - max(abs(vals[0]), abs(vals[-2])))


@dataclass
class CheckRecord:
    name: str
    value: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.value - self.bound


def check_peskun(P_aux: np.ndarray, P_mwg: np.ndarray, P_ideal: np.ndarray,
                 tol: float = 1e-12) -> list[CheckRecord]:
    """Entrywise off-diagonal ordering p_aux <= p_MwG <= p_ideal."""
    off = ~np.eye(P_aux.shape[0], dtype=bool)
    v1 = float(np.max((P_aux - P_mwg)[off]))
    v2 = float(np.max((P_mwg - P_ideal)[off]))
    return [
        CheckRecord("peskun aux<=mwg (max excess)", v1, tol, v1 <= tol),
        CheckRecord("peskun mwg<=ideal (max excess)", v2, tol, v2 <= tol),
    ]


def kl_poisson(lam1: float, lam2: float) -> float:
    """KL divergence between Poisson laws: lam1*log(lam1/lam2) + lam2 - lam1."""
    if lam1 <= 0 or lam2 <= 0:
        raise ValueError("Poisson rates must be positive")
    return lam1 * math.log(lam1 / lam2) + lam2 - lam1


def tv_poisson(lam1: float, lam2: float, tail: float = 1e-14) -> float:
    """Upper bound on d_TV(Poi(lam1), Poi(lam2)): truncated half-L1 plus tails."""
    cap = poisson_tail_cap(max(lam1, lam2), tail)
    k = np.arange(cap + 1)
    p = poisson_dist.pmf(k, lam1)
    q = poisson_dist.pmf(k, lam2)
    return float(0.5 * np.sum(np.abs(p - q)) + 0.5 * ((1 - p.sum()) + (1 - q.sum())))


def tv_product_bound(means1: np.ndarray, means2: np.ndarray) -> float:
    """Lower bound on the overlap 1 - d_TV of two product-Poisson laws.

    Tensorization: 1 - d_TV(prod P_i, prod Q_i) >= prod_i (1 - d_TV(P_i, Q_i)),
    with each factor's TV computed numerically.
    """
    means1 = np.asarray(means1, dtype=float)
    means2 = np.asarray(means2, dtype=float)
    if means1.shape != means2.shape:
        raise ValueError("mean vectors must have equal length")
    if np.any(means1 <= 0) or np.any(means2 <= 0):
        raise ValueError("Poisson means must be positive")
    out = 1.0
    for a, b in zip(means1, means2):
        out *= 1.0 - tv_poisson(float(a), float(b))
    return out


def unbiasedness_check(toy, i: int, j: int, tail: float = 1e-16) -> float:
    """|E_omega[R] - pi_j/pi_i| by exact enumeration of the count law.

    R is the sampler's ratio estimator prod_c (mu_rev_c / mu_fwd_c)^{s_c};
    the expectation runs over the forward law at generous truncation.  The
    target ratio comes straight from the model's log-potentials, an
    independent path.
    """
    mu_fwd, mu_rev = toy.pair_means(i, j)
    counts = enumerate_count_vectors(np.maximum(mu_fwd, mu_rev) + 5.0, tail)
    lpf = product_poisson_logpmf(counts, mu_fwd)
    log_ratio = counts @ (np.log(mu_rev) - np.log(mu_fwd))
    expectation = float(np.sum(np.exp(lpf + log_ratio)))
    truth = math.exp(toy.log_pi[j] - toy.log_pi[i])
    return abs(expectation - truth)


def theorem1_entrywise(toy: ExactToy, triple: KernelTriple, slack: float = 1e-12) -> CheckRecord:
    """p_aux >= (1 - d_TV(theta, theta')) * p_MwG at every off-diagonal pair."""
    n = toy.n_states
    worst = np.inf
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            lhs = triple.P_aux[i, j]
            rhs = (1.0 - toy.pair_tv(i, j)) * triple.P_MwG[i, j]
            worst = min(worst, lhs - rhs)
    return CheckRecord(
        f"{toy.name}: pointwise density bound (min margin)", float(worst), -slack,
        worst >= -slack,
    )


def gap_bound_poissonmh(L: float, lam: float) -> float:
    """Gap prefactor e^{-1/e} exp(-L^2 / max(lam + L, 2*lam))."""
    return math.exp(-1.0 / math.e) * math.exp(-(L**2) / max(lam + L, 2.0 * lam))


def gap_bound_tunamh(chi: float) -> float:
    """Gap prefactor e^{-1/e} exp(-1/(2*chi))."""
    return math.exp(-1.0 / math.e) * math.exp(-1.0 / (2.0 * chi))


def gap_comparison_record(name: str, triple: KernelTriple, prefactor: float) -> CheckRecord:
    """Gap(P_aux) >= prefactor * Gap(P_ideal) as a check record."""
    gap_aux = spectral_gap(triple.P_aux, triple.pi)
    gap_ideal = spectral_gap(triple.P_ideal, triple.pi)
    return CheckRecord(name, gap_aux, prefactor * gap_ideal, gap_aux >= prefactor * gap_ideal)


def verify_gap_bounds(poisson_cases=(), tuna_cases=(), accept: str = "min") -> list[CheckRecord]:
    """Spectral-gap lower bounds plus the pointwise density bound, per case.

    ``poisson_cases`` holds (label, PoissonMHToy) pairs and ``tuna_cases``
    (label, TunaMHToy) pairs; for each, the matching closed-form prefactor is
    checked against the exact gaps and the pointwise bound is checked at
    every state pair.  Report-only: every outcome is a CheckRecord.
    """
    records: list[CheckRecord] = []
    for label, toy in poisson_cases:
        tri = build_kernels(toy, accept=accept)
        prefactor = gap_bound_poissonmh(toy.model.L, toy.lam)
        records.append(gap_comparison_record(f"poissonmh: gap bound {label}", tri, prefactor))
        records.append(theorem1_entrywise(toy, tri))
    for label, toy in tuna_cases:
        tri = build_kernels(toy, accept=accept)
        records.append(
            gap_comparison_record(f"tunamh: gap bound {label}", tri, gap_bound_tunamh(toy.chi))
        )
        records.append(theorem1_entrywise(toy, tri))
    return records
