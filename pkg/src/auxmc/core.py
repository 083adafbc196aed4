"""Core primitives: RNG streams, target-model interfaces, and full-batch evaluation.

Every sampler in this package consumes one of three model interfaces:

* ``BoundedFactorModel`` -- log-target is a sum of per-datum potentials
  ``phi_i(theta)`` that each live in ``[0, M_i]`` on the support.
* ``LipschitzFactorModel`` -- log-target is ``-sum_i U_i(theta)`` where each
  ``U_i`` moves by at most ``c_i * M(theta, theta')`` between two states.
* ``DoublyIntractableModel`` -- likelihood known up to a state-dependent
  normalizer, but exact simulation of outcomes is available.

Models are immutable after construction and safe to share across chains.
Each chain owns exactly one ``RngStream``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class AuxmcError(Exception):
    """Base class for errors raised by this package."""


class ZeroDensityError(AuxmcError):
    """Evaluation requested at a point where the target density is zero.

    Distinct from numeric failure: the value is well-defined (log-density is
    -inf) but per-datum potentials and bounds are not meaningful there.
    """


class ModelContractError(AuxmcError):
    """A model violated its declared promise (bound or Lipschitz constant)."""


class RngStream:
    """Reproducible random stream keyed by (seed, stream_id).

    Two streams with distinct keys are statistically independent; streams
    constructed from identical keys replay byte-identical draws.  A stream is
    single-owner: never share one between concurrently running chains.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = (self.stream_id & 0xFFFFFFFF, self.stream_id >> 32)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=key))
        )

    def child(self, offset: int) -> "RngStream":
        """Derive an independent stream with stream_id shifted by ``offset``."""
        return RngStream(self.seed, self.stream_id + int(offset))

    # Thin delegates so call sites read naturally.
    def normal(self, size=None, scale=1.0):
        return self.gen.normal(0.0, scale, size=size)

    def uniform(self, size=None):
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self.gen.choice(n, size=k, replace=False)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def sample_poisson(mean: float, rng: RngStream) -> int:
    """Draw one Poisson variate with the given mean.

    ``mean == 0`` returns 0 deterministically.  Negative means are a
    precondition violation.
    """
    if not np.isfinite(mean) or mean < 0:
        raise ValueError(f"Poisson mean must be finite and >= 0, got {mean}")
    if mean == 0.0:
        return 0
    return int(rng.gen.poisson(mean))


@dataclass
class ChainState:
    """Position of one chain plus bookkeeping counters."""

    theta: np.ndarray
    step_index: int = 0
    cumulative_seconds: float = 0.0


# ---------------------------------------------------------------------------
# Model interfaces
# ---------------------------------------------------------------------------


class BoundedFactorModel:
    """Target proportional to exp{sum_i phi_i(theta)} with phi_i in [0, M_i].

    Subclasses must set ``N``, ``d``, the bound vector ``M`` (and ``L = sum M``)
    and implement the batched evaluations.  Scalar accessors fall back to the
    batched path; concrete models vectorize the batch path.
    """

    N: int
    d: int
    M: np.ndarray
    L: float

    def support(self, theta: np.ndarray) -> bool:
        raise NotImplementedError

    def phi_batch(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Potentials phi_i(theta) for the listed datum indices."""
        raise NotImplementedError

    def grad_phi_batch(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Gradients d/dtheta phi_i(theta), shape (len(idx), d)."""
        raise NotImplementedError

    def phi(self, i: int, theta: np.ndarray) -> float:
        return float(self.phi_batch(np.asarray([i]), theta)[0])

    def grad_phi(self, i: int, theta: np.ndarray) -> np.ndarray:
        return self.grad_phi_batch(np.asarray([i]), theta)[0]

    def phi_total(self, theta: np.ndarray) -> float:
        """Full-dataset sum of potentials.  Baseline/oracle use only."""
        return float(np.sum(self.phi_batch(np.arange(self.N), theta)))

    def grad_phi_total(self, theta: np.ndarray) -> np.ndarray:
        return np.sum(self.grad_phi_batch(np.arange(self.N), theta), axis=0)


class LipschitzFactorModel:
    """Target proportional to exp{-sum_i U_i(theta)} with a Lipschitz promise.

    The promise: |U_i(theta') - U_i(theta)| <= c_i * M(theta, theta') for a
    symmetric nonnegative function M with M(theta, theta) = 0.
    """

    N: int
    d: int
    c: np.ndarray
    C: float

    def support(self, theta: np.ndarray) -> bool:
        raise NotImplementedError

    def U_batch(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_U_batch(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def M(self, theta: np.ndarray, theta_p: np.ndarray) -> float:
        """Coupling bound between two states.  Symmetric, zero on the diagonal."""
        raise NotImplementedError

    def U(self, i: int, theta: np.ndarray) -> float:
        return float(self.U_batch(np.asarray([i]), theta)[0])

    def grad_U(self, i: int, theta: np.ndarray) -> np.ndarray:
        return self.grad_U_batch(np.asarray([i]), theta)[0]

    def U_total(self, theta: np.ndarray) -> float:
        return float(np.sum(self.U_batch(np.arange(self.N), theta)))

    def grad_U_total(self, theta: np.ndarray) -> np.ndarray:
        return np.sum(self.grad_U_batch(np.arange(self.N), theta), axis=0)


class DoublyIntractableModel:
    """Likelihood f_theta(w)/Z(theta) with Z unknown but exact simulation available."""

    observed = None

    def log_f(self, theta, w) -> float:
        """Unnormalized log-likelihood of outcome ``w`` under ``theta``."""
        raise NotImplementedError

    def log_prior(self, theta) -> float:
        raise NotImplementedError

    def exact_sample(self, theta, rng: RngStream):
        """Draw an outcome with mass proportional to exp(log_f(theta, .))."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Full-batch operations (baselines and oracles)
# ---------------------------------------------------------------------------


def full_log_target(model, theta: np.ndarray) -> float:
    """Unnormalized log-target by summation over the full dataset.

    Raises ZeroDensityError outside the support.  The additive constant is
    whatever the model's shifted potentials imply.
    """
    if not model.support(theta):
        raise ZeroDensityError("theta is outside the model support")
    if isinstance(model, BoundedFactorModel):
        return model.phi_total(theta)
    if isinstance(model, LipschitzFactorModel):
        return -model.U_total(theta)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def full_grad_log_target(model, theta: np.ndarray) -> np.ndarray:
    """Gradient of the full-batch log-target."""
    if not model.support(theta):
        raise ZeroDensityError("theta is outside the model support")
    if isinstance(model, BoundedFactorModel):
        return model.grad_phi_total(theta)
    if isinstance(model, LipschitzFactorModel):
        return -model.grad_U_total(theta)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def log_target_fn(model):
    """Callable log-target that maps out-of-support points to -inf.

    This is the form the full-batch samplers consume; quadratic potentials are
    evaluated through their smooth extension inside the support only.
    """

    def logpi(theta):
        if not model.support(theta):
            return -math.inf
        return full_log_target(model, theta)

    return logpi


def grad_log_target_fn(model, check_support: bool = False):
    """Callable gradient of the log-target.

    With ``check_support=False`` the smooth extension of the potentials is
    differentiated everywhere; leapfrog integrators rely on this and the
    accept step handles the support indicator.
    """

    def grad(theta):
        if check_support and not model.support(theta):
            raise ZeroDensityError("theta is outside the model support")
        if isinstance(model, BoundedFactorModel):
            return model.grad_phi_total(theta)
        return -model.grad_U_total(theta)

    return grad
