"""Minibatch MCMC with auxiliary variables.

Samplers that estimate the target ratio from Poisson-subsampled data or
simulated outcomes, gradient-steered minibatch proposals, full-batch
baselines, an exact-kernel verification lab for enumerable toy targets, and
a configuration-driven experiment harness.
"""

from .core import (
    AuxmcError,
    BoundedFactorModel,
    ChainState,
    DoublyIntractableModel,
    LipschitzFactorModel,
    ModelContractError,
    RngStream,
    ZeroDensityError,
    full_grad_log_target,
    full_log_target,
    sample_poisson,
)
from .minibatch import (
    AliasTable,
    PoissonAuxState,
    aux_log_density_full,
    build_alias,
    draw_poisson_minibatch,
    draw_tuna_minibatch,
)
from .samplers import (
    ChainTrace,
    GaussianRWProposal,
    GridProposal,
    StepResult,
    barker_step,
    exchange_step,
    hmc_step,
    lb_poisson_step,
    mala_step,
    minibatch_grad_log_proxy,
    poissonmh_step,
    run_chain,
    rwm_step,
    tuna_sgld_step,
    tunamh_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
