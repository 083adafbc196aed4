"""Configuration-driven experiment runner and the theory-check driver.

A JSON config describes one experiment (model family, scale, sampler list,
target acceptance rates, iteration/replicate counts, seed).  The runner
tunes each sampler to each target rate, runs the chains, and emits:

* ``<experiment>_steps.csv``   -- per-step records on a log-spaced step grid
  (RunRecord schema: experiment, sampler, target_rate, replicate, step,
  seconds, accepted, batch_size, mse_mean, mse_var, holdout_acc);
* ``<experiment>_ess.csv``     -- one summary row per chain with the
  (min, median, max) ESS and ESS-per-second triples;
* ``<experiment>_meta.json``   -- the fully resolved config.

Identical config and seed reproduce the CSVs byte-for-byte except for the
``seconds`` column (and except under a wall-time budget, which by nature
cuts at a hardware-dependent step).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .core import AuxmcError, RngStream, full_log_target
from .diagnostics import checkpoint_grid, ess_report, tune_step_size
from .minibatch import build_alias
from .models import (
    BayesLogistic,
    FiniteExpFamily,
    RobustLinReg,
    TruncatedHeteroGaussian,
    synth_gaussian_data,
    synth_logistic_data,
    synth_robust_data,
)
from .samplers import (
    GaussianRWProposal,
    GridProposal,
    barker_step,
    exchange_step,
    hmc_step,
    lb_poisson_step,
    mala_step,
    poissonmh_step,
    run_chain,
    rwm_step,
    tuna_sgld_step,
    tunamh_step,
)
from . import theory_lab
from .models import LinearLipschitzToy, QuadraticBoundedToy


class ConfigError(AuxmcError):
    """The experiment configuration is invalid."""


class DataFormatError(AuxmcError):
    """An input data file is malformed or missing."""


EXPERIMENTS = ("gaussian", "robust", "logistic", "exchange_toy", "theory")
FULL_BATCH = ("mh", "mala", "barker", "hmc")
BOUNDED_SAMPLERS = FULL_BATCH + ("poissonmh", "poisson-mala", "poisson-barker")
LIPSCHITZ_SAMPLERS = FULL_BATCH + ("tunamh", "tuna-sgld")

# Stream-id layout: one block per role so replicates and samplers never share.
_DATA_STREAM = 1
_REFERENCE_STREAM = 2
_TUNER_BASE = 10_000
_CHAIN_BASE = 1_000_000


@dataclass
class ExperimentConfig:
    experiment: str = "gaussian"
    N: int = 100_000
    d: int = 20
    beta: float = 1e-5
    sigma_diag: list | None = None  # default: 1 - 0.05*j per dimension
    cube_K: float = 3.0
    v: float = 4.0
    R: float = 15.0
    chi: float = 1e-5
    lambda_coef: float = 0.0005  # lambda = coef * L^2
    lambda_abs: float | None = None
    K_sgld: int = 20
    grad_clip: float | None = 2.0
    hmc_leapfrog: int = 10
    samplers: list = field(default_factory=lambda: ["mh"])
    target_rates: list = field(default_factory=lambda: [0.25, 0.4, 0.55])
    fixed_step_sizes: dict = field(default_factory=dict)  # sampler -> step, skips tuning
    T: int = 10_000
    wall_budget_seconds: float | None = None
    replicates: int = 1
    seed: int = 0
    burn_in_fraction: float = 0.1
    n_checkpoints: int = 200  # log-spaced grid (default)
    checkpoint_every: int | None = None  # every k-th step instead
    n_test: int = 2000
    reference_steps: int = 10_000_000
    reference_kind: str = "auto"  # quadrature | longrun | auto
    mnist: dict | None = None  # paths + digits + n_components for real data
    out_dir: str = "runs"

    def resolved(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.experiment != "theory" and not self.samplers:
            raise ConfigError("sampler list must not be empty")
        if self.T < 0 or self.replicates < 0:
            raise ConfigError("T and replicates must be nonnegative")
        for r in self.target_rates:
            if not 0.0 < r < 1.0:
                raise ConfigError(f"target acceptance rate {r} outside (0, 1)")
        allowed = {
            "gaussian": BOUNDED_SAMPLERS,
            "robust": BOUNDED_SAMPLERS,
            "logistic": LIPSCHITZ_SAMPLERS,
            "exchange_toy": ("exchange",),
            "theory": (),
        }[self.experiment]
        for s in self.samplers:
            if s not in allowed:
                raise ConfigError(
                    f"sampler {s!r} does not match the {self.experiment!r} model promise"
                )


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file; CLI overrides replace top-level scalars."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**raw)
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def default_sigma_diag(d: int) -> np.ndarray:
    return 1.0 - 0.05 * np.arange(d)


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------


@dataclass
class Workbench:
    """Everything one experiment run needs besides the config."""

    model: object
    theta0_fn: object  # rng -> initial point
    ref_mean: np.ndarray
    ref_var: np.ndarray | None
    x_test: np.ndarray | None = None
    y_test: np.ndarray | None = None
    lam: float | None = None


def build_model(cfg: ExperimentConfig):
    """Instantiate the experiment model (synthetic data drawn from the seed)."""
    data_rng = RngStream(cfg.seed, _DATA_STREAM)
    if cfg.experiment == "gaussian":
        sig = (
            np.asarray(cfg.sigma_diag, dtype=float)
            if cfg.sigma_diag is not None
            else default_sigma_diag(cfg.d)
        )
        if np.any(sig <= 0):
            raise ConfigError("sigma_diag entries must be positive")
        y = synth_gaussian_data(cfg.N, cfg.d, sig, data_rng)
        return TruncatedHeteroGaussian(y, cfg.beta, sig, cfg.cube_K), {}
    if cfg.experiment == "robust":
        x, y = synth_robust_data(cfg.N, cfg.d, data_rng)
        return RobustLinReg(x, y, cfg.v, cfg.beta, cfg.R), {}
    if cfg.experiment == "logistic":
        if cfg.mnist is not None:
            data = ingest_mnist(**cfg.mnist)
            model = BayesLogistic(data.x_train, data.y_train)
            return model, {"x_test": data.x_test, "y_test": data.y_test}
        x, y = synth_logistic_data(cfg.N + cfg.n_test, cfg.d, data_rng)
        model = BayesLogistic(x[: cfg.N], y[: cfg.N])
        return model, {"x_test": x[cfg.N :], "y_test": y[cfg.N :]}
    if cfg.experiment == "exchange_toy":
        fef = FiniteExpFamily(
            suff_stat=0.5 * np.arange(7),
            theta_grid=np.linspace(-1.0, 1.0, 7),
            prior_weights=np.ones(7),
            observed=4,
        )
        return fef, {}
    raise ConfigError(f"experiment {cfg.experiment!r} does not build a model")


def resolve_lambda(cfg: ExperimentConfig, model) -> float:
    if cfg.lambda_abs is not None:
        return float(cfg.lambda_abs)
    return float(cfg.lambda_coef * model.L**2)


def config_hash(cfg: ExperimentConfig, keys: tuple) -> str:
    payload = json.dumps({k: cfg.resolved()[k] for k in keys}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def reference_moments(cfg: ExperimentConfig, model, cache_dir: str):
    """Posterior mean/variance reference, cached to disk keyed by config hash.

    The truncated Gaussian factorizes over dimensions, so its moments come
    from deterministic per-dimension quadrature.  Everything else falls back
    to a long full-batch random-walk oracle run.
    """
    keys = (
        "experiment", "N", "d", "beta", "sigma_diag", "cube_K", "v", "R",
        "seed", "reference_steps", "reference_kind",
    )
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"ref_{config_hash(cfg, keys)}.npz")
    if os.path.exists(path):
        blob = np.load(path)
        return blob["mean"], blob["var"]
    kind = cfg.reference_kind
    if kind == "auto":
        kind = "quadrature" if cfg.experiment == "gaussian" else "longrun"
    if cfg.experiment == "exchange_toy":
        post = model.posterior()
        mean = np.array([float(np.sum(post * model.theta_grid))])
        var = np.array([float(np.sum(post * model.theta_grid**2)) - mean[0] ** 2])
    elif kind == "quadrature":
        mean, var = model.reference_moments()
    else:
        mean, var = _longrun_reference(cfg, model)
    np.savez(path, mean=mean, var=var)
    return mean, var


def _longrun_reference(cfg: ExperimentConfig, model):
    rng = RngStream(cfg.seed, _REFERENCE_STREAM)
    logpi = _safe_logpi(model)
    theta0 = np.zeros(model.d)
    tune = tune_step_size(
        lambda s: (lambda th, r: rwm_step(logpi, th, s, r)),
        theta0, 0.3, rng,
    )
    thetas = rwm_chain_cached(logpi, theta0, tune.step_size, cfg.reference_steps, rng)
    burn = int(cfg.burn_in_fraction * thetas.shape[0])
    kept = thetas[burn:]
    return kept.mean(axis=0), kept.var(axis=0)


def rwm_chain_cached(logpi, theta0, sigma: float, T: int, rng: RngStream) -> np.ndarray:
    """Random-walk Metropolis positions with the current log-target cached.

    One target evaluation per step instead of two; used for the long oracle
    reference runs where the trace metadata is not needed.
    """
    theta = np.asarray(theta0, dtype=float)
    out = np.empty((T + 1, theta.size))
    out[0] = theta
    lp = logpi(theta)
    noise_scale = sigma
    for t in range(T):
        prop = theta + noise_scale * rng.gen.standard_normal(theta.shape)
        lp_new = logpi(prop)
        if lp_new - lp > np.log(rng.gen.random() + 1e-300):
            theta, lp = prop, lp_new
        out[t + 1] = theta
    return out


def _safe_logpi(model):
    def logpi(theta):
        if not model.support(theta):
            return -np.inf
        return full_log_target(model, theta)

    return logpi


# ---------------------------------------------------------------------------
# Step-function factory
# ---------------------------------------------------------------------------


def make_step_factory(sampler: str, cfg: ExperimentConfig, model):
    """Return step_factory(step_size) -> step_fn for one sampler name."""
    logpi = _safe_logpi(model)

    if sampler in FULL_BATCH:
        from .core import grad_log_target_fn

        grad = grad_log_target_fn(model)
        if sampler == "mh":
            return lambda s: (lambda th, r: rwm_step(logpi, th, s, r))
        if sampler == "mala":
            return lambda s: (lambda th, r: mala_step(logpi, grad, th, s, r))
        if sampler == "barker":
            return lambda s: (lambda th, r: barker_step(logpi, grad, th, s, r))
        if sampler == "hmc":
            leap = cfg.hmc_leapfrog
            return lambda s: (lambda th, r: hmc_step(logpi, grad, th, s, leap, r))

    if sampler == "poissonmh":
        lam = resolve_lambda(cfg, model)
        alias = build_alias(model.M)
        return lambda s: (
            lambda th, r: poissonmh_step(model, th, lam, GaussianRWProposal(s), r, alias)
        )
    if sampler in ("poisson-mala", "poisson-barker"):
        lam = resolve_lambda(cfg, model)
        alias = build_alias(model.M)
        tag = "sqrt" if sampler == "poisson-mala" else "barker"
        return lambda s: (lambda th, r: lb_poisson_step(model, th, lam, tag, s, r, alias))
    if sampler == "tunamh":
        alias = build_alias(model.c)
        chi = cfg.chi
        return lambda s: (
            lambda th, r: tunamh_step(model, th, chi, GaussianRWProposal(s), r, alias)
        )
    if sampler == "tuna-sgld":
        alias = build_alias(model.c)
        chi, K, clip = cfg.chi, cfg.K_sgld, cfg.grad_clip
        return lambda s: (
            lambda th, r: tuna_sgld_step(model, th, chi, K, s, clip, r, alias)
        )
    if sampler == "exchange":
        proposal = GridProposal(model.theta_grid)
        return lambda s: (lambda th, r: exchange_step(model, th, proposal, r))
    raise ConfigError(f"unknown sampler {sampler!r}")


# ---------------------------------------------------------------------------
# Experiment loop
# ---------------------------------------------------------------------------

RUN_COLUMNS = (
    "experiment", "sampler", "target_rate", "replicate", "step", "seconds",
    "accepted", "batch_size", "mse_mean", "mse_var", "holdout_acc",
)
ESS_COLUMNS = (
    "experiment", "sampler", "target_rate", "replicate",
    "ess_min", "ess_median", "ess_max", "elapsed_seconds",
    "ess_per_sec_min", "ess_per_sec_median", "ess_per_sec_max",
    "mean_batch_size", "acceptance_rate",
)


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Tune, run, and record every sampler x rate x replicate combination."""
    cfg.validate()
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    model, extras = build_model(cfg)
    ref_mean, ref_var = reference_moments(cfg, model, os.path.join(out_dir, "cache"))
    x_test, y_test = extras.get("x_test"), extras.get("y_test")

    step_rows: list[list] = []
    ess_rows: list[list] = []
    tune_results: dict = {}

    for si, sampler in enumerate(cfg.samplers):
        factory = make_step_factory(sampler, cfg, model)
        theta0_master = _initial_point(cfg, model, RngStream(cfg.seed, 3))
        for ri, rate in enumerate(cfg.target_rates):
            if sampler in cfg.fixed_step_sizes:
                step_size = float(cfg.fixed_step_sizes[sampler])
                tune_results[(sampler, rate)] = {"step_size": step_size, "fixed": True}
            elif sampler == "exchange":
                step_size = 1.0  # grid proposal has no scale
                tune_results[(sampler, rate)] = {"step_size": 1.0, "fixed": True}
            else:
                tuner_rng = RngStream(cfg.seed, _TUNER_BASE + 97 * si + ri)
                tr = tune_step_size(factory, theta0_master, rate, tuner_rng)
                step_size = tr.step_size
                tune_results[(sampler, rate)] = {
                    "step_size": tr.step_size,
                    "achieved_rate": tr.achieved_rate,
                    "pilot_iterations": tr.pilot_iterations,
                    "converged": tr.converged,
                }
            step_fn = factory(step_size)
            for rep in range(cfg.replicates):
                rng = RngStream(cfg.seed, _CHAIN_BASE + 10_000 * si + 100 * ri + rep)
                theta0 = _initial_point(cfg, model, rng)
                trace = run_chain(step_fn, theta0, cfg.T, rng,
                                  budget_seconds=cfg.wall_budget_seconds)
                _record(cfg, sampler, rate, rep, trace, ref_mean, ref_var,
                        model, x_test, y_test, step_rows, ess_rows)

    paths = _write_outputs(cfg, out_dir, step_rows, ess_rows, tune_results)
    return {"paths": paths, "tuning": tune_results, "n_rows": len(step_rows)}


def _initial_point(cfg: ExperimentConfig, model, rng: RngStream) -> np.ndarray:
    if cfg.experiment == "exchange_toy":
        k = rng.gen.integers(0, model.theta_grid.shape[0])
        return np.atleast_1d(model.theta_grid[k]).astype(float)
    theta0 = rng.gen.standard_normal(model.d)
    if not model.support(theta0):
        theta0 = np.zeros(model.d)
    return theta0


def _record(cfg, sampler, rate, rep, trace, ref_mean, ref_var, model,
            x_test, y_test, step_rows, ess_rows):
    from .diagnostics import mse_vs_reference

    n = trace.thetas.shape[0] - 1
    if n == 0:
        return
    if cfg.checkpoint_every is not None:
        steps = np.arange(cfg.checkpoint_every, n + 1, cfg.checkpoint_every, dtype=np.int64)
        if steps.size == 0:
            steps = np.array([n], dtype=np.int64)
    else:
        steps = checkpoint_grid(n, cfg.n_checkpoints)
    out = mse_vs_reference(trace.thetas[1:], ref_mean, ref_var, steps)
    mse_mean = out[1]
    mse_var = out[2] if ref_var is not None else np.full(steps.shape, np.nan)
    seconds = trace.cumulative_seconds
    acc_curve = None
    if x_test is not None:
        csum = np.cumsum(trace.thetas[1:], axis=0)
        acc_curve = np.array(
            [
                model.accuracy(csum[s - 1] / s, x_test, y_test)
                for s in steps
            ]
        )
    for k, s in enumerate(steps):
        step_rows.append([
            cfg.experiment, sampler, rate, rep, int(s),
            float(seconds[s - 1]), int(trace.accepted[s - 1]),
            int(trace.batch_sizes[s - 1]), float(mse_mean[k]), float(mse_var[k]),
            float(acc_curve[k]) if acc_curve is not None else np.nan,
        ])

    burn = int(cfg.burn_in_fraction * n)
    kept = trace.thetas[1 + burn :]
    if kept.shape[0] >= 100 and np.all(kept.var(axis=0) > 0):
        rep_obj = ess_report(kept, trace.elapsed_seconds)
        per_sec = rep_obj.per_second()
        ess_rows.append([
            cfg.experiment, sampler, rate, rep,
            rep_obj.minimum, rep_obj.median, rep_obj.maximum,
            trace.elapsed_seconds, per_sec[0], per_sec[1], per_sec[2],
            float(trace.batch_sizes.mean()) if n else 0.0,
            trace.acceptance_rate,
        ])


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_outputs(cfg, out_dir, step_rows, ess_rows, tune_results):
    base = os.path.join(out_dir, cfg.experiment)
    steps_path = base + "_steps.csv"
    ess_path = base + "_ess.csv"
    meta_path = base + "_meta.json"
    write_csv(steps_path, RUN_COLUMNS, step_rows)
    write_csv(ess_path, ESS_COLUMNS, ess_rows)
    meta = {
        "config": cfg.resolved(),
        "tuning": {f"{s}@{r}": v for (s, r), v in tune_results.items()},
        "columns": {"steps": list(RUN_COLUMNS), "ess": list(ESS_COLUMNS)},
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return {"steps": steps_path, "ess": ess_path, "meta": meta_path}


# ---------------------------------------------------------------------------
# MNIST ingestion and PCA
# ---------------------------------------------------------------------------


def read_idx(path: str) -> np.ndarray:
    """Parse an IDX file (big-endian; magic 0x801 for labels, 0x803 for images)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise DataFormatError(f"missing data file: {path}") from exc
    if len(blob) < 4:
        raise DataFormatError(f"{path}: truncated header at byte 0")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic == 0x00000803:
        ndim = 3
    elif magic == 0x00000801:
        ndim = 1
    else:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x} at byte 0")
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise DataFormatError(f"{path}: truncated dimension header at byte {len(blob)}")
    dims = struct.unpack(f">{ndim}I", blob[4:header_end])
    expected = header_end + int(np.prod(dims))
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for shape {dims}, file ends at byte {len(blob)}"
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=header_end).reshape(dims)


def pca_top_k(cov: np.ndarray, k: int) -> np.ndarray:
    """Top-k eigenvectors (columns, unit norm) of a symmetric matrix."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if k > cov.shape[0]:
        raise ValueError("k must be at most the matrix dimension")
    asym = float(np.max(np.abs(cov - cov.T)))
    if asym > 1e-10:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    return vecs[:, order]


@dataclass
class MnistData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_train: int
    n_test: int
    train_mean: np.ndarray
    components: np.ndarray


def ingest_mnist(train_images: str, train_labels: str, test_images: str,
                 test_labels: str, digits=(3, 5), n_components: int = 50) -> MnistData:
    """Filter a digit pair, center by the training mean, project onto top PCs."""
    xtr = read_idx(train_images)
    ytr = read_idx(train_labels)
    xte = read_idx(test_images)
    yte = read_idx(test_labels)
    if xtr.shape[0] != ytr.shape[0] or xte.shape[0] != yte.shape[0]:
        raise DataFormatError("image/label counts disagree")
    a, b = digits
    mtr = (ytr == a) | (ytr == b)
    mte = (yte == a) | (yte == b)
    xtr = xtr[mtr].reshape(mtr.sum(), -1).astype(float) / 255.0
    xte = xte[mte].reshape(mte.sum(), -1).astype(float) / 255.0
    y_train = (ytr[mtr] == b).astype(float)
    y_test = (yte[mte] == b).astype(float)
    mean = xtr.mean(axis=0)
    xc = xtr - mean
    cov = (xc.T @ xc) / max(1, xc.shape[0] - 1)
    comps = pca_top_k(0.5 * (cov + cov.T), n_components)
    return MnistData(
        x_train=xc @ comps,
        y_train=y_train,
        x_test=(xte - mean) @ comps,
        y_test=y_test,
        n_train=int(mtr.sum()),
        n_test=int(mte.sum()),
        train_mean=mean,
        components=comps,
    )


# ---------------------------------------------------------------------------
# Theory suite driver
# ---------------------------------------------------------------------------


def default_toys():
    """The designated toy instance for each auxiliary-variable sampler."""
    grid_b = np.linspace(-1.2, 1.2, 5)
    grid_l = np.linspace(-1.0, 1.0, 5)
    qb = QuadraticBoundedToy(y=np.array([-0.5, 0.7]), w=np.array([0.5, 0.6]), K=1.5)
    lt2 = LinearLipschitzToy(a=np.array([0.8, -0.6]))
    lt3 = LinearLipschitzToy(a=np.array([0.8, -0.6, 0.4]))
    fef = FiniteExpFamily(
        suff_stat=0.5 * np.arange(7),
        theta_grid=np.linspace(-1.0, 1.0, 7),
        prior_weights=np.ones(7),
        observed=4,
    )
    return {
        "rwm": theory_lab.RwmToy(qb, grid_b),
        "exchange": theory_lab.ExchangeToy(fef),
        "poissonmh": theory_lab.PoissonMHToy(qb, grid_b, lam=qb.L),
        "tunamh": theory_lab.TunaMHToy(lt2, grid_l, chi=1.0),
        "poisson-mala": theory_lab.LbPoissonToy(qb, grid_b, lam=qb.L, g_tag="sqrt", sigma=0.8),
        "poisson-barker": theory_lab.LbPoissonToy(qb, grid_b, lam=qb.L, g_tag="barker", sigma=0.8),
        "tuna-sgld": theory_lab.TunaSgldToy(lt3, grid_l, chi=1.0, K=2, epsilon=0.5, grad_clip=2.0),
    }


def theory_check(out_dir: str | None = None):
    """Run the full verification suite; returns (records, all_passed)."""
    records: list[theory_lab.CheckRecord] = []
    toys = default_toys()
    triples = {name: theory_lab.build_kernels(toy) for name, toy in toys.items()}

    for name, tri in triples.items():
        res = theory_lab.detailed_balance_residual(tri.P_aux, tri.pi)
        records.append(
            theory_lab.CheckRecord(f"{name}: detailed balance residual", res, 1e-9, res <= 1e-9)
        )
    for name in ("poissonmh", "tuna-sgld"):
        for rec in theory_lab.check_peskun(
            triples[name].P_aux, triples[name].P_MwG, triples[name].P_ideal
        ):
            records.append(dataclasses.replace(rec, name=f"{name}: {rec.name}"))
    for name in ("poisson-mala", "poisson-barker"):
        tri = triples[name]
        gap_eq = float(np.max(np.abs(tri.P_aux - tri.P_MwG)))
        records.append(
            theory_lab.CheckRecord(f"{name}: shared-auxiliary kernel equality", gap_eq, 1e-10,
                                   gap_eq <= 1e-10)
        )

    qb = toys["poissonmh"].model
    grid_b = toys["poissonmh"].grid
    lt2 = toys["tunamh"].model
    grid_l = toys["tunamh"].grid
    records.extend(
        theory_lab.verify_gap_bounds(
            poisson_cases=[
                (f"lambda={label}", theory_lab.PoissonMHToy(qb, grid_b, lam=mult * qb.L))
                for mult, label in ((0.5, "L/2"), (1.0, "L"), (4.0, "4L"))
            ],
            tuna_cases=[
                (f"chi={chi}", theory_lab.TunaMHToy(lt2, grid_l, chi=chi))
                for chi in (0.5, 1.0, 2.0)
            ],
        )
    )

    for name, toy in (("poissonmh", toys["poissonmh"]), ("tunamh", toys["tunamh"])):
        worst = max(
            theory_lab.unbiasedness_check(toy, i, j)
            for i in range(toy.n_states)
            for j in range(toy.n_states)
            if i != j
        )
        records.append(
            theory_lab.CheckRecord(f"{name}: ratio-estimator unbiasedness", worst, 1e-9,
                                   worst <= 1e-9)
        )

    tri = theory_lab.build_kernels(toys["poissonmh"], accept="barker")
    res = theory_lab.detailed_balance_residual(tri.P_aux, tri.pi)
    records.append(
        theory_lab.CheckRecord("poissonmh: a(r)=r/(1+r) acceptance residual", res, 1e-9,
                               res <= 1e-9)
    )

    ok = all(r.passed for r in records)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(
            os.path.join(out_dir, "theory_report.csv"),
            ("check", "value", "bound", "passed"),
            [[r.name, r.value, r.bound, int(r.passed)] for r in records],
        )
    return records, ok
