"""Config-driven studies emitting CSV tables of likelihood-estimator behavior.

Three studies: log marginal-likelihood accuracy on the analytically
tractable toy model, estimator standard deviation at the true parameter of
the predator-prey model, and pseudo-marginal MCMC over the predator-prey
parameters.  Replicate seeds are pre-split from the study seed so results
are byte-identical regardless of the worker count.
"""
from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .estimates import LogLikelihoodEstimate
from .estimators import (
    bootstrap_pf_loglik,
    direct_log_ml,
    enkf_loglik,
    path_sampling_log_ml,
    synthetic_loglik,
)
from .gaussian import IllConditionedError
from .ienki import default_schedule_for, ienki_abc_run
from .kernels import AbcKernel, abc_loglik_estimate
from .mcmc import (
    chain_to_csv,
    config_sidecar,
    lv_default_prior,
    multi_ess,
    pm_mh_run,
)
from .simulators import (
    LV_THETA_STAR,
    LotkaVolterraModel,
    ToyModel,
    lv_summary,
    make_observed_lv_data,
    toy_exact_abc_likelihood,
)
from .tempering import SkipPolicy, build_schedule, schedule_to_csv

STUDIES = ("gaussian_ml", "lv_sd", "lv_mcmc")

_SHIFTER_CODES = {"s": "stochastic", "r": "square_root", "a": "adjustment"}

GAUSSIAN_METHODS = (
    "ABC", "SL",
    "sIEnKI:direct", "sIEnKI:path",
    "rIEnKI:direct", "rIEnKI:path",
    "aIEnKI:direct", "aIEnKI:path",
)
LV_SD_METHODS = (
    "ABC", "SL", "PF",
    "sEnKF", "rEnKF", "aEnKF",
    "sIEnKI-ABC:direct", "sIEnKI-ABC:path", "sIEnKI-ABCskip",
)
LV_MCMC_METHODS = ("ABC", "SL", "PF", "EnKF", "sIEnKI-ABCskip")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    study: str
    eps: tuple = (0.1,)
    M: tuple = (100,)
    T: tuple = (100,)
    T_path: tuple | None = None
    methods: tuple = ()
    replicates: int = 1
    seed: int = 0
    skip_significance: float = 0.01
    out_dir: str = "."
    workers: int = 1
    n_iters: int = 10_000
    proposal_scale: float = 0.05
    mcmc_shifter: str = "stochastic"

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"field 'study': unknown study {self.study!r}")
        for name in ("eps", "M", "T", "methods"):
            value = tuple(np.atleast_1d(getattr(self, name)).tolist())
            if not value and name != "methods":
                raise ConfigError(f"field {name!r}: grid must be nonempty")
            setattr(self, name, value)
        if self.T_path is None:
            self.T_path = self.T
        else:
            self.T_path = tuple(np.atleast_1d(self.T_path).tolist())
        if not self.methods:
            self.methods = {
                "gaussian_ml": GAUSSIAN_METHODS,
                "lv_sd": LV_SD_METHODS,
                "lv_mcmc": LV_MCMC_METHODS,
            }[self.study]
        if self.replicates < 1:
            raise ConfigError("field 'replicates': must be >= 1")
        if self.workers < 1:
            raise ConfigError("field 'workers': must be >= 1")
        if self.n_iters < 1:
            raise ConfigError("field 'n_iters': must be >= 1")
        if any(e <= 0.0 for e in self.eps):
            raise ConfigError("field 'eps': tolerances must be positive")
        if self.mcmc_shifter not in _SHIFTER_CODES.values():
            raise ConfigError(
                f"field 'mcmc_shifter': unknown shifter {self.mcmc_shifter!r}"
            )

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def fingerprint(self):
        text = repr(sorted(self.as_dict().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def config_from_mapping(mapping):
    """Build a config from a parsed key-value mapping, naming bad fields."""
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    if "study" not in mapping:
        raise ConfigError("field 'study': required")
    try:
        return ExperimentConfig(**mapping)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid configuration: {err}") from err


def _fmt(x):
    return f"{x:.17g}"


def _parse_method(spec):
    """Split a method label into (label, shifter, estimator) columns."""
    label, _, estimator = spec.partition(":")
    shifter = ""
    if label.endswith(("IEnKI", "IEnKI-ABC", "IEnKI-ABCskip", "EnKF")):
        shifter = _SHIFTER_CODES.get(label[0], "")
        if label.endswith("ABCskip"):
            estimator = "direct"
    if label == "EnKF":
        shifter = ""
    if label in ("ABC", "SL", "PF"):
        estimator = ""
    return label, shifter, estimator


def _map_tasks(fn, tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def _degenerate(method):
    return LogLikelihoodEstimate(log_value=-math.inf, method=method, degenerate=True)


# ---------------------------------------------------------------------------
# Gaussian toy study

def _ienki_estimate(model, theta, s_obs, eps, T, M, rng, shifter, estimator, skip=None):
    schedule = default_schedule_for(model, theta, eps, T, M, rng)
    Sigma_y = np.diag((eps * model.scale) ** 2)
    trace = ienki_abc_run(model, theta, s_obs, schedule, shifter, M, rng, skip=skip)
    if estimator == "path":
        return path_sampling_log_ml(trace)
    return direct_log_ml(trace, s_obs, Sigma_y)


def _gaussian_task(task):
    spec, eps, M, T, seed_seq = task
    rng = np.random.default_rng(seed_seq)
    model = ToyModel()
    theta = np.zeros(1)
    s_obs = np.zeros(1)
    label, shifter, estimator = _parse_method(spec)
    t0 = time.perf_counter()
    try:
        if label == "ABC":
            est = abc_loglik_estimate(
                model, theta, s_obs, AbcKernel("gaussian", eps, model.scale), M, rng
            )
        elif label == "SL":
            sims = model.simulate_batch(theta, M, rng)
            est = synthetic_loglik(sims, s_obs, noise_var=eps ** 2)
        else:
            est = _ienki_estimate(
                model, theta, s_obs, eps, T, M, rng,
                _SHIFTER_CODES[label[0]], estimator,
            )
    except IllConditionedError:
        est = _degenerate(label)
    return est.log_value, est.degenerate, time.perf_counter() - t0


def _write_estimates(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(
            "method,shifter,estimator,epsilon,M,T,replicate,"
            "log_estimate,degenerate,wall_time_s\n"
        )
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


def _write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("method,shifter,estimator,epsilon,M,T,n_ok,bias,sd,rmse\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


def _aggregate(values, exact):
    """(n_ok, bias, sd, rmse) over the non-degenerate log estimates.

    The population SD is used so that rmse^2 = bias^2 + sd^2 holds exactly.
    Without an exact reference, bias and rmse are NaN.
    """
    vals = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    n_ok = vals.shape[0]
    if n_ok == 0:
        return 0, math.nan, math.nan, math.nan
    sd = float(vals.std(ddof=0))
    if exact is None:
        return n_ok, math.nan, sd, math.nan
    bias = float(vals.mean() - exact)
    return n_ok, bias, sd, math.sqrt(bias ** 2 + sd ** 2)


def _run_grid_study(cfg, cells, task_fn, exact_for):
    """Shared sweep driver: build tasks, run, write the two CSV tables."""
    tasks = []
    ss = np.random.SeedSequence(cfg.seed)
    seeds = ss.spawn(len(cells) * cfg.replicates)
    for i, cell in enumerate(cells):
        for r in range(cfg.replicates):
            tasks.append(cell + (seeds[i * cfg.replicates + r],))
    results = _map_tasks(task_fn, tasks, cfg.workers)

    est_rows, sum_rows = [], []
    idx = 0
    for cell in cells:
        spec, eps, M, T = cell
        label, shifter, estimator = _parse_method(spec)
        values = []
        for r in range(cfg.replicates):
            log_est, degenerate, wall = results[idx]
            idx += 1
            values.append(log_est)
            est_rows.append((
                label, shifter, estimator, _fmt(eps), M, T, r,
                _fmt(log_est), int(degenerate), _fmt(wall),
            ))
        n_ok, bias, sd, rmse = _aggregate(values, exact_for(eps))
        sum_rows.append((
            label, shifter, estimator, _fmt(eps), M, T, n_ok,
            _fmt(bias), _fmt(sd), _fmt(rmse),
        ))
    _write_estimates(f"{cfg.out_dir}/estimates.csv", est_rows)
    _write_summary(f"{cfg.out_dir}/summary.csv", sum_rows)
    config_sidecar(
        {**cfg.as_dict(), "fingerprint": cfg.fingerprint()},
        f"{cfg.out_dir}/config.txt",
    )


def run_gaussian_study(cfg):
    """Accuracy sweep of every estimator against the closed-form value."""
    if cfg.study != "gaussian_ml":
        raise ConfigError(f"field 'study': expected gaussian_ml, got {cfg.study!r}")
    cells = []
    for spec in cfg.methods:
        for eps in cfg.eps:
            for M in cfg.M:
                if spec in ("ABC", "SL"):
                    cells.append((spec, eps, M, 1))
                else:
                    grid = cfg.T_path if spec.endswith(":path") else cfg.T
                    for T in grid:
                        cells.append((spec, eps, M, T))

    def exact_for(eps):
        return toy_exact_abc_likelihood(np.zeros(1), 0.0, eps)

    _run_grid_study(cfg, cells, _gaussian_task, exact_for)


# ---------------------------------------------------------------------------
# Predator-prey SD study

_LV_CACHE = {}


def _lv_shared():
    if "obs" not in _LV_CACHE:
        observed, s_obs = make_observed_lv_data()
        _LV_CACHE["obs"] = observed
        _LV_CACHE["s_obs"] = s_obs
        _LV_CACHE["model"] = LotkaVolterraModel()
    return _LV_CACHE["model"], _LV_CACHE["obs"], _LV_CACHE["s_obs"]


def _lv_sd_task(task):
    spec, eps, M, T, sig, seed_seq = task
    rng = np.random.default_rng(seed_seq)
    model, observed, s_obs = _lv_shared()
    theta = LV_THETA_STAR
    label, shifter, estimator = _parse_method(spec)
    t0 = time.perf_counter()
    try:
        if label == "ABC":
            est = abc_loglik_estimate(
                model, theta, s_obs, AbcKernel("gaussian", eps, model.scale), M, rng
            )
        elif label == "SL":
            sims = model.simulate_batch(theta, M, rng)
            est = synthetic_loglik(sims, s_obs, noise_var=eps ** 2)
        elif label == "PF":
            est = bootstrap_pf_loglik(theta, observed, eps, M, rng)
        elif label.endswith("EnKF"):
            est = enkf_loglik(theta, observed, eps, M, shifter, rng)
        else:
            skip = SkipPolicy(sig) if label.endswith("ABCskip") else None
            est = _ienki_estimate(
                model, theta, s_obs, eps, T, M, rng, shifter, estimator, skip=skip
            )
    except IllConditionedError:
        est = _degenerate(label)
    return est.log_value, est.degenerate, time.perf_counter() - t0


def run_lv_sd_study(cfg):
    """Estimator spread at the true predator-prey parameter across tolerances."""
    if cfg.study != "lv_sd":
        raise ConfigError(f"field 'study': expected lv_sd, got {cfg.study!r}")
    cells = []
    for spec in cfg.methods:
        for eps in cfg.eps:
            for M in cfg.M:
                if spec in ("ABC", "SL", "PF") or spec.endswith("EnKF"):
                    cells.append((spec, eps, M, 1))
                else:
                    for T in cfg.T:
                        cells.append((spec, eps, M, T))
    tasks_cells = list(cells)
    # Tasks carry the skip significance in addition to the grid cell.
    cells = [c + (cfg.skip_significance,) for c in cells]
    ss = np.random.SeedSequence(cfg.seed)
    seeds = ss.spawn(len(cells) * cfg.replicates)
    tasks = []
    for i, cell in enumerate(cells):
        for r in range(cfg.replicates):
            tasks.append(cell + (seeds[i * cfg.replicates + r],))
    results = _map_tasks(_lv_sd_task, tasks, cfg.workers)

    est_rows, sum_rows = [], []
    idx = 0
    for cell in tasks_cells:
        spec, eps, M, T = cell
        label, shifter, estimator = _parse_method(spec)
        values = []
        for r in range(cfg.replicates):
            log_est, degenerate, wall = results[idx]
            idx += 1
            values.append(log_est)
            est_rows.append((
                label, shifter, estimator, _fmt(eps), M, T, r,
                _fmt(log_est), int(degenerate), _fmt(wall),
            ))
        n_ok, bias, sd, rmse = _aggregate(values, None)
        sum_rows.append((
            label, shifter, estimator, _fmt(eps), M, T, n_ok,
            _fmt(bias), _fmt(sd), _fmt(rmse),
        ))
    _write_estimates(f"{cfg.out_dir}/estimates.csv", est_rows)
    _write_summary(f"{cfg.out_dir}/summary.csv", sum_rows)
    config_sidecar(
        {**cfg.as_dict(), "fingerprint": cfg.fingerprint()},
        f"{cfg.out_dir}/config.txt",
    )


# ---------------------------------------------------------------------------
# Predator-prey MCMC study

def lv_likelihood_backend(spec, eps, M, T, skip_significance):
    """Closure estimating the predator-prey log likelihood at one parameter."""
    model, observed, s_obs = _lv_shared()
    label, shifter, estimator = _parse_method(spec)

    def backend(theta, rng):
        try:
            if label == "ABC":
                return abc_loglik_estimate(
                    model, theta, s_obs,
                    AbcKernel("gaussian", eps, model.scale), M, rng,
                )
            if label == "SL":
                sims = model.simulate_batch(theta, M, rng)
                return synthetic_loglik(sims, s_obs, noise_var=eps ** 2)
            if label == "PF":
                return bootstrap_pf_loglik(theta, observed, eps, M, rng)
            if label == "EnKF":
                return enkf_loglik(theta, observed, eps, M, "stochastic", rng)
            skip = SkipPolicy(skip_significance) if label.endswith("ABCskip") else None
            return _ienki_estimate(
                model, theta, s_obs, eps, T, M, rng,
                shifter or "stochastic", estimator, skip=skip,
            )
        except IllConditionedError:
            return _degenerate(label)

    return backend


def run_lv_mcmc_study(cfg):
    """Pseudo-marginal chains per backend with acceptance-rate/ESS summary."""
    if cfg.study != "lv_mcmc":
        raise ConfigError(f"field 'study': expected lv_mcmc, got {cfg.study!r}")
    prior = lv_default_prior()
    init = np.asarray(LV_THETA_STAR, dtype=float)
    proposal_cov = cfg.proposal_scale ** 2 * np.eye(3)
    M = cfg.M[0]
    T = cfg.T[0]
    ss = np.random.SeedSequence(cfg.seed)
    seeds = ss.spawn(len(cfg.methods) * len(cfg.eps))

    rows = []
    i = 0
    for spec in cfg.methods:
        label, shifter, estimator = _parse_method(spec)
        for eps in cfg.eps:
            rng = np.random.default_rng(seeds[i])
            i += 1
            backend = lv_likelihood_backend(spec, eps, M, T, cfg.skip_significance)
            chain = pm_mh_run(init, prior, proposal_cov, backend, cfg.n_iters, rng)
            chain.config = {
                **cfg.as_dict(), "method": spec, "epsilon": eps,
                "fingerprint": cfg.fingerprint(),
            }
            tag = f"{label.replace(':', '_')}_eps{_fmt(eps)}"
            chain_to_csv(chain, f"{cfg.out_dir}/chain_{tag}.csv")
            config_sidecar(chain.config, f"{cfg.out_dir}/chain_{tag}_config.txt")
            ess = multi_ess(chain) if len(chain) >= 100 else None
            rows.append((
                label, shifter, _fmt(eps), M, T, cfg.n_iters,
                _fmt(chain.acceptance_rate),
                ess.label if ess is not None else "<50",
            ))
    with open(f"{cfg.out_dir}/summary.csv", "w", newline="") as fh:
        fh.write(
            "method,shifter,epsilon,M,T,n_iters,acceptance_rate,multi_ess\n"
        )
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    config_sidecar(
        {**cfg.as_dict(), "fingerprint": cfg.fingerprint()},
        f"{cfg.out_dir}/config.txt",
    )


def dump_schedule(eps, kappa, T, filename):
    """Write the closed-form tolerance/temperature schedule as CSV."""
    schedule = build_schedule(eps, kappa, T)
    schedule_to_csv(schedule, filename)
    return schedule


# ---------------------------------------------------------------------------
# Presets

PRESETS = {
    "gaussian-paper": {
        "study": "gaussian_ml",
        "eps": (0.1, 0.01, 0.001, 0.0001),
        "M": (10, 50, 100, 200),
        "T": (5, 10, 20),
        "T_path": (5, 10, 20, 50, 100, 200),
        "replicates": 100,
        "seed": 20260823,
    },
    "gaussian-desk": {
        "study": "gaussian_ml",
        "eps": (0.1, 0.001),
        "M": (50, 200),
        "T": (5, 20),
        "replicates": 10,
        "seed": 20260823,
    },
    "lv-sd-paper": {
        "study": "lv_sd",
        "eps": (10.0, 1.0, 0.1),
        "M": (100,),
        "T": (100,),
        "replicates": 100,
        "skip_significance": 0.1,
        "seed": 20260823,
    },
    "lv-sd-desk": {
        "study": "lv_sd",
        "eps": (0.1,),
        "M": (100,),
        "T": (100,),
        "replicates": 20,
        "skip_significance": 0.1,
        "seed": 20260823,
    },
    "lv-mcmc-paper": {
        "study": "lv_mcmc",
        "eps": (10.0, 0.1),
        "M": (100,),
        "T": (100,),
        "n_iters": 1_000_000,
        "skip_significance": 0.01,
        "seed": 20260823,
    },
    "lv-mcmc-desk": {
        "study": "lv_mcmc",
        "eps": (0.1,),
        "M": (100,),
        "T": (100,),
        "n_iters": 10_000,
        "skip_significance": 0.01,
        "seed": 20260823,
    },
}


def run_study(cfg):
    runner = {
        "gaussian_ml": run_gaussian_study,
        "lv_sd": run_lv_sd_study,
        "lv_mcmc": run_lv_mcmc_study,
    }[cfg.study]
    runner(cfg)
