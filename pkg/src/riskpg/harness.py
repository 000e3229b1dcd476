"""Config-driven, replicated experiment runs with oracle-evaluated summaries.

An experiment is a TOML file::

    [experiment]
    replications = 3          # runs with seeds base_seed, base_seed + 1, ...
    base_seed = 0             # or: seeds = [11, 12, 13]
    output_dir = "runs/cvar"
    workers = 1               # parallel replications
    tolerance = 0.1           # slack in the "constraint satisfied" flag

    [env]
    kind = "bandit_ssp"       # random_mdp | grid_ssp | bandit_ssp | two_stream | risky_safe
    [env.params]
    cost_safe = 1.0
    cost_risky_high = 2.2

    [algorithm]
    name = "cvar_ssp"         # variance_discounted | variance_average | cvar_ssp | cpt
    alpha = 1.05
    beta = 0.9
    iterations = 2000
    x0 = 1
    # optional: lambda_max, lambda0, theta0, horizon, max_episode_steps,
    # holder_order, objective_gradient, box = {lower = -10, upper = 10}
    # cpt = {model = "default", exponent = 0.69}   or   {model = "identity"}

    [schedules]               # every entry optional
    zeta1 = {coef = 1.0, exponent = 1.0}
    zeta2 = {coef = 5.0, exponent = 0.75}
    batch = {m0 = 100, coef = 1.0, exponent = 0.5}

Each replication writes ``trace_<r>.csv``; ``summary.csv`` holds one row per
replication.  Floats are written with 17 significant digits so that a rerun
of the same config reproduces every file byte for byte.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import oracle
from .algorithms import ALGORITHMS, RunConfig, RunTrace, run
from .environments import EnvSpec
from .errors import ConfigError, ScheduleInvalid
from .mdp import Average, Discounted, SoftmaxPolicy, Ssp, TabularMdp
from .optimizer import (BatchSchedule, BoxConstraint, PowerSchedule, Schedules,
                        ValidationReport, validate_schedules)
from .risk import (CptModel, cpt_exact, default_cpt_model, distribution_var_cvar,
                   identity_cpt_model)

DEFAULT_TOLERANCE = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig
    replications: int = 1
    base_seed: int = 0
    seeds: tuple[int, ...] | None = None
    output_dir: Path = Path("riskpg-output")
    workers: int = 1
    tolerance: float = DEFAULT_TOLERANCE
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds[:self.replications])
        return [self.base_seed + r for r in range(self.replications)]


# ---------------------------------------------------------------------------
# Parsing


def _table(raw: dict, key: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{key}] must be a table")
    return value


def _power(spec: dict, name: str, default: PowerSchedule) -> PowerSchedule:
    if name not in spec:
        return default
    entry = spec[name]
    unknown = set(entry) - {"coef", "exponent"}
    if unknown:
        raise ConfigError(f"schedules.{name}: unknown keys {sorted(unknown)}")
    try:
        return PowerSchedule(float(entry.get("coef", default.coef)),
                             float(entry.get("exponent", default.exponent)))
    except ValueError as exc:
        raise ConfigError(f"schedules.{name}: {exc}") from exc


def parse_schedules(spec: dict) -> Schedules:
    base = Schedules()
    unknown = set(spec) - {"zeta1", "zeta2", "zeta3", "zeta4", "delta", "batch"}
    if unknown:
        raise ConfigError(f"[schedules]: unknown keys {sorted(unknown)}")
    batch = base.batch
    if "batch" in spec:
        b = spec["batch"]
        try:
            batch = BatchSchedule(int(b.get("m0", batch.m0)), float(b.get("coef", batch.coef)),
                                  float(b.get("exponent", batch.exponent)))
        except ValueError as exc:
            raise ConfigError(f"schedules.batch: {exc}") from exc
    return Schedules(**{name: _power(spec, name, getattr(base, name))
                        for name in ("zeta1", "zeta2", "zeta3", "zeta4", "delta")}, batch=batch)


def _cpt_model(spec: dict | None) -> CptModel | None:
    if spec is None:
        return None
    kind = spec.get("model", "default")
    if kind == "identity":
        return identity_cpt_model()
    if kind == "default":
        return default_cpt_model(float(spec.get("exponent", 0.69)))
    raise ConfigError(f"unknown cpt model {kind!r}")


def _box(spec: dict | None, dim: int) -> BoxConstraint | None:
    if spec is None:
        return None
    lo = np.broadcast_to(np.asarray(spec.get("lower", -10.0), float), (dim,))
    hi = np.broadcast_to(np.asarray(spec.get("upper", 10.0), float), (dim,))
    return BoxConstraint(lo.copy(), hi.copy())


_RUN_KEYS = {"name", "alpha", "beta", "iterations", "x0", "lambda_max", "lambda0", "theta0",
             "horizon", "max_episode_steps", "holder_order", "objective_gradient", "box", "cpt"}


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a decoded TOML document."""
    exp, env, alg = _table(raw, "experiment"), _table(raw, "env"), _table(raw, "algorithm")
    if "kind" not in env:
        raise ConfigError("[env] needs a 'kind'")
    try:
        env_spec = EnvSpec(env["kind"], dict(env.get("params", {})))
        mdp = env_spec.build()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[env]: {exc}") from exc
    unknown = set(alg) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"[algorithm]: unknown keys {sorted(unknown)}")
    for key in ("name", "alpha"):
        if key not in alg:
            raise ConfigError(f"[algorithm] needs '{key}'")
    if alg["name"] not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {alg['name']!r}; expected one of {ALGORITHMS}")
    optional = {k: alg[k] for k in ("beta", "horizon", "holder_order", "objective_gradient")
                if k in alg}
    try:
        run_cfg = RunConfig(
            env=env_spec, algorithm=alg["name"], alpha=float(alg["alpha"]),
            cpt_model=_cpt_model(alg.get("cpt")),
            schedules=parse_schedules(_table(raw, "schedules")),
            box=_box(alg.get("box"), mdp.dim),
            lambda_max=float(alg.get("lambda_max", 1e3)),
            lambda0=float(alg.get("lambda0", 0.0)),
            iterations=int(alg.get("iterations", 100)),
            x0=int(alg.get("x0", 0)),
            theta0=None if "theta0" not in alg else np.asarray(alg["theta0"], float),
            max_episode_steps=int(alg.get("max_episode_steps", 10_000)),
            seed=int(exp.get("base_seed", 0)),
            **optional)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[algorithm]: {exc}") from exc

    seeds = exp.get("seeds")
    replications = int(exp.get("replications", len(seeds) if seeds is not None else 1))
    if replications < 0:
        raise ConfigError("replications must be nonnegative")
    if seeds is not None and len(seeds) < replications:
        raise ConfigError(f"{replications} replications but only {len(seeds)} seeds")
    out = Path(exp.get("output_dir", "riskpg-output"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    workers = int(exp.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    return ExperimentConfig(
        run=run_cfg, replications=replications, base_seed=int(exp.get("base_seed", 0)),
        seeds=None if seeds is None else tuple(int(s) for s in seeds), output_dir=out,
        workers=workers, tolerance=float(exp.get("tolerance", DEFAULT_TOLERANCE)), raw=raw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(raw)


def override(config: ExperimentConfig, *, output_dir=None, replications=None, seed=None,
             workers=None) -> ExperimentConfig:
    changes: dict[str, Any] = {}
    if output_dir is not None:
        changes["output_dir"] = Path(output_dir)
    if replications is not None:
        if replications < 0:
            raise ConfigError("replications must be nonnegative")
        changes["replications"] = replications
        if config.seeds is not None and len(config.seeds) < replications:
            raise ConfigError(f"{replications} replications but only {len(config.seeds)} seeds")
    if seed is not None:
        changes["base_seed"] = seed
        changes["seeds"] = None
    if workers is not None:
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        changes["workers"] = workers
    return replace(config, **changes)


# ---------------------------------------------------------------------------
# Validation and oracle evaluation


def validation_report(run_cfg: RunConfig) -> ValidationReport:
    """The schedule report for the mode the configured driver requires."""
    a = run_cfg.algorithm
    if a == "variance_discounted":
        return validate_schedules(run_cfg.schedules, "A4prime", holder_order=run_cfg.holder_order)
    if a == "cpt":
        return validate_schedules(run_cfg.schedules, "A4prime", holder_order=run_cfg.holder_order)
    if a == "variance_average":
        return validate_schedules(run_cfg.schedules, "A4", critic_timescale=True)
    return validate_schedules(run_cfg.schedules, "A4", var_recursion=True)


_SETTINGS = {"variance_discounted": Discounted, "variance_average": Average,
             "cvar_ssp": Ssp, "cpt": (Discounted, Ssp)}


def validate(config: ExperimentConfig) -> ValidationReport:
    """Raise :class:`ScheduleInvalid` or :class:`ConfigError` if the experiment cannot run."""
    run_cfg = config.run
    mdp = run_cfg.build_mdp()
    if not isinstance(mdp.setting, _SETTINGS[run_cfg.algorithm]):
        raise ConfigError(f"{run_cfg.algorithm} cannot run on a "
                          f"{type(mdp.setting).__name__} environment")
    if not 0 <= run_cfg.x0 < mdp.n_states:
        raise ConfigError(f"x0={run_cfg.x0} is not a state")
    report = validation_report(run_cfg)
    if not report.passed:
        raise ScheduleInvalid("schedules fail " + report.mode + ": "
                              + ", ".join(c.name for c in report.failures), report)
    return report


@dataclass(frozen=True)
class OracleRecord:
    J: float
    G: float

    def as_dict(self) -> dict[str, float]:
        return {"J": self.J, "G": self.G}


def oracle_eval(run_cfg: RunConfig, theta, mdp: TabularMdp | None = None) -> OracleRecord:
    """Exact objective ``J`` and risk ``G`` of ``theta`` for the configured problem.

    Discounted CPT uses the exact law of the ``horizon``-step return, the
    quantity the driver samples.
    """
    mdp = run_cfg.build_mdp() if mdp is None else mdp
    policy = SoftmaxPolicy.for_mdp(mdp, theta)
    x0, a = run_cfg.x0, run_cfg.algorithm
    if a == "variance_discounted":
        sol = oracle.solve_discounted(mdp, policy)
        return OracleRecord(float(sol.J[x0]), float(sol.variance[x0]))
    if a == "variance_average":
        sol = oracle.average_cost_solution(mdp, policy)
        return OracleRecord(float(sol.avg_cost), float(sol.variance))
    if a == "cvar_ssp":
        law = oracle.ssp_cost_distribution(mdp, policy, x0).distribution
        return OracleRecord(law.mean(), distribution_var_cvar(law, run_cfg.beta)[1])
    model = run_cfg.cpt_model if run_cfg.cpt_model is not None else default_cpt_model()
    if isinstance(mdp.setting, Ssp):
        law = oracle.ssp_cost_distribution(mdp, policy, x0).distribution
        return OracleRecord(law.mean(), cpt_exact(law, model))
    horizon = run_cfg.horizon or max(1, math.ceil(math.log(1e-3) / math.log(mdp.gamma)))
    law = oracle.horizon_return_distribution(mdp, policy, x0, horizon)
    return OracleRecord(float(oracle.solve_value(mdp, policy)[x0]), cpt_exact(law, model))


# ---------------------------------------------------------------------------
# Output


def _fmt(x) -> str:
    return format(float(x), ".17g")


def trace_header(dim: int) -> list[str]:
    return (["iter"] + [f"theta_{i}" for i in range(dim)]
            + ["lambda", "J_hat", "G_hat", "grad_norm_J", "grad_norm_G", "episodes_used"])


def trace_csv(trace: RunTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(trace.theta0.size))
    for n in range(len(trace)):
        w.writerow([n] + [_fmt(t) for t in trace.thetas[n]]
                   + [_fmt(trace.lambdas[n]), _fmt(trace.J_hat[n]), _fmt(trace.G_hat[n]),
                      _fmt(trace.grad_norm_J[n]), _fmt(trace.grad_norm_G[n]),
                      int(trace.episodes_used[n])])
    return buf.getvalue()


def summary_header(dim: int) -> list[str]:
    return (["replication", "seed"] + [f"theta_{i}" for i in range(dim)]
            + ["lambda", "oracle_J", "oracle_G", "alpha", "constraint_satisfied", "truncated"])


def _replicate(args) -> list[str]:
    run_cfg, r, seed, out_dir, tolerance = args
    cfg = replace(run_cfg, seed=seed)
    trace = run(cfg)
    (Path(out_dir) / f"trace_{r}.csv").write_text(trace_csv(trace))
    rec = oracle_eval(cfg, trace.final_theta)
    ok = rec.G <= cfg.alpha + tolerance
    return ([str(r), str(seed)] + [_fmt(t) for t in trace.final_theta]
            + [_fmt(trace.final_lambda), _fmt(rec.J), _fmt(rec.G), _fmt(cfg.alpha),
               "true" if ok else "false", "true" if trace.any_truncated else "false"])


@dataclass(frozen=True)
class ExperimentResult:
    output_dir: Path
    rows: list[list[str]]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Validate, run every replication and write traces plus ``summary.csv``."""
    validate(config)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    dim = config.run.build_mdp().dim
    jobs = [(config.run, r, seed, str(out), config.tolerance)
            for r, seed in enumerate(config.seed_list())]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as pool:
            rows = list(pool.map(_replicate, jobs))
    else:
        rows = [_replicate(job) for job in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(summary_header(dim))
    w.writerows(rows)
    (out / "summary.csv").write_text(buf.getvalue())
    return ExperimentResult(out, rows)


def read_theta(path: str | Path) -> np.ndarray:
    """Parameter vector from a text file of comma- or whitespace-separated numbers."""
    text = Path(path).read_text().replace(",", " ").split()
    try:
        return np.array([float(t) for t in text])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
