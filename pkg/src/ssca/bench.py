"""Multi-path experiment campaigns: config ingestion, per-path runs, CSV
traces, summaries and plot-ready convergence tables.

Each path runs once for ``reference_iters`` iterations with early stopping
disabled.  Its last iterate is the reference point ``p*``.  The measured run
of the same path is the prefix of that trajectory up to the point where the
normal stopping rule (or ``max_outer_iters``) would have ended it; iterate
sequences do not depend on the stopping rule, so rerunning it would reproduce
the prefix exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import PenaltyConfig
from .driver import TRACE_COLUMNS, RunConfig, RunResult, objective_estimate, run_parallel_ssca, run_ssca
from .subproblem import InnerSolverConfig
from .surrogate import StepsizeSchedule
from .toys import separable_quadratic
from .wireless import NetworkModel, build_problem7, build_problem8, sample_rates

PROBLEMS = ("problem7", "problem8", "custom-toy")
ALGORITHMS = ("ssca", "parallel")
OUTPUT_ENV = "SSCA_OUTPUT_DIR"
MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    pass


# -- seeds ---------------------------------------------------------------------


def splitmix64(state: int) -> int:
    """One output of the splitmix64 generator for a given 64-bit state."""
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def path_seed(master: int, path: int) -> int:
    """Seed of sample path ``path``: the ``path``-th splitmix64 output of a
    generator whose state starts at ``master``."""
    if master < 0 or path < 0:
        raise ValueError("seeds and path indices must be nonnegative")
    return splitmix64((master + path * 0x9E3779B97F4A7C15) & MASK64)


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class ToyConfig:
    center: tuple = (1.0, 2.0, 3.0)
    lower: float = 0.0
    upper: float = 10.0


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    problem: str = "problem7"
    algorithm: Optional[str] = None
    model: NetworkModel = field(default_factory=lambda: NetworkModel.symmetric(5))
    toy: ToyConfig = ToyConfig()
    run: RunConfig = RunConfig()
    paths: int = 50
    reference_iters: int = 20_000
    report_threshold: float = 0.02
    mc_samples: int = 100_000
    full_iterates: bool = True
    record_time: bool = True

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem: expected one of {PROBLEMS}, got {self.problem!r}")
        if self.algorithm is None:
            object.__setattr__(self, "algorithm", "parallel" if self.problem == "problem8" else "ssca")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: expected one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.paths < 1:
            raise ConfigError("paths: must be >= 1")
        if self.reference_iters < 1:
            raise ConfigError("reference_iters: must be >= 1")
        if not 0 < self.report_threshold < 1:
            raise ConfigError("report_threshold: must lie in (0, 1)")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples: must be >= 2")

    def build_problem(self):
        if self.problem == "problem7":
            return build_problem7(self.model)
        if self.problem == "problem8":
            return build_problem8(self.model)
        return separable_quadratic(self.toy.center, self.toy.lower, self.toy.upper)

    def runner(self):
        return run_parallel_ssca if self.algorithm == "parallel" else run_ssca

    def to_dict(self) -> dict:
        run = asdict(self.run)
        run["rho"] = run["penalty"]["rho"]
        run["rho_growth"] = run["penalty"]["rho_growth"]
        del run["penalty"], run["x0"]
        for k in ("gamma", "omega"):
            del run[k]["kind"]
        return {
            "problem": self.problem, "algorithm": self.algorithm, "model": self.model.to_dict(),
            "toy": {"center": list(self.toy.center), "lower": self.toy.lower, "upper": self.toy.upper},
            "run": run, "paths": self.paths, "reference_iters": self.reference_iters,
            "report_threshold": self.report_threshold, "mc_samples": self.mc_samples,
            "full_iterates": self.full_iterates, "record_time": self.record_time,
        }


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"{prefix}{unknown[0]}: unknown key")


def _num(v, where, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{where}: expected an integer")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return float(v)


def _vector_or_scalar(v, where, K):
    if isinstance(v, list):
        if len(v) != K:
            raise ConfigError(f"{where}: expected {K} entries")
        return [_num(a, f"{where}[{i}]") for i, a in enumerate(v)]
    return _num(v, where)


def _parse_model(d) -> NetworkModel:
    _check_keys(d, ("K", "power_limits", "noise_vars", "rate_reqs", "gain_vars"), "model")
    K = _num(d.get("K", 5), "model.K", integer=True)
    if K < 1:
        raise ConfigError("model.K: must be >= 1")
    labels = {"power_limits": "P_k", "noise_vars": "sigma^2_k", "rate_reqs": "R_k"}
    defaults = {"power_limits": 100.0, "noise_vars": 1.0, "rate_reqs": 1.0}
    vals = {}
    for name, label in labels.items():
        v = np.asarray(_vector_or_scalar(d.get(name, defaults[name]), f"model.{name}", K), dtype=float)
        bad = v < 0 if name == "rate_reqs" else v <= 0
        if np.any(bad):
            kind = "nonnegative" if name == "rate_reqs" else "positive"
            raise ConfigError(f"model.{name}: {label} must be {kind}")
        vals[name] = v
    gv = d.get("gain_vars", {"direct": 1.0, "cross": 0.1})
    if isinstance(gv, dict):
        _check_keys(gv, ("direct", "cross"), "model.gain_vars")
        direct = _num(gv.get("direct", 1.0), "model.gain_vars.direct")
        cross = _num(gv.get("cross", 0.1), "model.gain_vars.cross")
        V = np.full((K, K), cross)
        np.fill_diagonal(V, direct)
    elif isinstance(gv, list) and len(gv) == K and all(isinstance(r, list) for r in gv):
        V = np.array([_vector_or_scalar(r, f"model.gain_vars[{i}]", K) for i, r in enumerate(gv)], dtype=float)
    else:
        raise ConfigError(f"model.gain_vars: expected {{direct, cross}} or a {K}x{K} matrix")
    if np.any(V <= 0):
        raise ConfigError("model.gain_vars: v_kj must be positive")
    return NetworkModel(K, vals["power_limits"], vals["noise_vars"], vals["rate_reqs"], V)


def _parse_schedule(d, where, default: StepsizeSchedule) -> StepsizeSchedule:
    _check_keys(d, ("exponent", "scale", "offset"), where)
    try:
        return StepsizeSchedule(
            _num(d.get("exponent", default.exponent), f"{where}.exponent"),
            _num(d.get("scale", default.scale), f"{where}.scale"),
            _num(d.get("offset", default.offset), f"{where}.offset", integer=True),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


_INNER_KEYS = ("max_iters", "tol", "smoothing_mu", "mu_start", "step_rule", "prox_tau", "newton", "step_scale")
_RUN_INT = ("max_outer_iters", "seed", "restarts", "window", "min_outer_iters", "batch_size",
            "max_components", "workers")
_RUN_FLOAT = ("stop_residual", "slack_zero_tol", "prune_threshold")


def _parse_inner(d) -> InnerSolverConfig:
    _check_keys(d, _INNER_KEYS, "run.inner")
    kw = {}
    for k, v in d.items():
        where = f"run.inner.{k}"
        if k == "step_rule":
            if not isinstance(v, str):
                raise ConfigError(f"{where}: expected a string")
            kw[k] = v
        elif k == "newton":
            if not isinstance(v, bool):
                raise ConfigError(f"{where}: expected true or false")
            kw[k] = v
        else:
            kw[k] = _num(v, where, integer=(k == "max_iters"))
    try:
        return InnerSolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"run.inner: {exc}") from None


def _parse_run(d) -> RunConfig:
    _check_keys(d, _RUN_INT + _RUN_FLOAT + ("gamma", "omega", "rho", "rho_growth", "inner"), "run")
    base = RunConfig()
    kw = {}
    for k in _RUN_INT:
        if k in d:
            kw[k] = _num(d[k], f"run.{k}", integer=True)
    for k in _RUN_FLOAT:
        if k in d:
            kw[k] = _num(d[k], f"run.{k}")
    kw["gamma"] = _parse_schedule(d.get("gamma", {}), "run.gamma", base.gamma)
    kw["omega"] = _parse_schedule(d.get("omega", {}), "run.omega", base.omega)
    rho = _num(d.get("rho", base.penalty.rho), "run.rho")
    growth = _num(d.get("rho_growth", base.penalty.rho_growth), "run.rho_growth")
    if rho <= 0:
        raise ConfigError("run.rho: must be positive")
    if growth < 1:
        raise ConfigError("run.rho_growth: must be >= 1")
    kw["penalty"] = PenaltyConfig(rho, growth)
    kw["inner"] = _parse_inner(d.get("inner", {}))
    for k in ("max_outer_iters", "restarts", "window", "batch_size", "workers"):
        if k in kw and kw[k] < 1:
            raise ConfigError(f"run.{k}: must be >= 1")
    for k in ("seed", "min_outer_iters"):
        if k in kw and kw[k] < 0:
            raise ConfigError(f"run.{k}: must be nonnegative")
    for k in ("stop_residual",):
        if k in kw and kw[k] <= 0:
            raise ConfigError(f"run.{k}: must be positive")
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"run: {exc}") from None


def _parse_toy(d) -> ToyConfig:
    _check_keys(d, ("center", "lower", "upper"), "toy")
    center = d.get("center", list(ToyConfig.center))
    if not isinstance(center, list) or not center:
        raise ConfigError("toy.center: expected a nonempty list")
    center = tuple(_num(c, f"toy.center[{i}]") for i, c in enumerate(center))
    lower = _num(d.get("lower", 0.0), "toy.lower")
    upper = _num(d.get("upper", 10.0), "toy.upper")
    if lower > upper:
        raise ConfigError("toy.upper: must be >= toy.lower")
    return ToyConfig(center, lower, upper)


_TOP_KEYS = ("problem", "algorithm", "model", "toy", "run", "paths", "reference_iters", "report_threshold",
             "mc_samples", "full_iterates", "record_time")


def parse_config(data: dict) -> ExperimentConfig:
    _check_keys(data, _TOP_KEYS, "")
    kw = {}
    for k in ("problem", "algorithm"):
        if k in data:
            if not isinstance(data[k], str):
                raise ConfigError(f"{k}: expected a string")
            kw[k] = data[k]
    kw["model"] = _parse_model(data.get("model", {}))
    kw["toy"] = _parse_toy(data.get("toy", {}))
    kw["run"] = _parse_run(data.get("run", {}))
    for k in ("paths", "reference_iters", "mc_samples"):
        if k in data:
            kw[k] = _num(data[k], k, integer=True)
    if "report_threshold" in data:
        kw["report_threshold"] = _num(data["report_threshold"], "report_threshold")
    for k in ("full_iterates", "record_time"):
        if k in data:
            if not isinstance(data[k], bool):
                raise ConfigError(f"{k}: expected true or false")
            kw[k] = data[k]
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment file.

    Raises :class:`ConfigError` with ``file:line:col`` for malformed JSON and
    with the dotted field name for invalid values.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data)


def bundled_config_path(name: str = "paper_sec5.json") -> Path:
    return Path(str(resources.files("ssca") / "data" / name))


# -- campaign ------------------------------------------------------------------------


def relative_errors(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``||x_t - ref||_1 / ||ref||_1`` for every row of ``x``."""
    ref = np.asarray(ref, dtype=float)
    scale = np.abs(ref).sum()
    if scale == 0:
        raise ValueError("reference point is zero; relative error undefined")
    return np.abs(np.asarray(x, dtype=float) - ref).sum(axis=1) / scale


def iterations_to_threshold(errors: np.ndarray, threshold: float) -> Optional[int]:
    """Smallest t (1-based) with ``errors[t'] <= threshold`` for every t' >= t
    in the given horizon, or None if the last entry is above it."""
    above = np.flatnonzero(np.asarray(errors) > threshold)
    if above.size == 0:
        return 1
    last = int(above[-1]) + 1
    return None if last >= len(errors) else last + 1


def measured_horizon(residual: np.ndarray, run: RunConfig) -> int:
    """Length of the run the normal stopping rule would have produced."""
    T = min(len(residual), run.max_outer_iters)
    t = np.arange(1, T + 1)
    hit = np.flatnonzero((residual[:T] <= run.stop_residual) & (t >= run.min_outer_iters))
    return int(hit[0]) + 1 if hit.size else T


@dataclass
class PathResult:
    path: int
    seed: int
    iterations: Optional[int]
    measured_iters: int
    slack_sum: float
    min_margin: float
    margins: tuple
    sum_rate: float
    sum_rate_se: float
    reference: tuple
    x_star: tuple
    elapsed_s: float
    seconds_per_iter: float

    @property
    def reached(self) -> bool:
        return self.iterations is not None


@dataclass
class CampaignSummary:
    per_path: list
    threshold: float
    reference_iters: int
    master_seed: int
    slack_tol: float

    @property
    def iterations(self) -> list:
        return [p.iterations for p in self.per_path]

    @property
    def median_iterations(self) -> float:
        """Median with unreached paths counted as infinite."""
        its = [math.inf if i is None else i for i in self.iterations]
        return float(np.median(its))

    @property
    def mean_iterations(self) -> float:
        """Mean over paths that reached the threshold (nan if none did)."""
        its = [i for i in self.iterations if i is not None]
        return float(np.mean(its)) if its else math.nan

    @property
    def fraction_zero_slack(self) -> float:
        return float(np.mean([p.slack_sum <= self.slack_tol for p in self.per_path]))

    @property
    def min_margin(self) -> float:
        return float(min(p.min_margin for p in self.per_path))

    @property
    def total_elapsed(self) -> float:
        return float(sum(p.elapsed_s for p in self.per_path))

    @property
    def seconds_per_iter(self) -> float:
        return float(np.median([p.seconds_per_iter for p in self.per_path]))

    @property
    def mean_sum_rate(self) -> float:
        return float(np.mean([p.sum_rate for p in self.per_path]))

    def to_dict(self) -> dict:
        """JSON-ready aggregates; non-finite values become null."""
        d = {
            "paths": len(self.per_path),
            "master_seed": self.master_seed,
            "seed_derivation": "splitmix64(master + path * 0x9E3779B97F4A7C15)",
            "reference_iters": self.reference_iters,
            "report_threshold": self.threshold,
            "paths_reached": sum(p.reached for p in self.per_path),
            "median_iterations": self.median_iterations,
            "mean_iterations": self.mean_iterations,
            "fraction_zero_slack": self.fraction_zero_slack,
            "min_margin": self.min_margin,
            "mean_sum_rate": self.mean_sum_rate,
            "total_elapsed_s": self.total_elapsed,
            "median_seconds_per_iter": self.seconds_per_iter,
        }
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace_csv(path, result: RunResult, full_iterates: bool = True, record_time: bool = True) -> None:
    trace = result.trace
    X = trace.x
    header = list(TRACE_COLUMNS)
    if full_iterates:
        header += [f"x_{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row, x in zip(trace.rows, X):
            row = list(row)
            if not record_time:
                row[-1] = 0.0
            out = [_fmt(v) for v in row]
            if full_iterates:
                out += [_fmt(v) for v in x]
            w.writerow(out)


def _margins(cfg: ExperimentConfig, problem, x, seed):
    """Constraint margins and objective at ``x`` by Monte Carlo."""
    if cfg.problem == "custom-toy":
        val, se = objective_estimate(problem, x, 2, seed)
        return (), math.inf, -val, se
    model = cfg.model
    lower = cfg.problem == "problem8"
    rates = sample_rates(model, x, cfg.mc_samples, seed, lower_bound=lower)
    margins = tuple((rates.mean(axis=0) - model.rate_reqs).tolist())
    if lower:
        exact = sample_rates(model, x, cfg.mc_samples, seed)
    else:
        exact = rates
    sums = exact.sum(axis=1)
    return margins, float(min(margins)), float(sums.mean()), float(sums.std(ddof=1) / math.sqrt(len(sums)))


def run_path(cfg: ExperimentConfig, path: int, master_seed: int, out_dir: Optional[Path] = None) -> PathResult:
    seed = path_seed(master_seed, path)
    problem = cfg.build_problem()
    run_cfg = replace(cfg.run, seed=seed, max_outer_iters=cfg.reference_iters,
                      min_outer_iters=cfg.reference_iters)
    ref = cfg.runner()(problem, run_cfg)
    if out_dir is not None:
        write_trace_csv(Path(out_dir) / f"path_{path:03d}.csv", ref, cfg.full_iterates, cfg.record_time)
    X = ref.trace.x
    horizon = measured_horizon(ref.trace.column("residual"), cfg.run)
    errs = relative_errors(X[:horizon], X[-1])
    x_star = X[horizon - 1]
    slack = float(ref.trace.column("slack_sum")[horizon - 1])
    margins, min_margin, rate, rate_se = _margins(cfg, problem, x_star, path_seed(seed, 1))
    elapsed = float(ref.trace.column("elapsed_s")[-1]) if cfg.record_time else 0.0
    return PathResult(
        path=path, seed=seed, iterations=iterations_to_threshold(errs, cfg.report_threshold),
        measured_iters=horizon, slack_sum=slack, min_margin=min_margin, margins=margins,
        sum_rate=rate, sum_rate_se=rate_se, reference=tuple(X[-1].tolist()), x_star=tuple(x_star.tolist()),
        elapsed_s=elapsed, seconds_per_iter=elapsed / len(X),
    )


SUMMARY_COLUMNS = ("path", "seed", "iterations_to_threshold", "measured_iters", "slack_sum", "min_margin",
                   "sum_rate", "sum_rate_se", "elapsed_s", "seconds_per_iter")


def write_summary(out_dir: Path, cfg: ExperimentConfig, summary: CampaignSummary, complete: bool = True) -> None:
    out_dir = Path(out_dir)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for p in summary.per_path:
            w.writerow([p.path, p.seed, "not-reached" if p.iterations is None else p.iterations,
                        p.measured_iters, _fmt(p.slack_sum), _fmt(p.min_margin), _fmt(p.sum_rate),
                        _fmt(p.sum_rate_se), _fmt(p.elapsed_s), _fmt(p.seconds_per_iter)])
    meta = summary.to_dict()
    meta["complete"] = complete
    meta["config"] = cfg.to_dict()
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_out_dir(out: Optional[str], default: str = "runs") -> Path:
    if out is not None:
        return Path(out)
    return Path(os.environ.get(OUTPUT_ENV, default))


def run_campaign(cfg: ExperimentConfig, out_dir=None, paths: Optional[int] = None,
                 seed: Optional[int] = None, jobs: int = 1, progress=None) -> CampaignSummary:
    """Run every path, write ``path_XXX.csv`` traces plus ``summary.csv`` and
    ``summary.json`` to ``out_dir`` (if given) and return the summary.

    If a path fails, the summary of the finished paths is still written
    (marked incomplete) before the error propagates.
    """
    n_paths = cfg.paths if paths is None else paths
    master = cfg.run.seed if seed is None else seed
    if n_paths < 1:
        raise ValueError("paths must be >= 1")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    results: list = []

    def finish(complete):
        summary = CampaignSummary(sorted(results, key=lambda p: p.path), cfg.report_threshold,
                                  cfg.reference_iters, master, cfg.run.slack_zero_tol)
        if out_dir is not None and results:
            write_summary(out_dir, cfg, summary, complete)
        return summary

    try:
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as pool:
                futures = [pool.submit(run_path, cfg, p, master, out_dir) for p in range(n_paths)]
                for fut in futures:
                    results.append(fut.result())
                    if progress:
                        progress(results[-1])
        else:
            for p in range(n_paths):
                results.append(run_path(cfg, p, master, out_dir))
                if progress:
                    progress(results[-1])
    except BaseException:
        finish(False)
        raise
    return finish(True)


# -- traces on disk -----------------------------------------------------------------------


def read_trace_csv(path) -> dict:
    """Load a trace file into ``{"columns": ..., "data": (T, c) array}``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = rows[0]
    if tuple(header[: len(TRACE_COLUMNS)]) != TRACE_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, len(header))
    return {"columns": header, "data": data}


def trace_iterates(trace: dict) -> np.ndarray:
    cols = [j for j, c in enumerate(trace["columns"]) if c.startswith("x_")]
    if not cols:
        raise ValueError("trace has no iterate columns; rerun with full_iterates enabled")
    return trace["data"][:, cols]


def iterations_from_trace(path, run: RunConfig, threshold: float) -> Optional[int]:
    """Recompute a path's iterations-to-threshold from its trace file alone."""
    tr = read_trace_csv(path)
    X = trace_iterates(tr)
    horizon = measured_horizon(tr["data"][:, TRACE_COLUMNS.index("residual")], run)
    return iterations_to_threshold(relative_errors(X[:horizon], X[-1]), threshold)


PLOT_COLUMNS = ("t", "median", "q25", "q75", "min", "max", "count")


def emit_plot_data(trace_files: Sequence, out_path) -> np.ndarray:
    """Per-iteration order statistics of the relative error across traces.

    Each trace's error is measured against its own last iterate.  Rows are
    aligned by iteration index; iteration t uses every trace at least t long.
    Returns the table that was written.
    """
    files = list(trace_files)
    if not files:
        raise ValueError("no trace files given")
    curves = []
    for f in files:
        tr = read_trace_csv(f)
        X = trace_iterates(tr)
        if len(X) == 0:
            raise ValueError(f"{f}: trace has no rows")
        curves.append(relative_errors(X, X[-1]))
    T = max(len(c) for c in curves)
    M = np.full((len(curves), T), np.nan)
    for j, c in enumerate(curves):
        M[j, : len(c)] = c
    count = np.sum(~np.isnan(M), axis=0)
    q = np.nanquantile(M, [0.5, 0.25, 0.75], axis=0)
    table = np.column_stack([np.arange(1, T + 1), q[0], q[1], q[2], np.nanmin(M, axis=0),
                             np.nanmax(M, axis=0), count])
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for row in table:
            w.writerow([int(row[0])] + [_fmt(v) for v in row[1:6]] + [int(row[6])])
    return table


def trace_files(directory) -> list:
    return sorted(Path(directory).glob("path_*.csv"))
