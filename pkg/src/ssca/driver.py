"""Outer SSCA loops: sequential (one joint subproblem) and parallel (one
subproblem per block), iterate averaging, restarts and diagnostics."""

from __future__ import annotations

import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import Box, PenaltyConfig, StochasticProblem, mean_component
from .subproblem import InnerSolverConfig, SubproblemError, solve_block_subproblem, solve_subproblem
from .surrogate import DEFAULT_GAMMA, DEFAULT_OMEGA, StepsizeSchedule, empty_state

TRACE_COLUMNS = ("t", "objective", "slack_sum", "step_gap", "residual", "elapsed_s")


@dataclass(frozen=True)
class RunConfig:
    max_outer_iters: int = 5000
    stop_residual: float = 1e-4
    gamma: StepsizeSchedule = DEFAULT_GAMMA
    omega: StepsizeSchedule = DEFAULT_OMEGA
    penalty: PenaltyConfig = PenaltyConfig()
    inner: InnerSolverConfig = InnerSolverConfig()
    seed: int = 0
    restarts: int = 1
    slack_zero_tol: float = 1e-3
    window: int = 50
    min_outer_iters: int = 0
    batch_size: int = 1
    prune_threshold: float = 1e-8
    max_components: int = 10_000
    workers: int = 1
    x0: Optional[tuple] = None

    def __post_init__(self):
        if not self.stop_residual > 0:
            raise ValueError("stop_residual must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.window < 1 or self.batch_size < 1 or self.workers < 1:
            raise ValueError("window, batch_size and workers must be >= 1")
        if not self.seed >= 0:
            raise ValueError("seed must be nonnegative")
        if self.gamma.exponent <= self.omega.exponent:
            raise ValueError("gamma must decay faster than omega (gamma/omega -> 0)")


class IterateTrace:
    """Per-iteration rows; iterates are kept in full as an ``(T, n)`` array."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self._rows: list = []
        self._x: list = []
        self._s: list = []

    def append(self, t, x, s, objective, step_gap, residual, elapsed):
        if self._rows and t <= self._rows[-1][0]:
            raise ValueError("trace iterations must increase")
        self._rows.append((int(t), float(objective), float(np.sum(s)), float(step_gap), float(residual), float(elapsed)))
        self._x.append(np.array(x, dtype=float))
        self._s.append(np.array(s, dtype=float))

    def __len__(self) -> int:
        return len(self._rows)

    def column(self, name: str) -> np.ndarray:
        j = TRACE_COLUMNS.index(name)
        return np.array([r[j] for r in self._rows])

    @property
    def rows(self) -> list:
        return list(self._rows)

    @property
    def x(self) -> np.ndarray:
        return np.array(self._x).reshape(len(self._x), self.dimension)

    @property
    def s(self) -> np.ndarray:
        return np.array(self._s)

    def truncated(self, T: int) -> "IterateTrace":
        out = IterateTrace(self.dimension)
        out._rows, out._x, out._s = self._rows[:T], self._x[:T], self._s[:T]
        return out


@dataclass
class RunResult:
    x_star: np.ndarray
    s_star: np.ndarray
    converged: bool
    stationary_for_original: bool
    trace: IterateTrace
    iterations: int
    rho: float
    x0: np.ndarray = None
    attempts: int = 1
    pruned_mass: float = 0.0
    final_surrogates: tuple = field(default=(), repr=False)

    @property
    def slack_sum(self) -> float:
        return float(np.sum(self.s_star))

    @property
    def objective_estimate(self) -> float:
        return float(self.trace.column("objective")[-1]) if len(self.trace) else float("nan")


def average_iterate(x_prev, x_bar, gamma_t: float) -> np.ndarray:
    if not 0.0 < gamma_t <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma_t}")
    x_prev = np.asarray(x_prev, dtype=float)
    return (1.0 - gamma_t) * x_prev + gamma_t * np.asarray(x_bar, dtype=float)


def iteration_rng(seed: int, t: int) -> np.random.Generator:
    """Generator for iteration t, independent of everything but (seed, t)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))


def _draw(problem, seed, t, batch):
    rng = iteration_rng(seed, t)
    return [problem.sampler(rng) for _ in range(batch)]


class _Window:
    """Stopping residual: max(step gap, mean |change of slack sum| over the
    window)."""

    def __init__(self, size):
        self.deltas = deque(maxlen=size)
        self.last = None

    def push(self, slack_sum, step_gap):
        if self.last is not None:
            self.deltas.append(abs(slack_sum - self.last))
        self.last = slack_sum
        if len(self.deltas) < self.deltas.maxlen:
            return max(step_gap, float("inf") if not self.deltas else max(self.deltas))
        return max(step_gap, float(np.mean(self.deltas)))


def _start(problem: StochasticProblem, cfg: RunConfig, x0) -> np.ndarray:
    if x0 is None:
        x0 = problem.start() if cfg.x0 is None else cfg.x0
    return problem.feasible_set.project(np.asarray(x0, dtype=float))


def run_ssca(problem: StochasticProblem, cfg: RunConfig = RunConfig(), x0=None,
             sink: Optional[Callable[[tuple], None]] = None) -> RunResult:
    """Sequential SSCA: one joint convex subproblem per iteration."""
    if problem.surrogate is None:
        raise ValueError("problem has no full-vector surrogate builder")
    m = problem.constraint_count
    fs = problem.feasible_set
    x = _start(problem, cfg, x0)
    x_init = x.copy()
    rho = cfg.penalty.rho
    states = [empty_state(problem.dimension, cfg.prune_threshold, cfg.max_components) for _ in range(m + 1)]
    trace = IterateTrace(problem.dimension)
    window = _Window(cfg.window)
    x_bar_prev = x
    t0 = time.perf_counter()
    converged = False
    s = np.zeros(m)
    t = 0
    for t in range(1, cfg.max_outer_iters + 1):
        omega, gamma = cfg.omega(t), cfg.gamma(t)
        samples = _draw(problem, cfg.seed, t, cfg.batch_size)
        for i in range(m + 1):
            comp = mean_component([problem.surrogate(i, x, xi) for xi in samples])
            states[i] = states[i].add(comp, omega)
        try:
            sol = solve_subproblem(states[0], states[1:], rho, fs, x, cfg.inner, start=x_bar_prev)
        except SubproblemError as exc:
            raise SubproblemError(exc.index, f"outer iteration {t}") from None
        step_gap = float(np.max(np.abs(sol.x_bar - x)))
        x = fs.project(average_iterate(x, sol.x_bar, gamma))
        x_bar_prev = sol.x_bar
        s = sol.s
        residual = window.push(float(s.sum()), step_gap)
        row = (t, x, s, sol.objective_value, step_gap, residual, time.perf_counter() - t0)
        trace.append(*row)
        if sink is not None:
            sink(row)
        if residual <= cfg.stop_residual and t >= cfg.min_outer_iters:
            converged = True
            break
    return _result(x, s, converged, trace, t, rho, x_init, cfg, states)


def run_parallel_ssca(problem: StochasticProblem, cfg: RunConfig = RunConfig(), x0=None,
                      sink: Optional[Callable[[tuple], None]] = None) -> RunResult:
    """Parallel SSCA: K independent block subproblems per iteration, all
    solved against the same snapshot of iterate and surrogates."""
    bs = problem.blocks
    if bs is None:
        raise ValueError("parallel SSCA needs a problem with a block structure")
    fs: Box = problem.feasible_set
    block_sets = [fs.restrict(a, b) for a, b in bs.ranges]
    x = _start(problem, cfg, x0)
    x_init = x.copy()
    rho = cfg.penalty.rho
    states = [
        [empty_state(b - a, cfg.prune_threshold, cfg.max_components) for _ in range(mk + 1)]
        for (a, b), mk in zip(bs.ranges, bs.constraint_counts)
    ]
    trace = IterateTrace(problem.dimension)
    window = _Window(cfg.window)
    x_bar_prev = x
    t0 = time.perf_counter()
    converged = False
    s = np.zeros(problem.constraint_count)
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    t = 0
    try:
        for t in range(1, cfg.max_outer_iters + 1):
            omega, gamma = cfg.omega(t), cfg.gamma(t)
            samples = _draw(problem, cfg.seed, t, cfg.batch_size)
            snapshot = x.copy()

            def block_step(k, snapshot=snapshot, samples=samples, omega=omega, x_bar_prev=x_bar_prev):
                a, b = bs.ranges[k]
                local = states[k]
                for i in range(len(local)):
                    comp = mean_component([problem.block_surrogate(k, i, snapshot, xi) for xi in samples])
                    local[i] = local[i].add(comp, omega)
                try:
                    return solve_block_subproblem(k, local[0], local[1:], rho, block_sets[k],
                                                  snapshot[a:b], cfg.inner, start=x_bar_prev[a:b])
                except SubproblemError as exc:
                    raise SubproblemError(exc.index, f"block {k}, outer iteration {t}") from None

            if pool is None:
                sols = [block_step(k) for k in range(bs.K)]
            else:
                sols = list(pool.map(block_step, range(bs.K)))
            x_bar = np.concatenate([sol.x_bar for sol in sols])
            s = np.concatenate([sol.s for sol in sols])
            step_gap = float(np.max(np.abs(x_bar - snapshot)))
            x = fs.project(average_iterate(snapshot, x_bar, gamma))
            x_bar_prev = x_bar
            residual = window.push(float(s.sum()), step_gap)
            objective = float(np.mean([sol.objective_value for sol in sols]))
            row = (t, x, s, objective, step_gap, residual, time.perf_counter() - t0)
            trace.append(*row)
            if sink is not None:
                sink(row)
            if residual <= cfg.stop_residual and t >= cfg.min_outer_iters:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    flat = [st for blk in states for st in blk]
    return _result(x, s, converged, trace, t, rho, x_init, cfg, tuple(states), pruned=flat)


def _result(x, s, converged, trace, t, rho, x_init, cfg, states, pruned=None):
    pruned = states if pruned is None else pruned
    return RunResult(
        x_star=x, s_star=np.asarray(s, dtype=float), converged=converged,
        stationary_for_original=bool(converged and np.sum(s) <= cfg.slack_zero_tol),
        trace=trace, iterations=t, rho=rho, x0=x_init,
        pruned_mass=float(sum(st.total_pruned_mass for st in pruned)),
        final_surrogates=tuple(states),
    )


def multi_restart(problem: StochasticProblem, cfg: RunConfig = RunConfig(), parallel: bool = False) -> RunResult:
    """Rerun from fresh random starting points, growing rho after each attempt
    that ends with nonzero slack, until a zero-slack stationary point is found
    or the restarts run out.  Returns the best attempt by (slack, objective)."""
    runner = run_parallel_ssca if parallel else run_ssca
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, 1)))
    best = None
    rho = cfg.penalty.rho
    for attempt in range(cfg.restarts):
        x0 = problem.feasible_set.sample(rng)
        run_cfg = replace(cfg, penalty=replace(cfg.penalty, rho=rho), seed=cfg.seed + attempt)
        res = runner(problem, run_cfg, x0=x0)
        res.attempts = attempt + 1
        key = (res.slack_sum, res.objective_estimate)
        if best is None or key < (best.slack_sum, best.objective_estimate):
            best = res
        if res.stationary_for_original:
            best = res
            break
        rho *= cfg.penalty.rho_growth
    best.attempts = attempt + 1
    return best


def objective_estimate(problem: StochasticProblem, x, n_samples: int, seed: int):
    """Monte Carlo ``(mean, standard error)`` of ``g_0(x, xi)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    vals = np.array([problem.sample_value(0, x, problem.sampler(rng)) for _ in range(n_samples)])
    se = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return float(vals.mean()), se


def stationarity_check(problem: StochasticProblem, result: RunResult, cfg: RunConfig = RunConfig()) -> float:
    """Re-solve the final subproblem with frozen surrogates from ``x_star`` and
    return ``||x_bar - x_star||_inf``."""
    x = result.x_star
    if problem.blocks is not None and isinstance(result.final_surrogates[0], list):
        bs = problem.blocks
        parts = []
        for k, (a, b) in enumerate(bs.ranges):
            st = result.final_surrogates[k]
            sol = solve_block_subproblem(k, st[0], st[1:], result.rho, problem.feasible_set.restrict(a, b),
                                         x[a:b], cfg.inner)
            parts.append(sol.x_bar)
        x_bar = np.concatenate(parts)
    else:
        st = result.final_surrogates
        x_bar = solve_subproblem(st[0], st[1:], result.rho, problem.feasible_set, x, cfg.inner).x_bar
    return float(np.max(np.abs(x_bar - x)))
