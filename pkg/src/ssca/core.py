"""Problem abstractions: feasible sets, convex components, stochastic problems.

A stochastic problem is given by per-sample functions ``g_i(x, xi)`` for
``i = 0..m`` (index 0 is the objective) and a surrogate builder producing a
convex component ``g_hat_i(., anchor, xi)`` that is tangent to ``g_i(., xi)``
at the anchor.  Expectation constraints ``E[g_i] <= 0`` are handled through
the exact-penalty form ``f_0(x) + rho * sum_i s_i`` with ``f_i(x) <= s_i``,
``s >= 0``; slacks are never stored, since at any optimum
``s_i = max(0, f_i(x))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np


def _as_vector(x, n: Optional[int] = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {x.shape[0]}")
    return x


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------


class FeasibleSet:
    """Closed convex set accessed through its Euclidean projection."""

    dimension: int

    def project(self, y) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, atol: float = 0.0) -> bool:
        x = _as_vector(x, self.dimension)
        return bool(np.max(np.abs(self.project(x) - x), initial=0.0) <= atol)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} cannot draw random points")


@dataclass(frozen=True, eq=False)
class Box(FeasibleSet):
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower)
        hi = _as_vector(self.upper)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds must have the same dimension")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper componentwise")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite (the feasible set is compact)")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def project(self, y) -> np.ndarray:
        y = _as_vector(y, self.dimension)
        return np.minimum(np.maximum(y, self.lower), self.upper)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def restrict(self, start: int, stop: int) -> "Box":
        return Box(self.lower[start:stop], self.upper[start:stop])


@dataclass(frozen=True, eq=False)
class ProjectionSet(FeasibleSet):
    """User-supplied convex set given by a projection operator.

    ``sampler`` is optional and only needed for random restarts.
    """

    dimension: int
    projector: Callable[[np.ndarray], np.ndarray]
    sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None

    def project(self, y) -> np.ndarray:
        y = _as_vector(y, self.dimension)
        return _as_vector(self.projector(y), self.dimension)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is None:
            return super().sample(rng)
        return self.project(self.sampler(rng))


def project(feasible_set: FeasibleSet, y) -> np.ndarray:
    return feasible_set.project(y)


# ---------------------------------------------------------------------------
# Block structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockStructure:
    """Partition of ``0..n-1`` into K contiguous ranges ``[start, stop)``.

    ``constraint_counts[k]`` is the number of constraints that depend only on
    block k.
    """

    ranges: tuple
    constraint_counts: tuple

    def __post_init__(self):
        ranges = tuple((int(a), int(b)) for a, b in self.ranges)
        counts = tuple(int(c) for c in self.constraint_counts)
        if len(ranges) == 0:
            raise ValueError("at least one block is required")
        if len(counts) != len(ranges):
            raise ValueError("one constraint count per block is required")
        if any(c < 0 for c in counts):
            raise ValueError("constraint counts must be nonnegative")
        pos = 0
        for a, b in ranges:
            if a != pos or b <= a:
                raise ValueError(f"block ranges must be ordered, contiguous and non-empty; got {ranges}")
            pos = b
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "constraint_counts", counts)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], constraint_counts: Sequence[int]) -> "BlockStructure":
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        return cls(tuple(zip(bounds[:-1], bounds[1:])), tuple(constraint_counts))

    @property
    def K(self) -> int:
        return len(self.ranges)

    @property
    def dimension(self) -> int:
        return self.ranges[-1][1]

    def constraint_offsets(self) -> np.ndarray:
        """Start of each block's constraints in the flat slack vector."""
        return np.concatenate([[0], np.cumsum(self.constraint_counts)]).astype(int)


def split_blocks(x, blocks: BlockStructure) -> list:
    x = _as_vector(x)
    if x.shape[0] != blocks.dimension:
        raise ValueError(f"block structure covers {blocks.dimension} coordinates, vector has {x.shape[0]}")
    return [x[a:b].copy() for a, b in blocks.ranges]


# ---------------------------------------------------------------------------
# Convex components
# ---------------------------------------------------------------------------


class ConvexComponent:
    """One convex function ``x -> g_hat(x, anchor, sample)``.

    Subclasses provide ``evaluate`` and ``gradient``; ``hessian`` falls back to
    central differences of the gradient.
    """

    anchor: Optional[np.ndarray] = None
    sample_id: Any = None

    def evaluate(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        x = _as_vector(x)
        n = x.shape[0]
        H = np.empty((n, n))
        for j in range(n):
            h = 1e-6 * (1.0 + abs(x[j]))
            e = np.zeros(n)
            e[j] = h
            H[:, j] = (self.gradient(x + e) - self.gradient(x - e)) / (2 * h)
        return 0.5 * (H + H.T)

    def __call__(self, x) -> float:
        return self.evaluate(x)


@dataclass(frozen=True, eq=False)
class LogQuadratic(ConvexComponent):
    """``const + lin.x + x'Qx/2 - sum_r coef_r * log(rows_r.x + offsets_r)``.

    Convex when ``quad`` is PSD and every ``coef_r >= 0``.  All wireless
    surrogates and the quadratic test components are of this form, which lets
    :class:`~ssca.surrogate.SurrogateState` evaluate thousands of them with a
    handful of array operations.
    """

    const: float
    lin: np.ndarray
    quad: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None
    coefs: Optional[np.ndarray] = None
    anchor: Optional[np.ndarray] = None
    sample_id: Any = None

    def __post_init__(self):
        lin = _as_vector(self.lin)
        n = lin.shape[0]
        object.__setattr__(self, "const", float(self.const))
        object.__setattr__(self, "lin", lin)
        if self.quad is not None:
            Q = np.asarray(self.quad, dtype=float).reshape(n, n)
            object.__setattr__(self, "quad", 0.5 * (Q + Q.T))
        if self.rows is None:
            object.__setattr__(self, "rows", np.zeros((0, n)))
            object.__setattr__(self, "offsets", np.zeros(0))
            object.__setattr__(self, "coefs", np.zeros(0))
        else:
            rows = np.asarray(self.rows, dtype=float).reshape(-1, n)
            offsets = np.asarray(self.offsets, dtype=float).reshape(rows.shape[0])
            coefs = (np.ones(rows.shape[0]) if self.coefs is None
                     else np.asarray(self.coefs, dtype=float).reshape(rows.shape[0]))
            if np.any(coefs < 0):
                raise ValueError("log coefficients must be nonnegative for convexity")
            object.__setattr__(self, "rows", rows)
            object.__setattr__(self, "offsets", offsets)
            object.__setattr__(self, "coefs", coefs)

    @property
    def dimension(self) -> int:
        return self.lin.shape[0]

    def _args(self, x):
        u = self.rows @ x + self.offsets
        if np.any(u <= 0) or not np.all(np.isfinite(u)):
            raise FloatingPointError("log argument is not positive")
        return u

    def evaluate(self, x) -> float:
        x = _as_vector(x, self.dimension)
        v = self.const + self.lin @ x
        if self.quad is not None:
            v += 0.5 * x @ self.quad @ x
        if self.rows.shape[0]:
            v -= self.coefs @ np.log(self._args(x))
        return float(v)

    def gradient(self, x) -> np.ndarray:
        x = _as_vector(x, self.dimension)
        g = self.lin.copy()
        if self.quad is not None:
            g += self.quad @ x
        if self.rows.shape[0]:
            g -= self.rows.T @ (self.coefs / self._args(x))
        return g

    def hessian(self, x) -> np.ndarray:
        x = _as_vector(x, self.dimension)
        H = np.zeros((self.dimension, self.dimension)) if self.quad is None else self.quad.copy()
        if self.rows.shape[0]:
            u = self._args(x)
            H += (self.rows * (self.coefs / u**2)[:, None]).T @ self.rows
        return H


def quadratic(center, curvature=2.0, const: float = 0.0, **meta) -> LogQuadratic:
    """``const + (curvature/2) * ||x - center||^2`` (default gives ``(x-c)^2``)."""
    c = _as_vector(center)
    n = c.shape[0]
    Q = np.eye(n) * curvature if np.ndim(curvature) == 0 else np.asarray(curvature, dtype=float)
    return LogQuadratic(const + 0.5 * c @ Q @ c, -Q @ c, Q, **meta)


def affine(lin, const: float = 0.0, **meta) -> LogQuadratic:
    return LogQuadratic(const, lin, **meta)


@dataclass(frozen=True, eq=False)
class CallableComponent(ConvexComponent):
    """Component backed by user callables; the caller vouches for convexity."""

    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    anchor: Optional[np.ndarray] = None
    sample_id: Any = None

    def evaluate(self, x) -> float:
        return float(self.fun(_as_vector(x)))

    def gradient(self, x) -> np.ndarray:
        return _as_vector(self.grad(_as_vector(x)))

    def hessian(self, x) -> np.ndarray:
        if self.hess is None:
            return super().hessian(x)
        return np.asarray(self.hess(_as_vector(x)), dtype=float)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyConfig:
    rho: float = 0.5
    rho_growth: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"penalty rho must be positive, got {self.rho}")
        if not self.rho_growth >= 1:
            raise ValueError(f"rho_growth must be >= 1, got {self.rho_growth}")


SurrogateBuilder = Callable[[int, np.ndarray, Any], ConvexComponent]
BlockSurrogateBuilder = Callable[[int, int, np.ndarray, Any], ConvexComponent]


@dataclass(frozen=True, eq=False)
class StochasticProblem:
    """``min E[g_0(x, xi)]  s.t.  E[g_i(x, xi)] <= 0, i = 1..m,  x in X``.

    sampler(rng) -> sample
        Draws one realization of the random state.
    sample_value(i, x, sample), sample_grad(i, x, sample)
        The per-sample functions ``g_i`` and their gradients in ``x``.
    surrogate(i, anchor, sample) -> ConvexComponent
        Convex approximation of ``g_i(., sample)`` tangent at ``anchor``.
    blocks, block_surrogate(k, i, anchor, sample)
        Optional block-decoupled form: constraint ``i = 1..m_k`` of block k
        depends on ``x_k`` only; ``i = 0`` is the block objective surrogate.
        Components live on block coordinates while ``anchor`` is the full
        vector.  The flat constraint order is block-major.
    """

    dimension: int
    constraint_count: int
    sampler: Callable[[np.random.Generator], Any]
    sample_value: Callable[[int, np.ndarray, Any], float]
    sample_grad: Callable[[int, np.ndarray, Any], np.ndarray]
    surrogate: Optional[SurrogateBuilder]
    feasible_set: FeasibleSet
    blocks: Optional[BlockStructure] = None
    block_surrogate: Optional[BlockSurrogateBuilder] = None
    name: str = "problem"
    initial_point: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.feasible_set.dimension != self.dimension:
            raise ValueError("feasible set dimension does not match the problem")
        if self.blocks is not None:
            if self.blocks.dimension != self.dimension:
                raise ValueError("block structure does not cover the problem dimension")
            if sum(self.blocks.constraint_counts) != self.constraint_count:
                raise ValueError("block constraint counts must add up to the constraint count")
            if self.block_surrogate is None:
                raise ValueError("a block structure needs a block surrogate builder")
            if not isinstance(self.feasible_set, Box):
                raise ValueError("block problems need a product set; only boxes are supported")

    def start(self) -> np.ndarray:
        if self.initial_point is None:
            return self.feasible_set.project(np.zeros(self.dimension))
        return self.feasible_set.project(self.initial_point)


@dataclass(frozen=True, eq=False)
class PenalizedProblem:
    """Slack-penalized view of a problem; slacks are implicit."""

    problem: StochasticProblem
    rho: float
    slack_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "slack_count", self.problem.constraint_count)

    def objective(self, f0: float, s) -> float:
        s = np.asarray(s, dtype=float).reshape(self.slack_count)
        return float(f0 + self.rho * s.sum())

    def optimal_slacks(self, f_values) -> np.ndarray:
        return np.maximum(0.0, np.asarray(f_values, dtype=float).reshape(self.slack_count))

    def sample_objective(self, x, sample) -> float:
        """``g_0(x, xi) + rho * sum_i max(0, g_i(x, xi))``."""
        p = self.problem
        f = [p.sample_value(i, x, sample) for i in range(1, p.constraint_count + 1)]
        return self.objective(p.sample_value(0, x, sample), self.optimal_slacks(f))


def penalize(problem: StochasticProblem, cfg: PenaltyConfig) -> PenalizedProblem:
    if not cfg.rho > 0:
        raise ValueError("rho must be positive")
    return PenalizedProblem(problem, cfg.rho)


def mean_component(components: Sequence[ConvexComponent]) -> ConvexComponent:
    """Equal-weight average of components (a minibatch surrogate)."""
    comps = list(components)
    if len(comps) == 1:
        return comps[0]
    b = len(comps)
    if all(isinstance(c, LogQuadratic) for c in comps):
        n = comps[0].dimension
        quads = [c.quad for c in comps if c.quad is not None]
        return LogQuadratic(
            sum(c.const for c in comps) / b,
            sum(c.lin for c in comps) / b,
            None if not quads else sum(quads) / b,
            rows=np.vstack([c.rows for c in comps]).reshape(-1, n),
            offsets=np.concatenate([c.offsets for c in comps]),
            coefs=np.concatenate([c.coefs for c in comps]) / b,
            anchor=comps[0].anchor, sample_id=tuple(c.sample_id for c in comps),
        )
    return CallableComponent(
        lambda x: sum(c.evaluate(x) for c in comps) / b,
        lambda x: sum(c.gradient(x) for c in comps) / b,
        lambda x: sum(c.hessian(x) for c in comps) / b,
        anchor=comps[0].anchor,
    )
