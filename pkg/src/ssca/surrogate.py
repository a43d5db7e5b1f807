"""Recursively averaged surrogate functions.

The surrogate of an expectation ``f_i`` after t samples is

    fbar^t(x) = (1 - omega^t) fbar^{t-1}(x) + omega^t ghat(x, x^{t-1}, xi^t),

with ``fbar^0 = 0``.  It is stored as a list of weighted convex components.
Components of :class:`~ssca.core.LogQuadratic` form are additionally packed
into arrays so a state holding thousands of them is evaluated with a few
vectorized operations; any other component is evaluated one by one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConvexComponent, LogQuadratic, _as_vector


@dataclass(frozen=True)
class StepsizeSchedule:
    """Power law ``scale * (t + offset) ** -exponent`` for ``t >= 1``.

    Exponents in (0.5, 1] give a positive, vanishing, non-summable and
    square-summable sequence.
    """

    exponent: float
    scale: float = 1.0
    offset: int = 0
    kind: str = "power_law"

    def __post_init__(self):
        if self.kind != "power_law":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.5 < self.exponent <= 1.0:
            raise ValueError(f"exponent must lie in (0.5, 1], got {self.exponent}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")
        if self.scale * (1 + self.offset) ** -self.exponent > 1.0:
            raise ValueError("first step exceeds 1; increase offset or reduce scale")

    def __call__(self, t: int) -> float:
        return schedule_value(self, t)


def schedule_value(s: StepsizeSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"stepsizes are indexed from t = 1, got {t}")
    return s.scale * float(t + s.offset) ** -s.exponent


DEFAULT_OMEGA = StepsizeSchedule(0.6)
DEFAULT_GAMMA = StepsizeSchedule(0.9)


def _packable(c: ConvexComponent) -> bool:
    return isinstance(c, LogQuadratic)


class _Store:
    """Append-only packed component data shared by successive states.

    A state owns the index window ``[c0, c1)`` of components and ``[r0, r1)``
    of log rows.  Data inside a window is never modified, so appending to the
    newest state can write in place while older states stay valid.
    """

    def __init__(self, n: int, cap: int = 64, rcap: int = 256):
        self.n = n
        self.size = 0
        self.rsize = 0
        self.comps: list = []
        self.consts = np.empty(cap)
        self.lins = np.empty((cap, n))
        self.quads = None
        self.row_start = np.empty(cap + 1, dtype=np.intp)
        self.row_start[0] = 0
        self.rows = np.empty((rcap, n))
        self.offsets = np.empty(rcap)
        self.coefs = np.empty(rcap)
        self.owner = np.empty(rcap, dtype=np.intp)

    def _grow(self, need: int, rneed: int):
        cap = self.consts.shape[0]
        if need > cap:
            new = max(need, 2 * cap)
            for name in ("consts", "lins", "quads"):
                a = getattr(self, name)
                if a is not None:
                    b = np.empty((new,) + a.shape[1:], dtype=a.dtype)
                    b[: self.size] = a[: self.size]
                    setattr(self, name, b)
            rs = np.empty(new + 1, dtype=np.intp)
            rs[: self.size + 1] = self.row_start[: self.size + 1]
            self.row_start = rs
        rcap = self.offsets.shape[0]
        if rneed > rcap:
            new = max(rneed, 2 * rcap)
            for name in ("rows", "offsets", "coefs", "owner"):
                a = getattr(self, name)
                b = np.empty((new,) + a.shape[1:], dtype=a.dtype)
                b[: self.rsize] = a[: self.rsize]
                setattr(self, name, b)

    def append(self, c: ConvexComponent):
        n, j = self.n, self.size
        packed = _packable(c)
        if packed and c.dimension != n:
            raise ValueError(f"component dimension {c.dimension} != surrogate dimension {n}")
        r = c.rows.shape[0] if packed else 0
        self._grow(j + 1, self.rsize + r)
        if packed:
            self.consts[j] = c.const
            self.lins[j] = c.lin
            if c.quad is not None and self.quads is None:
                self.quads = np.zeros((self.consts.shape[0], n, n))
            if self.quads is not None:
                self.quads[j] = 0.0 if c.quad is None else c.quad
            if r:
                k = self.rsize
                self.rows[k: k + r] = c.rows
                self.offsets[k: k + r] = c.offsets
                self.coefs[k: k + r] = c.coefs
                self.owner[k: k + r] = j
        else:
            self.consts[j] = 0.0
            self.lins[j] = 0.0
            if self.quads is not None:
                self.quads[j] = 0.0
        self.comps.append(c)
        self.size = j + 1
        self.rsize += r
        self.row_start[j + 1] = self.rsize


class SurrogateState:
    """Immutable weighted sum of convex components.

    ``pruned_mass`` is the weight discarded by the most recent prune and
    ``total_pruned_mass`` accumulates it over the state's history.
    """

    def __init__(self, dimension: int, prune_threshold: float = 1e-8, max_components: int = 10_000):
        if prune_threshold < 0:
            raise ValueError("prune_threshold must be nonnegative")
        if max_components < 1:
            raise ValueError("max_components must be positive")
        self.dimension = int(dimension)
        self.prune_threshold = float(prune_threshold)
        self.max_components = int(max_components)
        self.weights = np.zeros(0)
        self.t = 0
        self.pruned_mass = 0.0
        self.total_pruned_mass = 0.0
        self._store = _Store(self.dimension)
        self._c0 = self._c1 = 0
        self._n_generic = 0
        self._cache = {}

    def _derive(self, **changes) -> "SurrogateState":
        new = object.__new__(SurrogateState)
        new.__dict__.update(self.__dict__)
        new.__dict__.update(changes)
        new._cache = {}
        return new

    # -- structure -----------------------------------------------------------

    def __len__(self) -> int:
        return self._c1 - self._c0

    def __repr__(self) -> str:
        return f"SurrogateState(dimension={self.dimension}, components={len(self)}, t={self.t}, mass={self.mass:.6g})"

    @property
    def components(self) -> tuple:
        return tuple(self._store.comps[self._c0: self._c1])

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def items(self) -> list:
        return list(zip(self.weights.tolist(), self.components))

    def _cached(self, key, fn):
        c = self._cache
        if key not in c:
            c[key] = fn()
        return c[key]

    @property
    def _row_slice(self) -> slice:
        rs = self._store.row_start
        return slice(int(rs[self._c0]), int(rs[self._c1]))

    @property
    def _rows(self) -> np.ndarray:
        return self._store.rows[self._row_slice]

    @property
    def _offsets(self) -> np.ndarray:
        return self._store.offsets[self._row_slice]

    @property
    def _generic(self) -> tuple:
        if self._n_generic == 0:
            return ()
        return tuple(j for j, c in enumerate(self.components) if not _packable(c))

    def _aggregates(self):
        def build():
            st, w = self._store, self.weights
            sl = slice(self._c0, self._c1)
            quad = None if st.quads is None else np.tensordot(w, st.quads[sl], axes=1)
            rsl = self._row_slice
            row_w = w[st.owner[rsl] - self._c0] * st.coefs[rsl]
            return float(w @ st.consts[sl]), w @ st.lins[sl], quad, row_w
        return self._cached("agg", build)

    # -- evaluation ----------------------------------------------------------

    def _log_args(self, x):
        u = self._rows @ x + self._offsets
        if not u.min() > 0:
            raise FloatingPointError("surrogate log argument is not positive")
        return u

    def _vec(self, x):
        if type(x) is np.ndarray and x.shape == (self.dimension,) and x.dtype == float:
            return x
        return _as_vector(x, self.dimension)

    def value(self, x) -> float:
        x = self._vec(x)
        const, lin, quad, row_w = self._aggregates()
        v = const + lin @ x
        if quad is not None:
            v += 0.5 * x @ quad @ x
        if row_w.shape[0]:
            v -= row_w @ np.log(self._log_args(x))
        comps = self._store.comps
        for j in self._generic:
            v += self.weights[j] * comps[self._c0 + j].evaluate(x)
        return float(v)

    def gradient(self, x) -> np.ndarray:
        return self.derivatives(x, order=1)[1]

    def derivatives(self, x, order: int = 2):
        """Return ``(value, gradient, hessian)`` (hessian only if ``order == 2``)."""
        x = self._vec(x)
        const, lin, quad, row_w = self._aggregates()
        v = const + lin @ x
        g = lin.copy()
        H = np.zeros((self.dimension, self.dimension)) if order >= 2 else None
        if quad is not None:
            Qx = quad @ x
            v += 0.5 * x @ Qx
            g += Qx
            if H is not None:
                H += quad
        if row_w.shape[0]:
            rows = self._rows
            u = self._log_args(x)
            v -= row_w @ np.log(u)
            r = row_w / u
            g -= rows.T @ r
            if H is not None:
                H += (rows * (r / u)[:, None]).T @ rows
        comps = self._store.comps
        for j in self._generic:
            w, c = self.weights[j], comps[self._c0 + j]
            v += w * c.evaluate(x)
            g += w * c.gradient(x)
            if H is not None:
                H += w * c.hessian(x)
        return (float(v), g, H) if order >= 2 else (float(v), g)

    def __call__(self, x) -> float:
        return self.value(x)

    # -- updates ---------------------------------------------------------------

    def add(self, component: ConvexComponent, omega: float) -> "SurrogateState":
        """Scale existing weights by ``1 - omega`` and append ``component`` with
        weight ``omega``; prunes the result."""
        if not 0.0 < omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {omega}")
        store, c0 = self._store, self._c0
        if store.size != self._c1:
            store, c0 = self._compact(np.arange(len(self))), 0
        store.append(component)
        w = np.empty(len(self) + 1)
        np.multiply(self.weights, 1.0 - omega, out=w[:-1])
        w[-1] = omega
        new = self._derive(weights=w, t=self.t + 1, pruned_mass=0.0, _store=store, _c0=c0, _c1=store.size,
                           _n_generic=self._n_generic + (not _packable(component)))
        return prune(new)

    def _compact(self, idx: np.ndarray) -> _Store:
        old = self._store
        store = _Store(self.dimension, cap=max(64, 2 * idx.size))
        for j in idx:
            store.append(old.comps[self._c0 + j])
        return store

    def _keep(self, keep: np.ndarray, pruned: float) -> "SurrogateState":
        idx = np.flatnonzero(keep)
        n_generic = 0 if self._n_generic == 0 else sum(not _packable(self._store.comps[self._c0 + j]) for j in idx)
        if idx.size and idx[-1] - idx[0] + 1 == idx.size:
            store, c0, c1 = self._store, self._c0 + int(idx[0]), self._c0 + int(idx[-1]) + 1
        else:
            store = self._compact(idx)
            c0, c1 = 0, store.size
        return self._derive(
            weights=self.weights[idx], _store=store, _c0=c0, _c1=c1, pruned_mass=pruned,
            total_pruned_mass=self.total_pruned_mass + pruned, _n_generic=n_generic,
        )


def empty_state(dimension: int, prune_threshold: float = 1e-8, max_components: int = 10_000) -> SurrogateState:
    return SurrogateState(dimension, prune_threshold=prune_threshold, max_components=max_components)


def prune(state: SurrogateState) -> SurrogateState:
    """Drop components lighter than the threshold (and zero-weight ones), then
    the smallest weights beyond the component cap.  Surviving weights are not
    renormalized."""
    w = state.weights
    keep = (w > 0) & (w >= state.prune_threshold)
    if keep.all():
        if len(w) <= state.max_components:
            return state if state.pruned_mass == 0.0 else state._derive(pruned_mass=0.0)
    elif keep.sum() <= state.max_components:
        return state._keep(keep, float(w[~keep].sum()))
    if keep.sum() > state.max_components:
        order = np.argsort(-np.where(keep, w, -np.inf), kind="stable")
        keep = np.zeros_like(keep)
        keep[order[: state.max_components]] = True
    return state._keep(keep, float(w[~keep].sum()))


def surrogate_update(state: SurrogateState, anchor, sample, omega_t: float,
                     builder: Callable[[np.ndarray, object], ConvexComponent]) -> SurrogateState:
    if not 0.0 < omega_t <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega_t}")
    return state.add(builder(np.asarray(anchor, dtype=float), sample), omega_t)


def surrogate_eval(state: SurrogateState, x) -> float:
    return state.value(x)


def surrogate_grad(state: SurrogateState, x) -> np.ndarray:
    return state.gradient(x)
