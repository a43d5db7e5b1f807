"""Convex subproblem solver.

Each outer iteration minimizes the penalized surrogate problem

    min_x  fbar_0(x) + rho * sum_i max(0, fbar_i(x)) + tau/2 ||x - center||^2
    s.t.   x in X

which is the slack formulation with the slacks eliminated: at an optimum
``s_i = max(0, fbar_i(x))``.  Two methods are provided:

* ``step_rule="backtracking"``: the hinge is replaced by a Huber smoothing of
  width ``smoothing_mu`` (driven down by continuation) and the smooth problem
  is solved by projected Newton with an Armijo search along the projection
  arc.  Projected gradient is used for non-box sets.
* ``step_rule="diminishing"``: projected subgradient with ``1/sqrt(k)``
  steps and best-iterate tracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .core import Box, FeasibleSet, _as_vector
from .surrogate import SurrogateState


class SubproblemError(FloatingPointError):
    """A surrogate produced a non-finite value; ``index`` is 0 for the
    objective and ``i`` for constraint ``i``."""

    def __init__(self, index: int, message: str = ""):
        self.index = index
        what = "objective" if index == 0 else f"constraint {index}"
        super().__init__(f"non-finite surrogate value in {what}" + (f": {message}" if message else ""))


@dataclass(frozen=True)
class InnerSolverConfig:
    max_iters: int = 2000
    tol: float = 1e-7
    smoothing_mu: float = 1e-7
    step_rule: str = "backtracking"
    prox_tau: float = 0.0
    newton: bool = True
    step_scale: float = 1.0
    mu_start: float = 1e-2

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.smoothing_mu < 0:
            raise ValueError("smoothing_mu must be nonnegative")
        if self.step_rule not in ("diminishing", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.prox_tau < 0:
            raise ValueError("prox_tau must be nonnegative")


@dataclass(frozen=True)
class SubproblemSolution:
    x_bar: np.ndarray
    s: np.ndarray
    residual: float
    inner_iters: int
    objective: float
    objective_value: float  # fbar_0 at x_bar, without penalty or proximal term


def recover_slacks(cons: Sequence[SurrogateState], x) -> np.ndarray:
    return np.array([max(0.0, c.value(x)) for c in cons], dtype=float)


def _huber(u: np.ndarray, mu: float):
    """Smoothed ``max(0, u)``: value, first and second derivative."""
    if mu == 0.0:
        pos = u > 0
        return np.where(pos, u, 0.0), pos.astype(float), np.zeros_like(u)
    v = np.where(u <= 0, 0.0, np.where(u < mu, u * u / (2 * mu), u - mu / 2))
    d1 = np.clip(u / mu, 0.0, 1.0)
    d2 = np.where((u > 0) & (u < mu), 1.0 / mu, 0.0)
    return v, d1, d2


class _Objective:
    """Penalized surrogate objective with guarded evaluation."""

    def __init__(self, obj, cons, rho, center, tau):
        self.states = [obj, *cons]
        self.rho = rho
        self.center = center
        self.tau = tau
        self.n = obj.dimension
        self.evals = 0

    def _values(self, x):
        out = np.empty(len(self.states))
        for i, st in enumerate(self.states):
            try:
                out[i] = st.value(x)
            except FloatingPointError as exc:
                raise SubproblemError(i, str(exc)) from None
            if not np.isfinite(out[i]):
                raise SubproblemError(i)
        return out

    def prox(self, x):
        d = x - self.center
        return 0.5 * self.tau * (d @ d)

    def value(self, x, mu: float = 0.0) -> float:
        self.evals += 1
        f = self._values(x)
        return float(f[0] + self.rho * _huber(f[1:], mu)[0].sum() + self.prox(x))

    def exact_parts(self, x):
        f = self._values(x)
        return float(f[0] + self.rho * np.maximum(0.0, f[1:]).sum() + self.prox(x)), f

    def pieces(self, x, order: int = 2):
        """Per-surrogate values ``f``, gradients ``G`` (rows) and, for
        ``order == 2``, Hessians."""
        self.evals += 1
        vals, grads, hesses = [], [], []
        for i, st in enumerate(self.states):
            try:
                out = st.derivatives(x, order=order)
            except FloatingPointError as exc:
                raise SubproblemError(i, str(exc)) from None
            if not np.isfinite(out[0]) or not np.all(np.isfinite(out[1])):
                raise SubproblemError(i)
            vals.append(out[0])
            grads.append(out[1])
            if order >= 2:
                hesses.append(out[2])
        return np.array(vals), np.array(grads).reshape(len(vals), self.n), hesses

    def derivatives(self, x, mu: float, order: int = 2):
        f, G, hesses = self.pieces(x, order)
        hv, h1, h2 = _huber(f[1:], mu)
        value = f[0] + self.rho * hv.sum() + self.prox(x)
        grad = G[0] + self.rho * (h1 @ G[1:]) + self.tau * (x - self.center)
        if order < 2:
            return float(value), grad, f, G
        H = hesses[0] + self.tau * np.eye(self.n)
        for i in range(1, len(f)):
            if h1[i - 1] > 0:
                H = H + self.rho * h1[i - 1] * hesses[i]
            if h2[i - 1] > 0:
                H = H + self.rho * h2[i - 1] * np.outer(G[i], G[i])
        return float(value), grad, H, f, G


def _gap(fs: FeasibleSet, x, g) -> float:
    return float(np.max(np.abs(fs.project(x - g) - x), initial=0.0))


def _subgradient_gap(fs: FeasibleSet, x, f, G, rho, tau, center, kink_tol) -> float:
    """Fixed-point gap for the nonsmooth objective using the subgradient of
    least norm among the constraints sitting at their kink."""
    base = G[0] + tau * (x - center)
    u = f[1:]
    base = base + rho * (u > kink_tol) @ G[1:]
    kink = np.flatnonzero(np.abs(u) <= kink_tol)
    if kink.size:
        if isinstance(fs, Box):
            free = (x > fs.lower) & (x < fs.upper)
        else:
            free = np.ones_like(x, dtype=bool)
        if free.any():
            A = rho * G[1:][kink][:, free].T
            res = lsq_linear(A, -base[free], bounds=(0.0, 1.0))
            theta = res.x
        else:
            theta = np.full(kink.size, 0.5)
        base = base + rho * theta @ G[1:][kink]
    return _gap(fs, x, base)


def solve_subproblem(obj: SurrogateState, cons: Sequence[SurrogateState], rho: float,
                     feasible_set: FeasibleSet, warm, cfg: InnerSolverConfig = InnerSolverConfig(),
                     start=None) -> SubproblemSolution:
    """Minimize ``fbar_0 + rho * sum max(0, fbar_i)`` over the set.

    ``warm`` is the proximal center (and the reference for the monotone
    safeguard); ``start`` optionally overrides the initial point.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    n = obj.dimension
    if any(c.dimension != n for c in cons):
        raise ValueError("all surrogates must share the objective's dimension")
    fs = feasible_set
    center = fs.project(_as_vector(warm, n))
    x0 = center if start is None else fs.project(_as_vector(start, n))
    F = _Objective(obj, list(cons), float(rho), center, cfg.prox_tau)

    smoothed = cfg.step_rule == "backtracking" and cfg.smoothing_mu > 0
    if smoothed and n == 1 and len(cons) <= 1 and isinstance(fs, Box):
        x, iters = _scalar_solve(F, fs, x0)
        _, _, f, G = F.derivatives(x, 0.0, order=1)
        residual = _subgradient_gap(fs, x, f, G, F.rho, F.tau, center, 1e-9 * (1 + np.abs(f[1:]).max(initial=0)))
        return SubproblemSolution(
            x_bar=x, s=np.maximum(0.0, f[1:]), residual=residual, inner_iters=iters,
            objective=float(f[0] + F.rho * np.maximum(0.0, f[1:]).sum() + F.prox(x)), objective_value=float(f[0]),
        )
    if smoothed:
        x, iters, residual = _smoothed_descent(F, fs, x0, cfg)
    else:
        x, iters = _subgradient_descent(F, fs, x0, cfg)

    # monotone safeguard against both the initial point and the center
    best_x, best_v = x, F.exact_parts(x)[0]
    for cand in (x0, center):
        v = F.exact_parts(cand)[0]
        if v < best_v:
            best_x, best_v = cand, v
    if smoothed and best_x is x:
        pass
    elif smoothed:
        x = best_x
        _, g, _, _ = F.derivatives(x, cfg.smoothing_mu, order=1)
        residual = _gap(fs, x, g)
    else:
        x = best_x
        _, _, f, G = F.derivatives(x, 0.0, order=1)
        residual = _subgradient_gap(fs, x, f, G, F.rho, F.tau, center, 1e-9 * (1 + np.abs(f[1:]).max(initial=0)))
    objective, f = F.exact_parts(x)
    return SubproblemSolution(
        x_bar=x, s=np.maximum(0.0, f[1:]), residual=residual,
        inner_iters=iters, objective=objective, objective_value=float(f[0]),
    )


def solve_block_subproblem(k: int, obj_k: SurrogateState, cons_k: Sequence[SurrogateState], rho: float,
                           set_k: FeasibleSet, warm_k, cfg: InnerSolverConfig = InnerSolverConfig(),
                           start=None) -> SubproblemSolution:
    """Block-k subproblem; identical to :func:`solve_subproblem` on block
    coordinates.  Errors carry the block index in their message."""
    try:
        return solve_subproblem(obj_k, cons_k, rho, set_k, warm_k, cfg, start=start)
    except SubproblemError as exc:
        raise SubproblemError(exc.index, f"block {k}") from None


def _bracketed_newton(fun, lo, hi, x, tol=1e-13, ends_known=False, max_iter=200):
    """Root of a scalar function whose sign is nondecreasing on ``[lo, hi]``.

    ``fun(x)`` returns ``(h, dh)``.  Newton steps are kept inside the current
    sign bracket and replaced by bisection when they leave it.  Returns an
    endpoint when ``h`` has the same sign on the whole interval, along with
    the number of evaluations.
    """
    a, b = lo, hi
    seen_a = seen_b = ends_known
    x = min(max(x, lo), hi)
    for it in range(1, max_iter + 1):
        h, dh = fun(x)
        seen_a |= x == a
        seen_b |= x == b
        if h == 0.0:
            return x, it
        if h > 0:
            if x == a:
                return a, it
            hi = x
        else:
            if x == b:
                return b, it
            lo = x
        xn = x - h / dh if dh > 0 else np.nan
        if not lo < xn < hi:
            if xn <= lo and lo == a and not seen_a:
                xn = a
            elif xn >= hi and hi == b and not seen_b:
                xn = b
            else:
                xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * (1.0 + abs(x)) or hi - lo <= tol * (1.0 + abs(x)):
            return xn, it
        x = xn
    return x, max_iter


def _scalar_solve(F: _Objective, fs: Box, x0):
    """Exact solve for one coordinate and at most one constraint.

    With ``phi_A = fbar_0 + prox`` and ``phi_B = phi_A + rho * fbar_1`` the
    objective is ``max(phi_A, phi_B)``.  Its minimizer is the minimizer of
    ``phi_A`` if the constraint holds there, else that of ``phi_B`` if the
    constraint is violated there, else the root of ``fbar_1`` between them.
    """
    a, b = float(fs.lower[0]), float(fs.upper[0])
    start = float(x0[0])
    has_con = len(F.states) > 1
    evals = 0

    def argmin(weight, guess):
        states = F.states if weight else F.states[:1]

        def fun(t):
            pt = np.array([t])
            d1 = F.tau * (t - F.center[0])
            d2 = F.tau
            for i, st in enumerate(states):
                try:
                    _, g, h = st.derivatives(pt)
                except FloatingPointError as exc:
                    raise SubproblemError(i, str(exc)) from None
                w = 1.0 if i == 0 else weight
                d1 += w * g[0]
                d2 += w * h[0, 0]
            if not np.isfinite(d1):
                raise SubproblemError(0)
            return d1, d2
        return _bracketed_newton(fun, a, b, guess)

    x_a, n = argmin(0.0, start)
    evals += n
    if not has_con:
        return np.array([x_a]), evals
    f_a = F._values(np.array([x_a]))[1]
    if f_a <= 0:
        return np.array([x_a]), evals
    x_b, n = argmin(F.rho, x_a)
    evals += n
    f_b = F._values(np.array([x_b]))[1]
    if f_b >= 0:
        return np.array([x_b]), evals
    sign = 1.0 if x_b < x_a else -1.0

    def con(t):
        f, G, _ = F.pieces(np.array([t]), order=1)
        return sign * f[1], sign * G[1, 0]

    lo, hi = min(x_a, x_b), max(x_a, x_b)
    root, n = _bracketed_newton(con, lo, hi, 0.5 * (lo + hi), ends_known=True)
    return np.array([root]), evals + n


def _smoothed_descent(F: _Objective, fs: FeasibleSet, x, cfg: InnerSolverConfig):
    """Continuation over the Huber width; after each stage an exact
    active-set polish is attempted.  Returns ``(x, iterations, residual)``."""
    box = isinstance(fs, Box)
    use_newton = cfg.newton and box
    mus = []
    mu = max(cfg.mu_start, cfg.smoothing_mu)
    while mu > cfg.smoothing_mu:
        mus.append(mu)
        mu *= 1e-2
    mus.append(cfg.smoothing_mu)
    iters = 0
    step0 = 1.0
    for stage, mu in enumerate(mus):
        last = stage == len(mus) - 1
        tol = cfg.tol if last else max(cfg.tol, 1e-3 * mu)
        while iters < cfg.max_iters:
            if use_newton:
                v, g, H, _, _ = F.derivatives(x, mu, order=2)
            else:
                v, g, _, _ = F.derivatives(x, mu, order=1)
            if _gap(fs, x, g) <= tol:
                break
            iters += 1
            if use_newton:
                d = _projected_newton_direction(fs, x, g, H)
                alpha = 1.0
            else:
                d = -g
                alpha = step0
            x_new, ok = _armijo(F, fs, x, v, g, d, alpha, mu)
            if not ok and use_newton:
                x_new, ok = _armijo(F, fs, x, v, g, -g, 1.0, mu)
            if not ok:
                break
            if not use_newton:
                step0 = min(1e6, 2.0 * np.max(np.abs(x_new - x)) / max(np.max(np.abs(d)), 1e-300))
            x = x_new
        if use_newton:
            polished = _polish(F, fs, x, mu, cfg.tol)
            if polished is not None:
                x_p, n_p, residual = polished
                return x_p, iters + n_p, residual
    _, g, _, _ = F.derivatives(x, cfg.smoothing_mu, order=1)
    return x, iters, _gap(fs, x, g)


def _polish(F: _Objective, fs: Box, x, mu, tol, max_steps=30):
    """Exact solve for the active set suggested by a smoothed solution.

    Constraints inside the Huber zone are treated as equalities with
    multipliers in ``[0, rho]``, those beyond it as fully penalized, and
    coordinates on the boundary stay fixed.  Newton's method on the resulting
    KKT system is accepted only if the outcome is consistent with that
    guess; otherwise ``None`` is returned.
    """
    rho = F.rho
    f = F._values(x)
    u = f[1:]
    kink = np.flatnonzero((u > 0) & (u < mu))
    pos = np.flatnonzero(u >= mu)
    lam = rho * u[kink] / mu
    at_lo = x <= fs.lower
    at_hi = x >= fs.upper
    free = ~(at_lo | at_hi)
    nf, na = int(free.sum()), kink.size
    x = x.copy()
    steps = 0
    for steps in range(1, max_steps + 1):
        f, G, Hs = F.pieces(x)
        gL = G[0] + F.tau * (x - F.center) + rho * G[1:][pos].sum(axis=0) + lam @ G[1:][kink]
        HL = Hs[0] + F.tau * np.eye(F.n)
        for i in pos:
            HL = HL + rho * Hs[i + 1]
        for j, i in enumerate(kink):
            HL = HL + lam[j] * Hs[i + 1]
        fa = f[1:][kink]
        err = max(np.max(np.abs(gL[free]), initial=0.0), np.max(np.abs(fa), initial=0.0))
        if err <= 0.1 * tol and np.max(np.abs(fa), initial=0.0) <= 1e-12 * (1.0 + np.abs(f).max()):
            break
        J = G[1:][kink][:, free]
        if na > nf:
            return None
        KKT = np.zeros((nf + na, nf + na))
        KKT[:nf, :nf] = HL[np.ix_(free, free)]
        KKT[:nf, nf:] = J.T
        KKT[nf:, :nf] = J
        rhs = -np.concatenate([gL[free], fa])
        try:
            step = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        x[free] += step[:nf]
        lam = lam + step[nf:]
        if np.any(x[free] < fs.lower[free]) or np.any(x[free] > fs.upper[free]):
            return None
    else:
        return None
    # consistency of the active-set guess
    f, G, _ = F.pieces(x, order=1)
    u = f[1:]
    eps = 1e-9
    if np.any(lam < -eps) or np.any(lam > rho + eps):
        return None
    lam = np.clip(lam, 0.0, rho)
    inactive = np.setdiff1d(np.arange(u.size), np.concatenate([kink, pos]))
    if np.any(u[pos] <= 0) or np.any(u[inactive] > 0):
        return None
    g = G[0] + F.tau * (x - F.center) + rho * G[1:][pos].sum(axis=0) + lam @ G[1:][kink]
    if np.any(g[at_lo] < -tol) or np.any(g[at_hi] > tol):
        return None
    return x, steps, _gap(fs, x, g)


def _projected_newton_direction(fs: Box, x, g, H):
    eps = min(1e-8, _gap(fs, x, g))
    active = ((x <= fs.lower + eps) & (g > 0)) | ((x >= fs.upper - eps) & (g < 0))
    free = ~active
    d = np.zeros_like(x)
    if free.any():
        Hf = H[np.ix_(free, free)]
        scale = np.max(np.abs(np.diag(Hf)), initial=0.0)
        reg = 1e-12 * (1.0 + scale)
        try:
            d[free] = -np.linalg.solve(Hf + reg * np.eye(Hf.shape[0]), g[free])
        except np.linalg.LinAlgError:
            d[free] = -g[free]
        if g[free] @ d[free] >= 0:
            d[free] = -g[free]
    return d


def _armijo(F, fs, x, v, g, d, alpha, mu, sigma=1e-4, shrink=0.5, min_alpha=1e-10):
    # values within round-off of v count as no increase
    slack = 64 * np.finfo(float).eps * (1.0 + abs(v))
    while alpha >= min_alpha:
        x_new = fs.project(x + alpha * d)
        decrease = g @ (x_new - x)
        if decrease >= 0 and np.array_equal(x_new, x):
            return x, False
        if F.value(x_new, mu) <= v + sigma * min(decrease, 0.0) + slack:
            return x_new, True
        alpha *= shrink
    return x, False


def _subgradient_descent(F: _Objective, fs: FeasibleSet, x, cfg: InnerSolverConfig):
    mu = cfg.smoothing_mu
    best_x, best_v = x, F.value(x, mu)
    iters = 0
    for k in range(1, cfg.max_iters + 1):
        _, g, f, G = F.derivatives(x, mu, order=1)
        gnorm = np.max(np.abs(g))
        if gnorm == 0 or _subgradient_gap(fs, x, f, G, F.rho, F.tau, F.center, 1e-12) <= cfg.tol:
            break
        iters = k
        x = fs.project(x - cfg.step_scale / np.sqrt(k) * g / max(1.0, gnorm))
        v = F.value(x, mu)
        if v < best_v:
            best_x, best_v = x, v
    return best_x, iters
