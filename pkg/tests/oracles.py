"""Independent reference computations shared by the test modules."""

import numpy as np
from scipy import integrate, special, stats

from ssca.core import Box, affine, quadratic
from ssca.surrogate import empty_state


def state(*components, n=None):
    s = empty_state(components[0].dimension if n is None else n)
    for t, c in enumerate(components, start=1):
        s = s.add(c, 1.0 / t)
    return s


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(0, 3))
    lo = rng.uniform(-2, 0, n)
    hi = lo + rng.uniform(0.5, 3, n)
    obj = quadratic(rng.uniform(-3, 3, n), curvature=np.diag(rng.uniform(0.5, 3, n)))
    cons = [quadratic(rng.uniform(-2, 2, n), curvature=rng.uniform(0, 2), const=rng.uniform(-1.5, 1))
            if rng.random() < 0.5 else affine(rng.normal(size=n), rng.normal()) for _ in range(m)]
    rho = float(rng.uniform(0.2, 5))
    return n, m, Box(lo, hi), obj, cons, rho


def _batch(c, X):
    v = c.const + X @ c.lin
    if c.quad is not None:
        v += 0.5 * np.einsum("ij,jk,ik->i", X, c.quad, X)
    return v


def slack_grid_oracle(n, box, obj, cons, rho, slack_step=1e-7):
    """Grid search over (x, s) for ``min f0(x) + rho * sum s_i`` subject to
    ``f_i(x) <= s_i, s_i >= 0``.  For each grid x the smallest admissible
    grid slack is used.  A coarse x grid is refined three times around its
    best point (valid because the problem is convex)."""
    lo, hi = box.lower.copy(), box.upper.copy()
    pts = {1: 20001, 2: 801, 3: 101}[n]
    best = None
    for level in range(4):
        axes = [np.linspace(lo[j], hi[j], pts) for j in range(n)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
        total = _batch(obj, X)
        for c in cons:
            s = np.ceil(np.maximum(0.0, _batch(c, X)) / slack_step) * slack_step
            total = total + rho * s
        j = int(np.argmin(total))
        if best is None or total[j] < best[1]:
            best = (X[j], total[j])
        step = (hi - lo) / (pts - 1)
        lo = np.maximum(box.lower, best[0] - 2 * step)
        hi = np.minimum(box.upper, best[0] + 2 * step)
        pts = 41
    return best


def single_link_rate(p, v=1.0, noise=1.0):
    """``E[log(1 + p G / noise)]`` for ``G ~ Exp(mean v)``."""
    a = noise / (p * v)
    return float(np.exp(a) * special.exp1(a))


def interfered_rate(p=100.0, K=5, v_d=1.0, v_c=0.1, noise=1.0):
    """Exact ergodic rate when all K transmitters use power p: average the
    single-link closed form over the Gamma(K-1) interference."""
    theta = p * v_c
    dens = stats.gamma(K - 1, scale=theta).pdf
    val, _ = integrate.quad(lambda y: single_link_rate(p, v_d, noise + y) * dens(y), 0, np.inf, limit=200)
    return val
