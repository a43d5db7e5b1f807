"""K-pair interference channel: ergodic sum-rate power control.

Gains are stored as ``gains_sq[k, j] = |H_kj|^2``, the power gain from
transmitter j into receiver k, so pair k's instantaneous rate is

    log(1 + G[k,k] p_k / (sum_{j != k} G[k,j] p_j + noise_k))

in nats.  ``H_kj ~ CN(0, v_kj)`` makes ``G[k,j]`` exponential with mean
``v_kj`` (``gain_vars`` holds the variance directly).

Two problems are built on top:

* coupled:   max E[sum rate]  s.t.  E[rate_k] >= R_k,    0 <= p <= P
* decoupled: max E[sum rate]  s.t.  r_lb,k(p_k) >= R_k,  0 <= p <= P

where ``r_lb,k`` pins the interferers at full power, so constraint k only
involves ``p_k``.  Both are written as minimizations (negated sum rate,
constraints ``R_k - rate <= 0``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .core import Box, BlockStructure, LogQuadratic, StochasticProblem


@dataclass(frozen=True, eq=False)
class NetworkModel:
    K: int
    power_limits: np.ndarray
    noise_vars: np.ndarray
    rate_reqs: np.ndarray
    gain_vars: np.ndarray

    def __post_init__(self):
        K = int(self.K)
        if K < 1:
            raise ValueError("K must be positive")

        def vec(name, v, strict=True):
            a = np.broadcast_to(np.asarray(v, dtype=float), (K,)).copy()
            bad = (a <= 0) if strict else (a < 0)
            if bad.any() or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be {'positive' if strict else 'nonnegative'} and finite")
            a.setflags(write=False)
            return a

        object.__setattr__(self, "K", K)
        object.__setattr__(self, "power_limits", vec("power_limits", self.power_limits))
        object.__setattr__(self, "noise_vars", vec("noise_vars", self.noise_vars))
        object.__setattr__(self, "rate_reqs", vec("rate_reqs", self.rate_reqs, strict=False))
        V = np.asarray(self.gain_vars, dtype=float)
        if V.shape != (K, K):
            raise ValueError(f"gain_vars must be {K}x{K}")
        if np.any(V <= 0) or not np.all(np.isfinite(V)):
            raise ValueError("gain_vars must be positive and finite")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "gain_vars", V)

    @classmethod
    def symmetric(cls, K: int, power: float = 100.0, noise: float = 1.0, rate: float = 1.0,
                  direct_var: float = 1.0, cross_var: float = 0.1) -> "NetworkModel":
        V = np.full((K, K), cross_var)
        np.fill_diagonal(V, direct_var)
        return cls(K, power, noise, rate, V)

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True, eq=False)
class ChannelSample:
    gains_sq: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.gains_sq, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("gains_sq must be a square matrix")
        if np.any(G < 0):
            raise ValueError("squared gains must be nonnegative")
        G.setflags(write=False)
        object.__setattr__(self, "gains_sq", G)


def sample_channels(model: NetworkModel, rng: np.random.Generator) -> ChannelSample:
    return ChannelSample(rng.exponential(model.gain_vars))


def _gains(H) -> np.ndarray:
    return H.gains_sq if isinstance(H, ChannelSample) else np.asarray(H, dtype=float)


def _cross(G):
    Gc = np.array(G, dtype=float)
    Gc[..., np.arange(G.shape[-1]), np.arange(G.shape[-1])] = 0.0
    return Gc


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def instantaneous_rate(p, H, k: int, noise_var: float = 1.0) -> float:
    G = _gains(H)
    p = np.asarray(p, dtype=float)
    interference = G[k] @ p - G[k, k] * p[k] + noise_var
    return float(np.log1p(G[k, k] * p[k] / interference))


def instantaneous_rates(p, G, noise_vars) -> np.ndarray:
    """All pairs' rates; ``G`` may carry leading batch dimensions."""
    G = np.asarray(G, dtype=float)
    p = np.asarray(p, dtype=float)
    signal = np.diagonal(G, axis1=-2, axis2=-1) * p
    interference = G @ p - signal + noise_vars
    return np.log1p(signal / interference)


def rate_gradients(p, G, noise_vars) -> np.ndarray:
    """``J[k, j] = d rate_k / d p_j`` for one channel sample."""
    p = np.asarray(p, dtype=float)
    total = G @ p + noise_vars
    interference = total - np.diag(G) * p
    return G / total[:, None] - _cross(G) / interference[:, None]


def lower_bound_rates(p, G, model: NetworkModel) -> np.ndarray:
    """Rates with every interferer at full power (the ``r_lb`` integrand)."""
    G = np.asarray(G, dtype=float)
    p = np.asarray(p, dtype=float)
    diag = np.diagonal(G, axis1=-2, axis2=-1)
    worst = G @ model.power_limits - diag * model.power_limits + model.noise_vars
    return np.log1p(diag * p / worst)


def sample_rates(model: NetworkModel, p, n_samples: int, seed: int, lower_bound: bool = False,
                 chunk: int = 200_000) -> np.ndarray:
    """Per-sample rates, shape ``(n_samples, K)``.

    The channel stream depends only on ``seed``, so calls with and without
    ``lower_bound`` see identical channels (paired samples).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, model.K))
    for start in range(0, n_samples, chunk):
        b = min(chunk, n_samples - start)
        G = rng.exponential(model.gain_vars, size=(b, model.K, model.K))
        out[start:start + b] = (lower_bound_rates(p, G, model) if lower_bound
                                else instantaneous_rates(p, G, model.noise_vars))
    return out


def _mean_se(x):
    n = x.shape[0]
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se


def ergodic_rate_mc(model: NetworkModel, p, k: int, n_samples: int, seed: int):
    """Monte Carlo ergodic rate of pair k: ``(estimate, standard_error)``."""
    return _mean_se(sample_rates(model, p, n_samples, seed)[:, k])


def ergodic_rate_lb_mc(model: NetworkModel, p, k: int, n_samples: int, seed: int):
    """Monte Carlo ``r_lb,k``; only ``p[k]`` matters (a scalar is accepted)."""
    if np.ndim(p) == 0:
        p = np.full(model.K, float(p))
    return _mean_se(sample_rates(model, p, n_samples, seed, lower_bound=True)[:, k])


def sum_rate_mc(model: NetworkModel, p, n_samples: int, seed: int):
    return _mean_se(sample_rates(model, p, n_samples, seed).sum(axis=1))


# ---------------------------------------------------------------------------
# Surrogates (minimization form, all LogQuadratic)
# ---------------------------------------------------------------------------


def surrogate_g0(anchor, H, noise_vars, sample_id=None) -> LogQuadratic:
    """Convex surrogate of ``-sum_k rate_k(., H)`` tangent at ``anchor``.

    Keeps ``-log(total_k)`` and linearizes ``+log(interference_k)``.
    """
    G = _gains(H)
    a = np.asarray(anchor, dtype=float)
    Gc = _cross(G)
    interference = Gc @ a + noise_vars
    lin = (Gc / interference[:, None]).sum(axis=0)
    const = float(np.sum(np.log(interference) - (Gc @ a) / interference))
    return LogQuadratic(const, lin, rows=G, offsets=noise_vars, anchor=a, sample_id=sample_id)


def surrogate_gk(anchor, H, k: int, rate_req: float, noise_vars, sample_id=None) -> LogQuadratic:
    """Convex surrogate of ``R_k - rate_k(., H)`` tangent at ``anchor``."""
    G = _gains(H)
    a = np.asarray(anchor, dtype=float)
    gc = G[k].copy()
    gc[k] = 0.0
    interference = gc @ a + noise_vars[k]
    lin = gc / interference
    const = float(rate_req + np.log(interference) - gc @ a / interference)
    return LogQuadratic(const, lin, rows=G[k][None, :], offsets=[noise_vars[k]], anchor=a, sample_id=sample_id)


def surrogate_gk0(anchor, H, k: int, noise_vars, sample_id=None) -> LogQuadratic:
    """Block objective surrogate: ``-sum rate`` as a function of ``p_k`` alone
    with the other powers pinned at the anchor.  Receiver m's total-power log
    is kept; its interference log, which depends on ``p_k`` only for
    ``m != k``, is linearized."""
    G = _gains(H)
    a = np.asarray(anchor, dtype=float)
    K = G.shape[0]
    total = G @ a + noise_vars
    interference = total - np.diag(G) * a
    col = G[:, k]
    rest = total - col * a[k]  # receiver m's total without transmitter k
    cross = np.arange(K) != k
    slope = float(np.sum(col[cross] / interference[cross]))
    const = float(np.sum(np.log(interference)) - slope * a[k])
    return LogQuadratic(const, [slope], rows=col[:, None], offsets=rest, anchor=a, sample_id=sample_id)


def surrogate_gk1(anchor, H, k: int, rate_req: float, power_limits, noise_vars, sample_id=None) -> LogQuadratic:
    """Decoupled constraint ``R_k - log(1 + G_kk p_k / (J_k + noise_k))`` with
    ``J_k`` the full-power interference.  It is convex in ``p_k`` as it
    stands, so the surrogate is the function itself (tangent everywhere)."""
    G = _gains(H)
    worst = G[k] @ power_limits - G[k, k] * power_limits[k] + noise_vars[k]
    const = float(rate_req + np.log(worst))
    return LogQuadratic(const, [0.0], rows=[[G[k, k]]], offsets=[worst],
                        anchor=np.asarray(anchor, dtype=float), sample_id=sample_id)


def _lift(c: LogQuadratic, k: int, K: int) -> LogQuadratic:
    """Embed a scalar component in p_k into K dimensions."""
    lin = np.zeros(K)
    lin[k] = c.lin[0]
    rows = np.zeros((c.rows.shape[0], K))
    rows[:, k] = c.rows[:, 0]
    return LogQuadratic(c.const, lin, rows=rows, offsets=c.offsets, coefs=c.coefs,
                        anchor=c.anchor, sample_id=c.sample_id)


# ---------------------------------------------------------------------------
# Problem builders
# ---------------------------------------------------------------------------


def _value7(model, i, p, H):
    r = instantaneous_rates(p, _gains(H), model.noise_vars)
    return float(-r.sum()) if i == 0 else float(model.rate_reqs[i - 1] - r[i - 1])


def _grad7(model, i, p, H):
    J = rate_gradients(p, _gains(H), model.noise_vars)
    return -J.sum(axis=0) if i == 0 else -J[i - 1]


def _surr7(model, i, anchor, H):
    if i == 0:
        return surrogate_g0(anchor, H, model.noise_vars)
    return surrogate_gk(anchor, H, i - 1, model.rate_reqs[i - 1], model.noise_vars)


def _value8(model, i, p, H):
    if i == 0:
        return _value7(model, 0, p, H)
    k = i - 1
    return float(model.rate_reqs[k] - lower_bound_rates(p, _gains(H), model)[k])


def _grad8(model, i, p, H):
    if i == 0:
        return _grad7(model, 0, p, H)
    k = i - 1
    G = _gains(H)
    p = np.asarray(p, dtype=float)
    worst = G[k] @ model.power_limits - G[k, k] * model.power_limits[k] + model.noise_vars[k]
    g = np.zeros(model.K)
    g[k] = -G[k, k] / (G[k, k] * p[k] + worst)
    return g


def _surr8(model, i, anchor, H):
    if i == 0:
        return surrogate_g0(anchor, H, model.noise_vars)
    k = i - 1
    c = surrogate_gk1(anchor, H, k, model.rate_reqs[k], model.power_limits, model.noise_vars)
    return _lift(c, k, model.K)


def _block8(model, k, i, anchor, H):
    if i == 0:
        return surrogate_gk0(anchor, H, k, model.noise_vars)
    return surrogate_gk1(anchor, H, k, model.rate_reqs[k], model.power_limits, model.noise_vars)


def build_problem7(model: NetworkModel) -> StochasticProblem:
    """Sum-rate maximization with coupled ergodic rate constraints."""
    return StochasticProblem(
        dimension=model.K, constraint_count=model.K,
        sampler=partial(sample_channels, model),
        sample_value=partial(_value7, model), sample_grad=partial(_grad7, model),
        surrogate=partial(_surr7, model),
        feasible_set=Box(np.zeros(model.K), model.power_limits),
        name="problem7", initial_point=model.power_limits.copy(),
    )


def build_problem8(model: NetworkModel) -> StochasticProblem:
    """Sum-rate maximization with decoupled (full-interference) constraints.

    Carries both the full-vector surrogates (for the sequential solver) and
    the per-block ones (one scalar block per transmitter).
    """
    return StochasticProblem(
        dimension=model.K, constraint_count=model.K,
        sampler=partial(sample_channels, model),
        sample_value=partial(_value8, model), sample_grad=partial(_grad8, model),
        surrogate=partial(_surr8, model),
        feasible_set=Box(np.zeros(model.K), model.power_limits),
        blocks=BlockStructure.from_sizes([1] * model.K, [1] * model.K),
        block_surrogate=partial(_block8, model),
        name="problem8", initial_point=model.power_limits.copy(),
    )
