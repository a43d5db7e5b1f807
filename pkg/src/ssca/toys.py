"""Deterministic convex problems used by tests and the toy benchmark.

Every function here is already convex, so it serves as its own surrogate and
the sampler returns a constant.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import Box, BlockStructure, LogQuadratic, StochasticProblem, affine, quadratic


def _const_sampler(rng):
    return None


def deterministic_problem(objective: LogQuadratic, constraints: Sequence[LogQuadratic], box: Box,
                          blocks: Optional[BlockStructure] = None, block_parts=None,
                          initial_point=None, name: str = "toy") -> StochasticProblem:
    """Problem whose per-sample functions ignore the sample.

    ``block_parts[k]`` lists block k's components on block coordinates,
    objective first; required when ``blocks`` is given.
    """
    funcs = [objective, *constraints]

    def value(i, x, xi):
        return funcs[i].evaluate(x)

    def grad(i, x, xi):
        return funcs[i].gradient(x)

    def surrogate(i, anchor, xi):
        return funcs[i]

    def block_surrogate(k, i, anchor, xi):
        return block_parts[k][i]

    return StochasticProblem(
        dimension=box.dimension, constraint_count=len(constraints), sampler=_const_sampler,
        sample_value=value, sample_grad=grad, surrogate=surrogate, feasible_set=box,
        blocks=blocks, block_surrogate=None if blocks is None else block_surrogate, name=name,
        initial_point=None if initial_point is None else np.asarray(initial_point, dtype=float),
    )


def separable_quadratic(center, lower=0.0, upper=10.0, initial_point=None) -> StochasticProblem:
    """``min sum_k (x_k - c_k)^2`` over a box, with one scalar block per
    coordinate and no constraints."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    n = c.shape[0]
    box = Box(np.broadcast_to(lower, (n,)), np.broadcast_to(upper, (n,)))
    blocks = BlockStructure.from_sizes([1] * n, [0] * n)
    parts = [[quadratic([ck])] for ck in c]
    return deterministic_problem(quadratic(c), [], box, blocks, parts, initial_point, name="toy")


def hinge_toy(lower=0.0, upper=10.0, initial_point=None) -> StochasticProblem:
    """``min x^2  s.t.  1 - x <= 0`` on ``[lower, upper]``."""
    box = Box([lower], [upper])
    cons = affine([-1.0], 1.0)
    blocks = BlockStructure.from_sizes([1], [1])
    return deterministic_problem(quadratic([0.0]), [cons], box, blocks, [[quadratic([0.0]), cons]],
                                 initial_point, name="hinge-toy")


def infeasible_toy(center=2.0, level=1.0, lower=0.0, upper=10.0) -> StochasticProblem:
    """``min (x - center)^2  s.t.  level <= 0`` (never satisfiable for
    ``level > 0``)."""
    box = Box([lower], [upper])
    return deterministic_problem(quadratic([center]), [affine([0.0], level)], box, name="infeasible-toy")
