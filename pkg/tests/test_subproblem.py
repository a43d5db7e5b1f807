import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssca.core import Box, ProjectionSet, affine, quadratic
from ssca.subproblem import (InnerSolverConfig, SubproblemError, recover_slacks, solve_block_subproblem,
                             solve_subproblem)
from ssca.surrogate import empty_state
from ssca.wireless import NetworkModel, sample_channels, surrogate_gk0, surrogate_gk1

from oracles import random_instance, slack_grid_oracle, state


def grid_min(fun, lo, hi, points):
    xs = np.linspace(lo, hi, points)
    vals = fun(xs)
    j = int(np.argmin(vals))
    return xs[j], vals[j]


def test_unconstrained_quadratic_interior():
    sol = solve_subproblem(state(quadratic([3.0])), [], 1.0, Box([0.0], [10.0]), [5.0])
    assert sol.x_bar[0] == pytest.approx(3.0, abs=1e-9)
    assert sol.s.shape == (0,)


def test_unconstrained_quadratic_clamped():
    sol = solve_subproblem(state(quadratic([3.0])), [], 1.0, Box([0.0], [2.0]), [1.0])
    assert sol.x_bar[0] == 2.0


def _hinge_oracle(rho):
    return grid_min(lambda x: x**2 + rho * np.maximum(0.0, 1.0 - x), 0.0, 10.0, 1_000_001)


def test_strong_penalty_reaches_constraint_boundary():
    sol = solve_subproblem(state(quadratic([0.0])), [state(affine([-1.0], 1.0))], 10.0, Box([0.0], [10.0]), [5.0])
    x_grid, v_grid = _hinge_oracle(10.0)
    assert sol.x_bar[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.s[0] == pytest.approx(0.0, abs=1e-9)
    assert abs(sol.x_bar[0] - x_grid) <= 1e-5
    assert sol.objective == pytest.approx(v_grid, abs=1e-9)


def test_weak_penalty_leaves_slack():
    sol = solve_subproblem(state(quadratic([0.0])), [state(affine([-1.0], 1.0))], 0.5, Box([0.0], [10.0]), [5.0])
    x_grid, _ = _hinge_oracle(0.5)
    assert sol.x_bar[0] == pytest.approx(0.25, abs=1e-9)
    assert sol.s[0] == pytest.approx(0.75, abs=1e-9)
    assert abs(x_grid - 0.25) <= 1e-5


@pytest.mark.parametrize("rule", ["backtracking", "diminishing"])
def test_both_inner_rules_on_two_dimensional_hinge(rule):
    obj = state(quadratic([0.0, 0.0]))
    cons = [state(affine([-1.0, -1.0], 1.0))]  # x1 + x2 >= 1
    cfg = InnerSolverConfig(step_rule=rule, max_iters=20000 if rule == "diminishing" else 2000)
    sol = solve_subproblem(obj, cons, 5.0, Box([0.0, 0.0], [3.0, 3.0]), [2.0, 0.0], cfg)
    tol = 1e-6 if rule == "backtracking" else 2e-3
    np.testing.assert_allclose(sol.x_bar, [0.5, 0.5], atol=tol)
    assert sol.s[0] <= tol


def test_recover_slacks_cases():
    x = np.array([0.0])
    assert recover_slacks([state(affine([0.0], -1.0)), state(affine([0.0], -2.0))], x).tolist() == [0.0, 0.0]
    assert recover_slacks([state(affine([0.0], 0.3))], x)[0] == pytest.approx(0.3)
    vals = [-1.0, 0.5, 0.0]
    assert recover_slacks([state(affine([0.0], v)) for v in vals], x).tolist() == [0.0, 0.5, 0.0]


def test_solution_slacks_match_hinge_of_constraints(rng):
    obj = state(quadratic(rng.normal(size=2)))
    cons = [state(affine(rng.normal(size=2), rng.normal())) for _ in range(2)]
    sol = solve_subproblem(obj, cons, 2.0, Box([-1.0, -1.0], [1.0, 1.0]), [0.0, 0.0])
    np.testing.assert_allclose(sol.s, recover_slacks(cons, sol.x_bar), atol=1e-10)
    assert sol.residual >= 0


# -- oracle sweep against the explicit slack formulation ------------------------------------------


def test_slack_form_equivalence_on_random_instances():
    worst = 0.0
    for seed in range(100):
        n, m, box, obj, cons, rho = random_instance(seed)
        sol = solve_subproblem(state(obj), [state(c) for c in cons], rho, box, box.sample(np.random.default_rng(seed)))
        _, v_grid = slack_grid_oracle(n, box, obj, cons, rho)
        worst = max(worst, abs(sol.objective - v_grid))
        assert abs(sol.objective - v_grid) <= 1e-3, seed
        assert box.contains(sol.x_bar)
    assert worst <= 1e-3


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_warm_start_neutrality(seed):
    n, m, box, obj, cons, rho = random_instance(seed)
    rng = np.random.default_rng(seed + 1)
    center = box.sample(rng)
    objs = [state(obj)]
    vals = [solve_subproblem(objs[0], [state(c) for c in cons], rho, box, center, start=box.sample(rng)).objective
            for _ in range(5)]
    assert max(vals) - min(vals) <= 10 * InnerSolverConfig().tol


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_solution_never_worse_than_start_or_center(seed):
    n, m, box, obj, cons, rho = random_instance(seed)
    rng = np.random.default_rng(seed)
    center, start = box.sample(rng), box.sample(rng)
    cfg = InnerSolverConfig(step_rule="diminishing", max_iters=50)
    sol = solve_subproblem(state(obj), [state(c) for c in cons], rho, box, center, cfg, start=start)

    def F(x):
        return obj.evaluate(x) + rho * sum(max(0.0, c.evaluate(x)) for c in cons)

    assert sol.objective <= min(F(center), F(start)) + 1e-12
    assert box.contains(sol.x_bar)


def test_generic_projection_set():
    def ball(y):
        r = np.linalg.norm(y)
        return y if r <= 1 else y / r

    sol = solve_subproblem(state(quadratic([2.0, 0.0])), [], 1.0, ProjectionSet(2, ball), [0.0, 0.0])
    np.testing.assert_allclose(sol.x_bar, [1.0, 0.0], atol=1e-6)


def test_nonfinite_surrogate_raises_with_index():
    bad = state(affine([0.0], 0.0))
    from ssca.core import LogQuadratic
    log_con = empty_state(1).add(LogQuadratic(0.0, [0.0], rows=[[1.0]], offsets=[-5.0]), 1.0)
    with pytest.raises(SubproblemError) as err:
        solve_subproblem(bad, [log_con], 1.0, Box([0.0], [1.0]), [0.5])
    assert err.value.index == 1


# -- block subproblems ------------------------------------------------------------------------------


def test_block_with_single_block_matches_joint_solve(rng):
    obj = state(quadratic(rng.normal(size=2)))
    cons = [state(affine(rng.normal(size=2), 0.3))]
    box = Box([-1.0, -1.0], [1.0, 1.0])
    joint = solve_subproblem(obj, cons, 3.0, box, [0.0, 0.0])
    block = solve_block_subproblem(0, obj, cons, 3.0, box, [0.0, 0.0])
    np.testing.assert_array_equal(joint.x_bar, block.x_bar)


def test_block_without_constraints_minimizes_objective():
    sol = solve_block_subproblem(2, state(quadratic([0.7])), [], 1.0, Box([0.0], [1.0]), [0.0])
    assert sol.x_bar[0] == pytest.approx(0.7, abs=1e-12)


def test_scalar_fast_path_agrees_with_smoothed_solver():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        obj = state(quadratic([rng.uniform(-1, 3)], curvature=rng.uniform(0.2, 3)))
        cons = [state(quadratic([rng.uniform(-1, 3)], curvature=rng.uniform(0, 2), const=rng.uniform(-1, 0.5)))]
        rho = float(rng.uniform(0.1, 5))
        box = Box([0.0], [2.0])
        fast = solve_subproblem(obj, cons, rho, box, [1.0])
        # a two-coordinate copy with a dummy coordinate forces the general path
        obj2 = state(quadratic([obj.components[0].lin[0] / -obj.components[0].quad[0, 0], 0.0],
                               curvature=np.diag([obj.components[0].quad[0, 0], 1.0])))
        c = cons[0].components[0]
        con2 = state(quadratic([-c.lin[0] / c.quad[0, 0] if c.quad[0, 0] else 0.0, 0.0],
                               curvature=np.diag([c.quad[0, 0], 0.0]),
                               const=c.evaluate([-c.lin[0] / c.quad[0, 0]]) if c.quad[0, 0] else c.const))
        slow = solve_subproblem(obj2, [con2], rho, Box([0.0, 0.0], [2.0, 2.0]), [1.0, 0.0])
        assert fast.objective == pytest.approx(slow.objective, abs=1e-8), seed


def test_wireless_block_with_feasible_anchor_has_zero_slack(rng):
    model = NetworkModel.symmetric(5)
    k, P = 2, model.power_limits
    anchor = np.full(5, 100.0)
    obj, con = empty_state(1), empty_state(1)
    for t in range(1, 2001):
        H = sample_channels(model, rng)
        w = 1.0 / t
        obj = obj.add(surrogate_gk0(anchor, H, k, model.noise_vars), w)
        con = con.add(surrogate_gk1(anchor, H, k, model.rate_reqs[k], P, model.noise_vars), w)
    assert con.value([anchor[k]]) < 0  # anchor itself satisfies the averaged constraint
    sol = solve_block_subproblem(k, obj, [con], 0.5, Box([0.0], [100.0]), [anchor[k]])
    assert sol.s[0] == pytest.approx(0.0, abs=1e-10)
    x_grid, v_grid = grid_min(
        lambda xs: np.array([obj.value([x]) + 0.5 * max(0.0, con.value([x])) for x in xs]), 0.0, 100.0, 20001)
    assert sol.objective <= v_grid + 1e-9
    assert abs(sol.x_bar[0] - x_grid) <= 0.05
