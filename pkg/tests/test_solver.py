"""Solver tests.

The two-level instance beta=gamma=0.8, c_plus=1, c_minus=0.7, r=1,
mu_2=5 is the workhorse: its W is piecewise linear with knots at
25/7 and 4.2, a plateau at 3.76 up to the threshold, and the three
policy regions (lazy, game, improve) in that order. Expected numbers
below were frozen from the finite-horizon oracle.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import ladders, model_params
from laddermdp.bellman import GridSpec, ValueGrid, default_grid
from laddermdp.core import Ladder, ModelParams
from laddermdp.solver import (
    PROMOTE,
    STAY,
    convergence_report,
    error_bound,
    load_policy,
    policy_from_dict,
    policy_to_dict,
    value_iterate,
)
from laddermdp.solver import save_policy

CASE_C = ModelParams(beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=0.7, r=1.0)
TWO = Ladder((0.0, 5.0))


@pytest.fixture(scope="module")
def case_c_policy():
    grid = GridSpec(x_max=8.0, dx=0.005)
    return value_iterate(TWO, CASE_C, grid, epsilon=1e-9)


class TestFrozenValues:
    def test_utilities(self, case_c_policy):
        pol = case_c_policy
        # lazy region: utility 0; game region: slope picks up; plateau
        assert pol.value(1, 3.0) == pytest.approx(0.0, abs=1e-3)
        assert pol.value(1, 4.0) == pytest.approx(0.3, abs=1e-3)
        assert pol.value(1, 4.5) == pytest.approx(0.74, abs=1e-3)
        assert pol.value(1, 5.0) == pytest.approx(1.24, abs=1e-3)

    def test_two_level_rows_identical(self, case_c_policy):
        w = case_c_policy.W.values
        assert np.array_equal(w[0], w[1])

    def test_within_error_bound_of_coarser_grid(self):
        # halving dx halves the guaranteed gap; the two solves must agree
        # within the sum of their bounds
        fine = value_iterate(TWO, CASE_C, GridSpec(8.0, 0.005), epsilon=1e-9)
        coarse = value_iterate(TWO, CASE_C, GridSpec(8.0, 0.05), epsilon=1e-9)
        tol = error_bound(CASE_C, fine.grid) + error_bound(CASE_C, coarse.grid)
        gap = np.max(np.abs(fine.W.values[:, ::10] - coarse.W.values))
        assert gap <= tol + 1e-6


class TestActions:
    def test_lazy_region(self, case_c_policy):
        act = case_c_policy.action(1, 3.0)
        assert act.a_plus == 0.0
        assert act.a_minus == 0.0
        i = case_c_policy.grid.nearest_index(3.0)
        assert case_c_policy.branch[0, i] == STAY

    def test_gaming_region(self, case_c_policy):
        act = case_c_policy.action(1, 4.0)
        assert act.a_plus == 0.0
        assert act.a_minus == pytest.approx(1.0, abs=1e-6)
        i = case_c_policy.grid.nearest_index(4.0)
        assert case_c_policy.branch[0, i] == PROMOTE

    def test_improvement_region(self, case_c_policy):
        act = case_c_policy.action(1, 4.4)
        assert act.a_plus == pytest.approx(0.6, abs=1e-6)
        assert act.a_minus == pytest.approx(0.0, abs=1e-6)

    def test_at_threshold(self, case_c_policy):
        act = case_c_policy.action(1, 5.0)
        assert act.a_plus == 0.0
        assert act.a_minus == 0.0

    def test_top_level_keeps_status(self, case_c_policy):
        # keeping level 2 costs 0.7 per unit of feature, cheaper than
        # losing r=1, so the agent at 4.0 games the full gap
        act = case_c_policy.action(2, 4.0)
        assert act.a_plus == 0.0
        assert act.a_minus == pytest.approx(1.0, abs=1e-6)


class TestConvergence:
    def test_report_passes(self, case_c_policy):
        rep = convergence_report(case_c_policy, CASE_C)
        assert rep.contraction_pass
        assert rep.iterations_pass
        assert rep.max_ratio <= CASE_C.beta + 1e-6
        assert rep.iterations <= rep.iteration_bound + 2

    def test_warm_start_converges_immediately(self, case_c_policy):
        pol2 = value_iterate(
            TWO, CASE_C, case_c_policy.grid, epsilon=1e-9, warm_start=case_c_policy
        )
        assert pol2.iterations <= 2
        np.testing.assert_allclose(
            pol2.W.values, case_c_policy.W.values, atol=1e-8
        )

    def test_warm_start_grid_mismatch(self, case_c_policy):
        other = GridSpec(x_max=8.0, dx=0.01)
        with pytest.raises(ValueError):
            value_iterate(TWO, CASE_C, other, warm_start=case_c_policy)

    def test_input_validation(self):
        grid = GridSpec(x_max=8.0, dx=0.1)
        with pytest.raises(ValueError):
            value_iterate(TWO, CASE_C, grid, epsilon=0.0)
        with pytest.raises(ValueError):
            value_iterate(TWO, CASE_C, GridSpec(x_max=4.0, dx=0.1))

    @settings(max_examples=15, deadline=None)
    @given(params=model_params(incentivizable=True), ladder=ladders(max_levels=4))
    def test_random_solves_meet_guarantees(self, params, ladder):
        grid = default_grid(ladder, params, dx=0.1)
        pol = value_iterate(ladder, params, grid, epsilon=1e-6)
        rep = convergence_report(pol, params)
        assert rep.contraction_pass
        assert rep.iterations_pass
        pol.W.check_invariants(params)
        # doing nothing forever earns at least 0, so W never exceeds c_plus*x
        xs = grid.points
        assert np.all(pol.W.values <= params.c_plus * xs + 1e-5)


class TestNoImprovementRegime:
    @settings(max_examples=15, deadline=None)
    @given(params=model_params(incentivizable=False), ladder=ladders(max_levels=3))
    def test_improvement_never_used(self, params, ladder):
        grid = default_grid(ladder, params, dx=0.1)
        pol = value_iterate(ladder, params, grid, epsilon=1e-6)
        assert np.all(pol.a_plus == 0.0)

    def test_vanishing_reward_removes_all_incentive(self):
        params = ModelParams(
            beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=0.7, r=1e-12
        )
        pol = value_iterate(Ladder((0.0, 3.0)), params, GridSpec(6.0, 0.05))
        xs = pol.grid.points
        utilities = params.c_plus * xs - pol.W.values
        assert np.max(np.abs(utilities)) <= 1e-7
        assert np.all(pol.a_plus == 0.0)
        assert np.max(pol.a_minus) <= 1e-6


class TestPersistence:
    def test_roundtrip(self, case_c_policy, tmp_path):
        path = tmp_path / "policy.json"
        save_policy(case_c_policy, path)
        loaded = load_policy(path)
        assert loaded.params == CASE_C
        assert loaded.ladder == TWO
        assert loaded.grid == case_c_policy.grid
        assert loaded.iterations == case_c_policy.iterations
        assert np.array_equal(loaded.W.values, case_c_policy.W.values)
        assert np.array_equal(loaded.a_plus, case_c_policy.a_plus)
        assert np.array_equal(loaded.a_minus, case_c_policy.a_minus)
        assert np.array_equal(loaded.branch, case_c_policy.branch)
        assert loaded.value(1, 4.5) == case_c_policy.value(1, 4.5)

    def test_rejects_unknown_format(self, case_c_policy):
        data = policy_to_dict(case_c_policy)
        data["format"] = "laddermdp-policy-v0"
        with pytest.raises(ValueError, match="format"):
            policy_from_dict(data)


def test_error_bound_formula():
    grid = GridSpec(x_max=8.0, dx=0.05)
    assert error_bound(CASE_C, grid) == pytest.approx(0.125)
    tight = ModelParams(beta=0.5, gamma=0.8, delta=0.0, c_plus=2.0, c_minus=1.5, r=1.0)
    assert error_bound(tight, grid) == pytest.approx(2.0 * 0.05 / (2 * 0.5))
