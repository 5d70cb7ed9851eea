"""Oracle tests.

These pin down the brute-forcer itself, since the rest of the suite
leans on it for expected values: grid validation, budget guard, and the
monotonicity structure that must hold for any horizon (longer horizons
and finer action grids only add options).
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ladders, model_params
from laddermdp.bellman import GridSpec
from laddermdp.core import Ladder, ModelParams
from laddermdp.oracle import (
    OracleSizeError,
    OracleSpec,
    brute_force_value,
    truncation_bound,
)
from laddermdp.solver import error_bound, value_iterate

CASE_C = ModelParams(beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=0.7, r=1.0)
TWO = Ladder((0.0, 5.0))


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            OracleSpec(x_max=5.0, horizon=0)
        with pytest.raises(ValueError):
            OracleSpec(x_max=5.0, attr_step=0.0)
        with pytest.raises(ValueError):
            OracleSpec(x_max=0.0)
        with pytest.raises(ValueError):
            OracleSpec(x_max=5.0, action_step=0.015, attr_step=0.01)
        with pytest.raises(ValueError):
            OracleSpec(x_max=5.005, attr_step=0.01)

    def test_grid_properties(self):
        spec = OracleSpec(x_max=2.0, action_step=0.05, attr_step=0.01)
        assert spec.stride == 5
        assert spec.n_points == 201
        pts = spec.points()
        assert pts[0] == 0.0
        assert pts[-1] == 2.0

    def test_size_budget(self):
        big = OracleSpec(x_max=100.0, horizon=200, attr_step=0.001, action_step=0.001)
        with pytest.raises(OracleSizeError):
            brute_force_value(TWO, CASE_C, big)


class TestMonotonicity:
    def test_longer_horizon_weakly_helps(self):
        short = OracleSpec(x_max=8.0, horizon=10, action_step=0.05, attr_step=0.05)
        long = OracleSpec(x_max=8.0, horizon=20, action_step=0.05, attr_step=0.05)
        vs = brute_force_value(TWO, CASE_C, short).values
        vl = brute_force_value(TWO, CASE_C, long).values
        assert np.all(vl >= vs - 1e-12)

    def test_finer_action_grid_weakly_helps(self):
        coarse = OracleSpec(x_max=8.0, horizon=20, action_step=0.1, attr_step=0.05)
        fine = OracleSpec(x_max=8.0, horizon=20, action_step=0.05, attr_step=0.05)
        vc = brute_force_value(TWO, CASE_C, coarse).values
        vf = brute_force_value(TWO, CASE_C, fine).values
        assert np.all(vf >= vc - 1e-12)

    @settings(max_examples=10, deadline=None)
    @given(
        params=model_params(incentivizable=None),
        ladder=ladders(max_levels=3, max_gap=2.0),
        horizon=st.integers(3, 15),
    )
    def test_values_monotone_in_level_and_attribute(self, params, ladder, horizon):
        x_max = float(np.ceil((ladder.top + 2.0) / 0.1) * 0.1)
        spec = OracleSpec(x_max=x_max, horizon=horizon, action_step=0.1, attr_step=0.1)
        res = brute_force_value(ladder, params, spec)
        assert np.all(np.diff(res.values, axis=0) >= -1e-9)
        dv = np.diff(res.values, axis=1)
        assert np.all(dv >= -1e-9)
        # utility gains at most c_plus per unit of attribute
        assert np.all(dv <= params.c_plus * spec.attr_step + 1e-9)


class TestValues:
    def test_vanishing_reward(self):
        params = ModelParams(
            beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=0.7, r=1e-12
        )
        spec = OracleSpec(x_max=6.0, horizon=30, action_step=0.05, attr_step=0.05)
        res = brute_force_value(Ladder((0.0, 3.0)), params, spec)
        assert np.max(np.abs(res.values)) <= 1e-9
        assert np.all(res.a_plus == 0.0)
        assert np.max(res.a_minus) <= 1e-6

    def test_truncation_bound(self):
        assert truncation_bound(TWO, CASE_C, 60) == pytest.approx(
            0.8**60 * 1.0 / 0.2
        )
        five = Ladder((0.0, 4.0, 8.0, 12.0, 16.0))
        assert truncation_bound(five, CASE_C, 10) == pytest.approx(
            0.8**10 * 4.0 / 0.2
        )

    def test_matches_solver_on_small_instance(self):
        spec = OracleSpec(x_max=8.0, horizon=60, action_step=0.05, attr_step=0.05)
        res = brute_force_value(TWO, CASE_C, spec)
        grid = GridSpec(x_max=8.0, dx=0.05)
        pol = value_iterate(TWO, CASE_C, grid, epsilon=1e-9)
        tol = error_bound(CASE_C, grid) + truncation_bound(TWO, CASE_C, spec.horizon)
        for lvl in (1, 2):
            for x in np.arange(0.0, 6.01, 0.25):
                assert res.value_at(lvl, x) == pytest.approx(
                    pol.value(lvl, x), abs=tol
                )


class TestFirstActions:
    def test_cheap_gaming_ladder_starts_with_pure_gaming(self):
        params = ModelParams(
            beta=0.8, gamma=0.8, delta=0.8, c_plus=1.0, c_minus=0.365, r=1.0
        )
        five = Ladder((0.0, 4.0, 8.0, 12.0, 16.0))
        spec = OracleSpec(x_max=25.0, horizon=60, action_step=0.05, attr_step=0.05)
        res = brute_force_value(five, params, spec)
        a_plus, a_minus = res.action_at(1, 0.0)
        assert a_plus == 0.0
        assert a_minus == pytest.approx(4.0, abs=1e-9)

    def test_case_c_action_regions(self):
        spec = OracleSpec(x_max=8.0, horizon=60, action_step=0.05, attr_step=0.05)
        res = brute_force_value(TWO, CASE_C, spec)
        assert res.action_at(1, 3.0) == (0.0, 0.0)
        a_plus, a_minus = res.action_at(1, 4.0)
        assert a_plus == 0.0
        assert a_minus == pytest.approx(1.0, abs=1e-9)
        a_plus, a_minus = res.action_at(1, 4.4)
        assert a_plus == pytest.approx(0.6, abs=1e-9)
        assert a_minus == 0.0
