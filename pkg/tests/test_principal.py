"""Principal objective, score ingestion, and the CMA-ES design search."""

from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from laddermdp.bellman import GridSpec
from laddermdp.principal import (
    CmaConfig,
    DesignVector,
    InitialDistribution,
    LevelSearch,
    PrincipalParams,
    cma_es_optimize,
    design_ladder,
    gaming_free_mass,
    load_score_distribution,
    optimize_over_levels,
    project_design,
    relaxed_utility,
    synthetic_score_distribution,
    utility_terms,
    write_json_report,
)
from laddermdp.core import ModelParams

# cheap principal horizon: 0.8**50 ~ 1.4e-5, still under the tail cap
FAST = PrincipalParams(alpha=0.8, lam=2.0, xi=0.05, horizon=50)
GRID = GridSpec(x_max=15.0, dx=0.1)

HONEST = ModelParams(beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=50.0, r=1.0)
GAMY = ModelParams(beta=0.8, gamma=0.8, delta=0.0, c_plus=1.0, c_minus=0.2, r=1.0)


def point_mass(x: float) -> InitialDistribution:
    return InitialDistribution(support=(x,), mass=(1.0,))


class TestPrincipalParams:
    def test_defaults_pass_tail_cap(self):
        p = PrincipalParams()
        assert p.alpha == 0.95 and p.horizon == 200

    def test_short_horizon_leaves_tail(self):
        with pytest.raises(ValueError, match="tail"):
            PrincipalParams(alpha=0.95, horizon=150)

    def test_alpha_bounds(self):
        with pytest.raises(ValueError, match="alpha"):
            PrincipalParams(alpha=1.0)

    def test_zero_weights_allowed(self):
        p = PrincipalParams(lam=0.0, xi=0.0)
        assert p.lam == 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            PrincipalParams(lam=-1.0)


class TestInitialDistribution:
    def test_mass_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            InitialDistribution(support=(1.0, 2.0), mass=(0.5, 0.6))

    def test_support_range(self):
        with pytest.raises(ValueError, match="\\[0, 10\\]"):
            InitialDistribution(support=(11.0,), mass=(1.0,))

    def test_negative_mass(self):
        with pytest.raises(ValueError, match="non-negative"):
            InitialDistribution(support=(1.0, 2.0), mass=(1.5, -0.5))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal-length"):
            InitialDistribution(support=(1.0,), mass=(0.5, 0.5))


class TestDesignVector:
    def test_rejects_negative_r(self):
        with pytest.raises(ValueError, match="r must be"):
            DesignVector(r=-0.1)

    def test_rejects_unsorted_thresholds(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            DesignVector(r=1.0, thresholds=(3.0, 2.0))

    def test_projection_clips_and_sorts(self):
        assert project_design((-0.5, 2.0)) == DesignVector(r=0.0, thresholds=(2.0,))
        assert project_design((1.0, 5.0, 2.0)) == DesignVector(
            r=1.0, thresholds=(2.0, 5.0)
        )

    def test_dim_counts_r(self):
        assert DesignVector(r=1.0, thresholds=(2.0, 3.0)).dim == 3

    def test_ladder_pins_entry_level_and_caps_at_grid(self):
        ladder = design_ladder(DesignVector(r=1.0, thresholds=(2.0, 99.0)), GRID)
        assert ladder.mu[0] == 0.0
        assert ladder.mu[1] == 2.0
        assert ladder.mu[2] == GRID.x_max - GRID.dx


class TestUtility:
    def test_honest_robust_term_is_geometric_sum(self):
        # gaming at c_minus = 50 can never pay back, so every step is honest
        terms = utility_terms(
            DesignVector(r=1.0, thresholds=(2.0,)), FAST, HONEST, point_mass(0.0), GRID
        )
        geometric = (1.0 - FAST.alpha ** (FAST.horizon + 1)) / (1.0 - FAST.alpha)
        assert terms.robust == pytest.approx(geometric, abs=1e-9)

    def test_zero_weights_reduce_to_geometric_sum(self):
        bare = replace(FAST, lam=0.0, xi=0.0)
        value = relaxed_utility(
            DesignVector(r=1.0, thresholds=(2.0,)), bare, HONEST, point_mass(0.0), GRID
        )
        geometric = (1.0 - bare.alpha ** (bare.horizon + 1)) / (1.0 - bare.alpha)
        assert value == pytest.approx(geometric, abs=1e-9)

    def test_decomposition_recombines(self):
        dist = InitialDistribution(support=(0.5, 3.0, 7.0), mass=(0.2, 0.5, 0.3))
        for params in (HONEST, GAMY):
            terms = utility_terms(
                DesignVector(r=1.0, thresholds=(4.0,)), FAST, params, dist, GRID
            )
            recombined = terms.robust + FAST.lam * terms.attr - FAST.xi * terms.cost
            assert terms.total == pytest.approx(recombined, abs=1e-9)

    def test_gaming_lowers_robustness(self):
        design = DesignVector(r=1.0, thresholds=(4.0,))
        dist = point_mass(3.95)
        geometric = (1.0 - FAST.alpha ** (FAST.horizon + 1)) / (1.0 - FAST.alpha)
        terms = utility_terms(design, FAST, GAMY, dist, GRID)
        assert terms.robust < geometric - 0.5

    def test_utility_monotone_in_lam_on_degenerate_dist(self):
        # point mass at the top with a trivially satisfiable threshold:
        # the attribute term is positive, so more weight means more utility
        design = DesignVector(r=1.0, thresholds=(0.5,))
        values = [
            relaxed_utility(design, replace(FAST, lam=lam), HONEST, point_mass(10.0), GRID)
            for lam in (0.5, 1.0, 2.0, 4.0)
        ]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_gaming_free_mass_splits_the_support(self):
        # on-grid start: the off-grid replay near a threshold may top up
        # with gaming regardless of its price, which is not under test here
        design = DesignVector(r=1.0, thresholds=(4.0,))
        assert gaming_free_mass(design, FAST, HONEST, point_mass(3.9), GRID) == 1.0
        assert gaming_free_mass(design, FAST, GAMY, point_mass(3.95), GRID) == 0.0

    def test_zero_reward_design_evaluates(self):
        value = relaxed_utility(
            DesignVector(r=0.0, thresholds=(2.0,)), FAST, HONEST, point_mass(1.0), GRID
        )
        assert np.isfinite(value)


class TestCmaEs:
    def test_one_dimensional_quadratic(self):
        for seed in (0, 1):
            best, value, history = cma_es_optimize(
                lambda d: (d.r - 3.0) ** 2, dim=1, seed=seed
            )
            assert abs(best.r - 3.0) <= 1e-2
            assert len(history) == 30

    def test_multi_dimensional_quadratic(self):
        target = np.array([2.0, 4.0, 6.0])

        def sphere(d: DesignVector) -> float:
            v = np.array([d.r, *d.thresholds])
            return float(((v - target) ** 2).sum())

        best, value, _ = cma_es_optimize(sphere, dim=3, seed=7)
        assert value <= 1e-2

    def test_fixed_seed_replays_identically(self):
        runs = [
            cma_es_optimize(lambda d: (d.r - 3.0) ** 2, dim=1, seed=42)
            for _ in range(2)
        ]
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]
        assert runs[0][2] == runs[1][2]

    def test_candidates_are_repaired_before_evaluation(self):
        seen: list[DesignVector] = []

        def probe(d: DesignVector) -> float:
            seen.append(d)
            return (d.r - 1.0) ** 2 + sum(d.thresholds)

        cma_es_optimize(
            probe, dim=3, seed=3, config=CmaConfig(initial_mean=(-2.0, 5.0, 1.0))
        )
        assert len(seen) == 300
        for d in seen:
            assert d.r >= 0.0
            assert all(t >= 0.0 for t in d.thresholds)
            assert list(d.thresholds) == sorted(d.thresholds)

    def test_returned_best_matches_history(self):
        best, value, history = cma_es_optimize(
            lambda d: (d.r - 3.0) ** 2, dim=1, seed=5
        )
        assert value == min(rec.best_value for rec in history)
        assert all(rec.sigma > 0.0 for rec in history)
        assert [rec.generation for rec in history] == list(range(30))

    def test_dim_validation(self):
        with pytest.raises(ValueError, match="dim"):
            cma_es_optimize(lambda d: d.r, dim=0, seed=0)


class TestLevelSearch:
    SMALL = CmaConfig(population=4, generations=3)
    DIST = InitialDistribution(support=(0.5, 2.0, 6.0), mass=(0.3, 0.4, 0.3))

    def run(self):
        return optimize_over_levels(
            FAST,
            HONEST,
            self.DIST,
            GridSpec(x_max=12.0, dx=0.25),
            seed=11,
            levels=(2, 3),
            config=self.SMALL,
        )

    def test_one_result_per_depth_with_table_schema(self):
        search = self.run()
        assert [r.levels for r in search.results] == [2, 3]
        rows = search.table()
        assert set(rows[0]) == {"L", "r", "mu_L", "U"}
        assert rows[0]["mu_L"] == search.results[0].design.thresholds[-1]

    def test_best_is_the_utility_argmax(self):
        search = self.run()
        assert search.best.utility == max(r.utility for r in search.results)

    def test_end_to_end_determinism(self):
        assert self.run().table() == self.run().table()

    def test_depth_below_two_rejected(self):
        with pytest.raises(ValueError, match="depth"):
            optimize_over_levels(
                FAST, HONEST, self.DIST, GRID, levels=(1,), config=self.SMALL
            )

    def test_json_report_roundtrip(self, tmp_path):
        search = self.run()
        path = tmp_path / "report.json"
        write_json_report(search, path)
        payload = json.loads(path.read_text())
        assert len(payload["per_level"]) == 2
        assert payload["best"]["utility"] == search.best.utility
        assert set(payload["best"]["terms"]) == {"robust", "attr", "cost"}


class TestScoreIngestion:
    def test_two_point_min_max(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300\n850\n")
        dist = load_score_distribution(f, bins=2)
        assert dist.support == (2.5, 7.5)
        assert dist.mass == (0.5, 0.5)

    def test_weighted_rows(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300,3\n850,1\n")
        dist = load_score_distribution(f, bins=2)
        assert dist.mass == (0.75, 0.25)

    def test_single_score_collapses_to_top(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("700\n")
        assert load_score_distribution(f, bins=4) == InitialDistribution(
            support=(10.0,), mass=(1.0,)
        )

    def test_blank_lines_skipped(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300\n\n850\n")
        assert load_score_distribution(f, bins=2).mass == (0.5, 0.5)

    def test_malformed_row_names_line(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300\nnot-a-score\n")
        with pytest.raises(ValueError, match="line 2"):
            load_score_distribution(f)

    def test_too_many_fields_names_line(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300,1,7\n")
        with pytest.raises(ValueError, match="line 1"):
            load_score_distribution(f)

    def test_negative_weight_names_line(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("300,-2\n")
        with pytest.raises(ValueError, match="line 1"):
            load_score_distribution(f)

    def test_empty_file_rejected(self, tmp_path):
        f = tmp_path / "scores.csv"
        f.write_text("\n\n")
        with pytest.raises(ValueError, match="no data"):
            load_score_distribution(f)

    def test_synthetic_fallback(self):
        dist = load_score_distribution(None)
        assert dist == synthetic_score_distribution()
        assert len(dist.support) == 25
        assert sum(dist.mass) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= min(dist.support) and max(dist.support) <= 10.0
        # the mixture humps sit in the upper half of the scale
        assert dist.support[int(np.argmax(dist.mass))] > 5.0
