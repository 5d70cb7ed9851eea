"""Threshold-ladder construction and feasibility checking for the principal.

The principal wants a ladder that makes an agent starting at the bottom
climb to the top level through genuine improvement alone, ending with
attribute at least M. This module provides the analytic answers (a hard
ceiling on M when there is no per-level boost, minimum reward and gaming
cost when there is one, and the drift-matched "natural" ladder), a
bisection search that greedily stacks the largest sustainable threshold
per level, and a rollout-based verifier for arbitrary ladders.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .bellman import GridSpec, ValueGrid
from .core import (
    AgentState,
    Ladder,
    ModelParams,
    check_incentivizable,
    natural_equilibrium,
)
from .simulate import Trajectory, rollout
from .solver import ConvergenceReport, convergence_report, value_iterate

__all__ = [
    "ATTRIBUTE_TARGET",
    "DesignProblem",
    "FeasibilityReport",
    "GreedyResult",
    "LegupConditions",
    "NO_GAMING",
    "SWEEP_PARAM_COLUMNS",
    "TOP_LEVEL",
    "Violation",
    "greedy_thresholds",
    "infeasibility_bound_no_legup",
    "legup_feasibility_conditions",
    "natural_sequence",
    "sweep_entry",
    "verify_feasible",
    "write_sweep_csv",
]

#: Constraint labels used in feasibility reports.
NO_GAMING = "no-gaming"
ATTRIBUTE_TARGET = "attribute-target"
TOP_LEVEL = "top-level"

# Gaming below this is re-basing roundoff from off-grid action lookups,
# not an economic choice; real top-ups are at least grid-step sized.
_GAMING_ATOL = 1e-9


@dataclass(frozen=True)
class DesignProblem:
    """Incentivize attribute at least M at reward rate r.

    M and r are the principal's decision variables; params carries the
    environment. r is authoritative: params is rewritten to agree so a
    stale params.r cannot leak into the agent's best response.
    """

    M: float
    r: float
    params: ModelParams

    def __post_init__(self) -> None:
        if self.M < 0.0:
            raise ValueError(f"M must be >= 0, got {self.M}")
        if self.r <= 0.0:
            raise ValueError(f"r must be > 0, got {self.r}")
        if self.params.r != self.r:
            object.__setattr__(self, "params", replace(self.params, r=self.r))


def infeasibility_bound_no_legup(params: ModelParams) -> float:
    """Ceiling on the incentivizable attribute when delta = 0.

    No ladder of any length can hold an agent at an attribute above
    r / ((1-beta) (1-gamma)^2 c_plus): past that point the discounted
    reward of the entire ladder cannot pay for the upkeep that the
    depreciation demands. Pure arithmetic; callable for any params.
    """
    p = params
    return p.r / ((1.0 - p.beta) * (1.0 - p.gamma) ** 2 * p.c_plus)


class LegupConditions(NamedTuple):
    min_r: float
    min_c_minus: float
    satisfied: bool


def legup_feasibility_conditions(params: ModelParams) -> LegupConditions:
    """Reward and gaming-cost floors for boost-driven ladders (delta > 0).

    Below min_r no target is reachable at all; below min_c_minus the
    agent rides cheap gaming plus the per-level boost instead of
    improving. satisfied means both floors are met.
    """
    p = params
    if p.delta == 0.0:
        raise ValueError(
            "delta is 0; use infeasibility_bound_no_legup for the no-boost ceiling"
        )
    min_r = (1.0 - p.beta) * p.c_plus * p.delta / (1.0 - p.gamma)
    bg = p.beta * p.gamma
    min_c_minus = max(
        (1.0 + bg / 2.0) * (1.0 - bg) * p.c_plus,
        bg * (1.0 - bg * bg) * p.c_plus,
    )
    return LegupConditions(min_r, min_c_minus, p.r >= min_r and p.c_minus >= min_c_minus)


def natural_sequence(problem: DesignProblem) -> Ladder:
    """Ladder whose thresholds sit at the per-level drift fixed points.

    mu_l = delta*(l-1)/(1-gamma), with enough levels that the top
    threshold reaches M. At each threshold the depreciation and the
    boost cancel exactly, so an agent that improved its way to mu_l
    never falls below it again; requires the delta > 0 floors to hold.
    """
    p = problem.params
    cond = legup_feasibility_conditions(p)
    if not cond.satisfied:
        raise ValueError(
            f"boost conditions unsatisfied: need r >= {cond.min_r:g} "
            f"(got {p.r:g}) and c_minus >= {cond.min_c_minus:g} (got {p.c_minus:g})"
        )
    ratio = (1.0 - p.gamma) * problem.M / p.delta
    # shave an ulp-scale margin so 4.0-epsilon rounding noise still gives 4
    levels = max(math.ceil(ratio - 1e-9) + 1, 2)
    return Ladder(tuple(natural_equilibrium(l, p) for l in range(1, levels + 1)))


@dataclass(frozen=True)
class Violation:
    """Constraints an initial attribute breaks, and when it first does."""

    x0: float
    constraints: tuple[str, ...]
    first_t: int | None


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violated: tuple[Violation, ...]
    witness: Trajectory | None
    convergence: ConvergenceReport | None = None

    def __post_init__(self) -> None:
        if self.feasible != (len(self.violated) == 0):
            raise ValueError("feasible must mean exactly: no violations")


def _default_x0_set(ladder: Ladder, grid: GridSpec) -> list[float]:
    # everything the entry classifier can see, plus the top threshold
    pts = grid.points[grid.points <= ladder.threshold(2) + 1e-12]
    xs = set(float(x) for x in pts)
    xs.add(float(ladder.threshold(2)))
    xs.add(float(ladder.top))
    return sorted(xs)


def verify_feasible(
    ladder: Ladder,
    problem: DesignProblem,
    grid: GridSpec,
    x0_set: Sequence[float] | None = None,
    horizon: int = 200,
) -> FeasibilityReport:
    """Check that a ladder drives honest climbing to the top from every x0.

    One solve, then one rollout per initial attribute from the bottom
    level. A start violates no-gaming if any step games (beyond lookup
    roundoff), top-level if the final fifth of the horizon is not spent
    at the top, and attribute-target if the post-action attribute dips
    below M - dx there. The witness is the first offending trajectory,
    truncated just past its first bad step.

    A top threshold below the top level's drift fixed point is rejected
    outright: an agent just under it could game once and coast on the
    boost forever, so no simulation is needed.
    """
    p = problem.params
    fp_top = natural_equilibrium(ladder.levels, p)
    if ladder.top < fp_top - 1e-12 * max(1.0, fp_top):
        coast = max(0.0, (ladder.top - p.delta * (ladder.levels - 1)) / p.gamma)
        return FeasibilityReport(
            feasible=False,
            violated=(Violation(coast, (NO_GAMING,), None),),
            witness=None,
        )

    policy = value_iterate(ladder, p, grid)
    report = convergence_report(policy, p)
    if x0_set is None:
        x0_set = _default_x0_set(ladder, grid)

    window = max(1, math.ceil(0.2 * horizon))
    violations: list[Violation] = []
    witness: Trajectory | None = None
    for x0 in x0_set:
        traj = rollout(policy, AgentState(1, float(x0)), ladder, p, horizon)
        bad: dict[str, int] = {}
        for s in traj.steps:
            if s.action.a_minus > _GAMING_ATOL:
                bad[NO_GAMING] = s.t
                break
        for s in traj.steps[-window:]:
            if s.level_after != ladder.levels:
                bad.setdefault(TOP_LEVEL, s.t)
                break
        for s in traj.steps[-window:]:
            if s.x_post < problem.M - grid.dx:
                bad.setdefault(ATTRIBUTE_TARGET, s.t)
                break
        if bad:
            names = tuple(n for n in (NO_GAMING, ATTRIBUTE_TARGET, TOP_LEVEL) if n in bad)
            first_t = min(bad.values())
            violations.append(Violation(float(x0), names, first_t))
            if witness is None:
                witness = Trajectory(
                    steps=traj.steps[: first_t + 1],
                    final_state=traj.states[first_t + 1],
                )
    return FeasibilityReport(
        feasible=not violations,
        violated=tuple(violations),
        witness=witness,
        convergence=report,
    )


@dataclass(frozen=True)
class GreedyResult:
    """Outcome of the level-by-level threshold search.

    thresholds always starts with the entry threshold 0.0; ladder is
    None when no level beyond the first could be added. convergence
    holds one report per inner solve, in execution order.
    """

    ladder: Ladder | None
    thresholds: tuple[float, ...]
    diagnostic: str
    convergence: tuple[ConvergenceReport, ...] = ()

    @property
    def first_threshold(self) -> float:
        return self.thresholds[1] if len(self.thresholds) > 1 else 0.0

    @property
    def max_level(self) -> int:
        return len(self.thresholds)

    @property
    def max_attribute(self) -> float:
        return self.thresholds[-1]


def greedy_thresholds(
    problem: DesignProblem,
    grid: GridSpec,
    epsilon: float = 1e-3,
    max_levels: int = 50,
) -> GreedyResult:
    """Stack thresholds one level at a time, each as high as sustainable.

    For each new level the candidate threshold is bisected over
    [max(previous threshold, drift fixed point), x_max]. A candidate m
    is accepted when the solved best response (a) crosses into the new
    level from the entry state by pure improvement, and (b) still
    improves at the new level one step later, so the level is held
    honestly rather than gamed or abandoned. Candidates are snapped to
    the grid; the bisection bracket stays real-valued and stops once it
    is narrower than epsilon. The search ends when the arrival
    attribute reaches M, no threshold at least epsilon above the last
    one is acceptable, or max_levels is hit.

    Parameters where gaming undercuts the long-run cost of improvement
    can never satisfy (a); they short-circuit to an empty result.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    p = problem.params
    if not check_incentivizable(p):
        return GreedyResult(
            ladder=None,
            thresholds=(0.0,),
            diagnostic="not incentivizable: gaming is cheaper than improvement",
        )

    mu = [0.0]
    x_arrive = 0.0  # post-action attribute on arrival at the current top level
    warm: np.ndarray | None = None
    reports: list[ConvergenceReport] = []
    diagnostic = ""

    def warm_grid(levels: int) -> ValueGrid | None:
        if warm is None:
            return None
        w = warm
        if w.shape[0] < levels:
            w = np.vstack([w, np.repeat(w[-1:], levels - w.shape[0], axis=0)])
        elif w.shape[0] > levels:
            w = w[:levels]
        return ValueGrid(grid, w)

    while x_arrive < problem.M:
        level = len(mu) + 1
        if level > max_levels:
            diagnostic = f"level cap {max_levels} reached below target M={problem.M:g}"
            break
        entry_x = p.gamma * x_arrive + p.delta * (level - 2)
        lo = max(mu[-1], natural_equilibrium(level, p))
        hi = grid.x_max
        tested: dict[float, tuple[bool, float]] = {}

        def try_candidate(m: float) -> tuple[bool, float]:
            nonlocal warm
            if m in tested:
                return tested[m]
            candidate = Ladder(tuple(mu) + (m,))
            policy = value_iterate(
                candidate, p, grid, warm_start=warm_grid(candidate.levels)
            )
            warm = policy.W.values
            reports.append(convergence_report(policy, p))
            act = policy.action(level - 1, entry_x)
            x_post = entry_x + act.a_plus
            z = x_post + act.a_minus
            next_x = p.gamma * x_post + p.delta * (level - 1)
            ok = (
                act.a_minus == 0.0
                and z >= m
                and policy.action(level, next_x).a_plus > 0.0
            )
            tested[m] = (ok, x_post)
            return tested[m]

        def snap(value: float) -> float:
            # keep one grid point of headroom: the solver needs x_max > top
            i = min(grid.nearest_index(value), grid.n_points - 2)
            return float(grid.points[i])

        best: tuple[float, float] | None = None
        while hi - lo > epsilon:
            m_raw = 0.5 * (lo + hi)
            ok, x_post = try_candidate(snap(m_raw))
            if ok:
                lo = m_raw
                m = snap(m_raw)
                if best is None or m > best[0]:
                    best = (m, x_post)
            else:
                hi = m_raw
        if best is None:
            # the bracket start was never a midpoint; test it before giving up
            m0 = snap(lo)
            if m0 > mu[-1]:
                ok, x_post = try_candidate(m0)
                if ok:
                    best = (m0, x_post)
        if best is None or best[0] - mu[-1] < epsilon:
            if len(mu) == 1:
                diagnostic = "no acceptable first threshold"
            else:
                diagnostic = (
                    f"stalled at level {level}: no sustainable threshold "
                    f"above {mu[-1]:g}"
                )
            break
        mu.append(best[0])
        x_arrive = best[1]
    else:
        diagnostic = f"target M={problem.M:g} reached"

    ladder = Ladder(tuple(mu)) if len(mu) >= 2 else None
    return GreedyResult(
        ladder=ladder,
        thresholds=tuple(mu),
        diagnostic=diagnostic,
        convergence=tuple(reports),
    )


#: Fixed column order for sweep CSV output.
SWEEP_PARAM_COLUMNS = ("beta", "gamma", "delta", "c_plus", "c_minus", "r", "M")


def sweep_entry(
    problem: DesignProblem,
    grid: GridSpec,
    epsilon: float = 1e-3,
    max_levels: int = 50,
) -> dict[str, float]:
    """One greedy run shaped as a flat record for CSV sweeps.

    Top-level function so process pools can pickle it.
    """
    result = greedy_thresholds(problem, grid, epsilon=epsilon, max_levels=max_levels)
    p = problem.params
    record: dict[str, float] = {
        "beta": p.beta,
        "gamma": p.gamma,
        "delta": p.delta,
        "c_plus": p.c_plus,
        "c_minus": p.c_minus,
        "r": problem.r,
        "M": problem.M,
    }
    for i, m in enumerate(result.thresholds, start=1):
        record[f"mu_{i}"] = m
    record["max_level"] = result.max_level
    record["max_attribute"] = result.max_attribute
    return record


def write_sweep_csv(records: Iterable[Mapping[str, float]], path) -> None:
    """Write sweep records with a deterministic, padded column layout.

    Threshold columns run up to the deepest ladder in the batch; rows
    with fewer levels leave the extras blank. Floats are written with
    repr so a reader recovers them bit-for-bit.
    """
    rows = list(records)
    deepest = max((int(r["max_level"]) for r in rows), default=1)
    columns = (
        list(SWEEP_PARAM_COLUMNS)
        + [f"mu_{i}" for i in range(1, deepest + 1)]
        + ["max_level", "max_attribute"]
    )
    def cell(row: Mapping[str, float], column: str):
        if column not in row:
            return ""
        if column == "max_level":
            return int(row[column])
        return repr(float(row[column]))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow([cell(r, c) for c in columns])
