"""Deterministic rollouts, steady-state detection, and population metrics.

A rollout looks the converged policy up at the nearest grid point of
the current attribute (actions are discontinuous in x, so nearest
neighbor rather than interpolation; the quantization is at most half a
grid step) and drives `core.step`. Everything downstream is exact
arithmetic on the resulting trajectories: no sampling anywhere, so
population statistics are weighted sums over the distribution's support.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import Action, AgentState, Ladder, ModelParams, step
from .solver import Policy

if TYPE_CHECKING:
    from .principal import InitialDistribution

__all__ = [
    "PopulationAggregate",
    "SteadyState",
    "Trajectory",
    "TrajectoryStep",
    "improvement_fraction",
    "population_rollout",
    "rollout",
    "steady_state",
    "write_trajectory_csv",
]

FIXED_POINT = "fixed-point"
CYCLE = "cycle"
NO_STEADY_STATE = "none-within-horizon"


@dataclass(frozen=True)
class TrajectoryStep:
    """One transition, stored exactly as `core.step` produced it."""

    t: int
    level_before: int
    x_before: float
    action: Action
    z: float
    x_post: float
    level_after: int
    reward: float
    cost: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]
    final_state: AgentState

    def __post_init__(self) -> None:
        for t, s in enumerate(self.steps):
            if s.t != t:
                raise ValueError(f"step {t} carries t={s.t}; must be contiguous from 0")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> list[AgentState]:
        """Visited states, length len(self)+1 including the final one."""
        out = [AgentState(s.level_before, s.x_before) for s in self.steps]
        out.append(self.final_state)
        return out

    def series(self, field: str) -> np.ndarray:
        if field in ("a_plus", "a_minus"):
            return np.array([getattr(s.action, field) for s in self.steps])
        return np.array([getattr(s, field) for s in self.steps])

    def discounted_return(self, beta: float) -> float:
        flows = self.series("reward") - self.series("cost")
        return float(flows @ beta ** np.arange(len(self.steps)))


def rollout(
    policy: Policy,
    initial: AgentState,
    ladder: Ladder,
    params: ModelParams,
    horizon: int,
) -> Trajectory:
    """Drive the policy forward `horizon` steps from `initial`."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if initial.attribute > policy.grid.x_max:
        raise ValueError(
            f"initial attribute {initial.attribute} exceeds grid x_max "
            f"{policy.grid.x_max}"
        )
    steps = []
    state = initial
    for t in range(horizon):
        action = policy.action(state.level, state.attribute)
        nxt, reward, cost = step(state, action, ladder, params)
        steps.append(
            TrajectoryStep(
                t=t,
                level_before=state.level,
                x_before=state.attribute,
                action=action,
                z=state.attribute + action.a_plus + action.a_minus,
                x_post=state.attribute + action.a_plus,
                level_after=nxt.level,
                reward=reward,
                cost=cost,
            )
        )
        state = nxt
    return Trajectory(steps=tuple(steps), final_state=state)


@dataclass(frozen=True)
class SteadyState:
    """Long-run behavior of a rollout.

    kind is one of "fixed-point", "cycle", "none-within-horizon".
    states holds the absorbing state (length 1), one settled cycle in
    temporal order (length = period), or nothing. entry_time is the
    first step index from which the reported pattern held to the end.
    """

    kind: str
    states: tuple[AgentState, ...]
    entry_time: int | None

    @property
    def state(self) -> AgentState:
        if not self.states:
            raise ValueError("no steady state was found")
        return self.states[0]

    @property
    def period(self) -> int:
        return len(self.states)


def _near(a: AgentState, b: AgentState, tol: float) -> bool:
    return a.level == b.level and abs(a.attribute - b.attribute) <= tol


def steady_state(
    policy: Policy,
    initial: AgentState,
    ladder: Ladder,
    params: ModelParams,
    horizon: int = 200,
) -> SteadyState:
    """Classify where the rollout settles.

    A state is absorbing when one extra step maps it to itself within
    two grid steps; cycles are matched at periods 2..2L over the tail of
    the trajectory. Detection works backward from the end so transient
    oscillations (level flapping before a lock-in) are never mistaken
    for the long-run pattern.
    """
    tol = 2.0 * policy.grid.dx
    states = rollout(policy, initial, ladder, params, horizon).states

    def advance(s: AgentState) -> AgentState:
        nxt, _, _ = step(s, policy.action(s.level, s.attribute), ladder, params)
        return nxt

    final = states[-1]
    if _near(advance(final), final, tol):
        entry = len(states) - 1
        while entry > 0 and _near(states[entry - 1], final, tol):
            entry -= 1
        return SteadyState(FIXED_POINT, (final,), entry)

    for period in range(2, 2 * ladder.levels + 1):
        if len(states) < 2 * period + 1:
            break
        tail = states[-(2 * period + 1) :]
        if all(_near(tail[i], tail[i + period], tol) for i in range(period + 1)):
            entry = len(states) - 1 - period
            while entry > 0 and _near(states[entry - 1], states[entry - 1 + period], tol):
                entry -= 1
            return SteadyState(CYCLE, tuple(states[-period:]), entry)

    return SteadyState(NO_STEADY_STATE, (), None)


def improvement_fraction(trajectory: Trajectory) -> np.ndarray:
    """Per-step a_plus/(a_plus+a_minus); NaN marks inactive steps."""
    a_plus = trajectory.series("a_plus")
    total = a_plus + trajectory.series("a_minus")
    with np.errstate(invalid="ignore"):
        return np.where(total > 0.0, a_plus / total, np.nan)


@dataclass(frozen=True)
class PopulationAggregate:
    """Mass-weighted per-step statistics over a support of rollouts."""

    mean_x_post: np.ndarray
    std_x_post: np.ndarray
    mean_improvement_fraction: np.ndarray
    trajectories: tuple[Trajectory, ...]


def population_rollout(
    policy: Policy,
    ladder: Ladder,
    params: ModelParams,
    dist: "InitialDistribution",
    horizon: int,
) -> PopulationAggregate:
    """Exact aggregation of one rollout per support point, all starting
    at the bottom level; means and standard deviations are weighted by
    the distribution's mass, and improvement fractions exclude inactive
    (NaN) steps from the weighting."""
    support = np.asarray(dist.support, dtype=float)
    mass = np.asarray(dist.mass, dtype=float)
    if support.size == 0:
        raise ValueError("distribution has empty support")
    trajectories = tuple(
        rollout(policy, AgentState(1, x0), ladder, params, horizon) for x0 in support
    )
    x_post = np.stack([t.series("x_post") for t in trajectories])
    mean = mass @ x_post
    std = np.sqrt(mass @ (x_post - mean) ** 2)

    frac = np.stack([improvement_fraction(t) for t in trajectories])
    active = ~np.isnan(frac)
    weight = np.where(active, mass[:, None], 0.0)
    denom = weight.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean_frac = np.where(
            denom > 0.0,
            np.nansum(weight * frac, axis=0) / np.where(denom > 0.0, denom, 1.0),
            np.nan,
        )
    return PopulationAggregate(
        mean_x_post=mean,
        std_x_post=std,
        mean_improvement_fraction=mean_frac,
        trajectories=trajectories,
    )


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Dump the step table with one row per transition."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "level", "x_pre", "a_plus", "a_minus", "z", "x_post", "reward", "cost"]
        )
        for s in trajectory.steps:
            writer.writerow(
                [
                    s.t,
                    s.level_before,
                    repr(s.x_before),
                    repr(s.action.a_plus),
                    repr(s.action.a_minus),
                    repr(s.z),
                    repr(s.x_post),
                    repr(s.reward),
                    repr(s.cost),
                ]
            )
