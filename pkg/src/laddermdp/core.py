"""Model constants, the classifier ladder, and one-step agent dynamics.

The agent occupies a level ``l`` of a ladder of ``L`` ternary threshold
classifiers and carries a non-negative attribute ``x``. Each step it
spends improvement effort ``a_plus`` (raises attribute and feature) and
gaming effort ``a_minus`` (raises the feature only). The classifier at
its current level sees ``z = x + a_plus + a_minus`` and promotes,
retains, or relegates; the next attribute is ``gamma * (x + a_plus)``
plus a per-level boost ``delta * (l' - 1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "NEGATIVE_CLAMP",
    "Action",
    "AgentState",
    "ClassifierOutcome",
    "Ladder",
    "ModelParams",
    "check_incentivizable",
    "classify",
    "impossibility_general",
    "natural_equilibrium",
    "step",
]

# Inputs within this distance below zero are treated as floating-point
# noise and clamped; anything more negative is a caller error.
NEGATIVE_CLAMP = 1e-12


def _clamped_nonneg(value: float, name: str) -> float:
    if value < 0.0:
        if value >= -NEGATIVE_CLAMP:
            return 0.0
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


@dataclass(frozen=True)
class ModelParams:
    """Scalar model constants.

    beta     discount factor, in (0, 1)
    gamma    attribute retention factor, in (0, 1)
    delta    per-level leg-up boost, >= 0
    c_plus   unit cost of improvement effort, > 0
    c_minus  unit cost of gaming effort, > 0
    r        per-level reward rate, > 0
    theta    classifier weight, fixed to 1
    """

    beta: float
    gamma: float
    delta: float
    c_plus: float
    c_minus: float
    r: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        object.__setattr__(self, "delta", _clamped_nonneg(self.delta, "delta"))
        if self.c_plus <= 0.0:
            raise ValueError(f"c_plus must be > 0, got {self.c_plus}")
        if self.c_minus <= 0.0:
            raise ValueError(f"c_minus must be > 0, got {self.c_minus}")
        if self.r <= 0.0:
            raise ValueError(f"r must be > 0, got {self.r}")
        if self.theta != 1.0:
            raise ValueError("theta is fixed to 1")


@dataclass(frozen=True)
class Ladder:
    """Threshold vector of the classifier ladder, 1-indexed via threshold().

    mu[0] is the entry threshold and must be 0; thresholds are
    non-decreasing. A ladder has at least two levels.
    """

    mu: tuple[float, ...]

    def __init__(self, mu) -> None:
        object.__setattr__(self, "mu", tuple(float(m) for m in mu))
        if len(self.mu) < 2:
            raise ValueError(f"ladder needs >= 2 levels, got {len(self.mu)}")
        if self.mu[0] != 0.0:
            raise ValueError(f"mu_1 must be 0, got {self.mu[0]}")
        for a, b in zip(self.mu, self.mu[1:]):
            if b < a:
                raise ValueError(f"thresholds must be non-decreasing: {a} > {b}")
        if any(not math.isfinite(m) for m in self.mu):
            raise ValueError("thresholds must be finite")

    @property
    def levels(self) -> int:
        return len(self.mu)

    def threshold(self, level: int) -> float:
        """mu_level for level in 1..L."""
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        return self.mu[level - 1]

    @property
    def top(self) -> float:
        return self.mu[-1]


@dataclass(frozen=True)
class AgentState:
    """Level (1..L) and pre-action attribute (>= 0)."""

    level: int
    attribute: float

    def __post_init__(self) -> None:
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")
        object.__setattr__(
            self, "attribute", _clamped_nonneg(self.attribute, "attribute")
        )


@dataclass(frozen=True)
class Action:
    """Non-negative improvement and gaming efforts."""

    a_plus: float
    a_minus: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a_plus", "a_minus"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, _clamped_nonneg(value, name))


class ClassifierOutcome(enum.IntEnum):
    PROMOTE = 1
    STAY = 0
    RELEGATE = -1


def classify(
    ladder: Ladder, level: int, z: float, params: ModelParams
) -> ClassifierOutcome:
    """Ternary decision of the level-``level`` classifier on feature ``z``.

    Promote iff theta*z >= mu[level+1] (and a higher level exists);
    relegate iff theta*z < mu[level] (and a lower level exists); stay
    otherwise. Equality at mu[level] retains the level, equality at
    mu[level+1] promotes.
    """
    if not 1 <= level <= ladder.levels:
        raise ValueError(f"level {level} outside 1..{ladder.levels}")
    z = _clamped_nonneg(z, "z")
    score = params.theta * z
    if level < ladder.levels and score >= ladder.threshold(level + 1):
        return ClassifierOutcome.PROMOTE
    if level > 1 and score < ladder.threshold(level):
        return ClassifierOutcome.RELEGATE
    return ClassifierOutcome.STAY


def step(
    state: AgentState, action: Action, ladder: Ladder, params: ModelParams
) -> tuple[AgentState, float, float]:
    """One transition; returns (next state, reward, effort cost).

    The feature is z = x + a_plus + a_minus, the post-action attribute
    x_post = x + a_plus. The classifier moves the level, the reward is
    r*(l'-1), and the next attribute is gamma*x_post + delta*(l'-1).
    """
    x_post = state.attribute + action.a_plus
    z = x_post + action.a_minus
    outcome = classify(ladder, state.level, z, params)
    next_level = state.level + int(outcome)
    reward = params.r * (next_level - 1)
    cost = params.c_plus * action.a_plus + params.c_minus * action.a_minus
    next_attr = params.gamma * x_post + params.delta * (next_level - 1)
    return AgentState(next_level, next_attr), reward, cost


def check_incentivizable(params: ModelParams) -> bool:
    """True iff (1 - beta*gamma)*c_plus < c_minus, strictly.

    Below this line no ladder can ever elicit improvement effort:
    gaming one unit of feature is cheaper than the effective long-run
    cost of improving it. Exact ties count as not incentivizable; a
    relative 1e-12 band absorbs rounding of the product beta*gamma so
    that decimally-equal inputs land on the tie.
    """
    crit = (1.0 - params.beta * params.gamma) * params.c_plus
    return params.c_minus - crit > 1e-12 * max(1.0, crit)


def impossibility_general(lipschitz_H: float, params: ModelParams) -> bool:
    """Improvement is never optimal at a level whose attribute map has
    Lipschitz constant ``lipschitz_H``, iff (1 - beta*H)*c_plus > c_minus.

    With H = gamma this reduces to the complement of
    check_incentivizable (up to the boundary case).
    """
    if lipschitz_H < 0.0:
        raise ValueError(f"lipschitz_H must be >= 0, got {lipschitz_H}")
    return (1.0 - params.beta * lipschitz_H) * params.c_plus > params.c_minus


def natural_equilibrium(level: int, params: ModelParams) -> float:
    """Attribute fixed point delta*(level-1)/(1-gamma) at a held level."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    return params.delta * (level - 1) / (1.0 - params.gamma)
