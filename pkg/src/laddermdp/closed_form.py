"""Analytic value curves and optimal actions for a single-threshold ladder.

With two levels the transformed value W is the same at both levels and
has an explicit piecewise-linear form on [0, mu]. Which form applies
depends on where mu sits relative to a handful of cutoffs; the regimes
are tagged LegUp (boost alone carries the agent past the threshold) and
CaseA..CaseD in increasing order of mu. All segment slopes share the
pattern c_plus - ((1 - (beta*gamma)^k)/(1 - beta*gamma)) * c_minus for
the segment index k; the construction differs per regime only in where
the knots fall.

Beyond mu the agent coasts: W follows the zero-action recursion
W(x) = c_tilde*x - r_tilde + beta*W(gamma*x + delta) until the
attribute decays into [0, mu]. That recursion telescopes to a finite
geometric sum, which value() evaluates directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Action, ModelParams, check_incentivizable

__all__ = [
    "IncentiveDomainError",
    "PiecewiseLinearW",
    "PreconditionError",
    "RegionBounds",
    "RegimeTag",
    "TwoLevelPolicyParams",
    "TwoLevelRegime",
    "classify_regime",
    "g_value",
    "k_index",
    "policy_closed",
    "region_boundaries",
    "two_level_policy_params",
    "w_closed",
]


class IncentiveDomainError(ValueError):
    """Gaming is too cheap for improvement to ever be incentivized."""


class PreconditionError(ValueError):
    """A regime's stated parameter condition fails; no closed form applies."""


class RegimeTag(enum.Enum):
    LEG_UP = "LegUp"
    CASE_A = "CaseA"
    CASE_B = "CaseB"
    CASE_C = "CaseC"
    CASE_D = "CaseD"


def k_index(params: ModelParams) -> int:
    """Number of distinct segment slopes before improvement stops paying.

    K = ceil(log_{beta*gamma}(1 - (1-beta*gamma)*c_plus/c_minus)).
    """
    if not check_incentivizable(params):
        raise IncentiveDomainError(
            "requires c_minus > (1 - beta*gamma)*c_plus; got "
            f"c_minus={params.c_minus} <= {(1 - params.beta * params.gamma) * params.c_plus}"
        )
    bg = params.beta * params.gamma
    arg = 1.0 - (1.0 - bg) * params.c_plus / params.c_minus
    k = math.ceil(math.log(arg) / math.log(bg) - 1e-12)
    return max(k, 1)


def _slope(k: int, params: ModelParams) -> float:
    """Slope of segment k: c_plus - ((1-(beta*gamma)^k)/(1-beta*gamma))*c_minus."""
    bg = params.beta * params.gamma
    return params.c_plus - ((1.0 - bg**k) / (1.0 - bg)) * params.c_minus


def g_value(mu: float, params: ModelParams) -> float:
    """Stationary cost of improving to mu every period and staying there."""
    r_eff = params.r + params.beta * params.c_plus * params.delta
    c_eff = (1.0 - params.beta * params.gamma) * params.c_plus
    return (c_eff * mu - r_eff) / (1.0 - params.beta)


class RegionBounds(NamedTuple):
    mu_lower: float
    mu_upper: float
    degenerate: bool


def region_boundaries(params: ModelParams) -> RegionBounds:
    """The two delta-independent mu cutoffs separating the upper regimes.

    mu_lower = (c_minus - (1-beta)*c_plus) * r / (beta*(1-gamma)*c_plus*c_minus);
    mu_upper = max(mu_lower, r / ((1-gamma^(K-1))*c_minus)). With K = 1 the
    second term is undefined; we return mu_upper = mu_lower and flag the
    result degenerate (the middle regime is empty).
    """
    k = k_index(params)
    mu_lower = (
        (params.c_minus - (1.0 - params.beta) * params.c_plus)
        * params.r
        / (params.beta * (1.0 - params.gamma) * params.c_plus * params.c_minus)
    )
    if k == 1:
        return RegionBounds(mu_lower, mu_lower, True)
    second = params.r / ((1.0 - params.gamma ** (k - 1)) * params.c_minus)
    return RegionBounds(mu_lower, max(mu_lower, second), False)


@dataclass(frozen=True)
class TwoLevelRegime:
    """Regime tag plus the four mu cutoffs that produced it.

    boundaries = (leg-up upper, CaseA upper, CaseB upper, CaseC upper);
    each interval is half-open, equality falling to the right-hand case.
    """

    tag: RegimeTag
    boundaries: tuple[float, float, float, float]


def classify_regime(mu: float, params: ModelParams) -> TwoLevelRegime:
    if mu < 0.0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    shift = params.delta / (1.0 - params.gamma)
    bounds = region_boundaries(params)
    r_eff = params.r + params.beta * params.c_plus * params.delta
    c_eff = (1.0 - params.beta * params.gamma) * params.c_plus
    cuts = (
        shift,
        max(shift, r_eff / c_eff),
        bounds.mu_lower + shift,
        bounds.mu_upper + shift,
    )
    if mu < cuts[0]:
        tag = RegimeTag.LEG_UP
    elif mu < cuts[1]:
        tag = RegimeTag.CASE_A
    elif mu < cuts[2]:
        tag = RegimeTag.CASE_B
    elif mu < cuts[3]:
        tag = RegimeTag.CASE_C
    else:
        tag = RegimeTag.CASE_D
    return TwoLevelRegime(tag=tag, boundaries=cuts)


def _legup_preconditions(params: ModelParams) -> None:
    min_c = max(
        params.beta * params.gamma * params.c_plus,
        (1.0 - params.beta * params.gamma) * params.c_plus,
    )
    if params.c_minus < min_c:
        raise PreconditionError(
            f"requires c_minus >= max(beta*gamma, 1-beta*gamma)*c_plus = {min_c}; "
            f"got c_minus={params.c_minus}"
        )
    min_r = (
        (1.0 - params.beta)
        * params.c_minus
        * params.delta
        / ((1.0 - params.gamma) * (1.0 - params.beta * params.gamma))
    )
    if params.r < min_r:
        raise PreconditionError(
            "requires r >= (1-beta)*c_minus*delta/((1-gamma)*(1-beta*gamma)) "
            f"= {min_r}; got r={params.r}"
        )


def _legup_sequence(mu: float, params: ModelParams) -> tuple[list[float], list[float]]:
    """Descending pivots s_k and curve values xi_k, k = 0..K-1.

    s_0 = mu, xi_0 = c_plus*mu - r/(1-beta); each earlier pivot undoes one
    decay step, s_k = (s_{k-1} - delta)/gamma, and the curve drops along
    slope k.
    """
    k_max = k_index(params)
    s = [mu]
    xi = [params.c_plus * mu - params.r / (1.0 - params.beta)]
    for k in range(1, k_max):
        s_k = (s[-1] - params.delta) / params.gamma
        xi.append(_slope(k, params) * (s_k - s[-1]) + xi[-1])
        s.append(s_k)
    return s, xi


def _upper_sequence(mu: float, params: ModelParams) -> tuple[list[float], list[float], int]:
    """Ascending knots s_k and values xi_k for the two upper regimes.

    s_0 = xi_0 = 0; segment [s_{k-1}, s_k) carries slope k-1. Returns the
    K-1 interior knots plus the shared index K.
    """
    k_max = k_index(params)
    g, d = params.gamma, params.delta
    cm, r = params.c_minus, params.r
    s = [0.0]
    xi = [0.0]
    for k in range(1, k_max):
        s_k = ((1.0 - g) * (cm * mu - r) - (1.0 - g ** (k - 1)) * cm * d) / (
            g ** (k - 1) * (1.0 - g) * cm
        )
        xi.append(_slope(k - 1, params) * (s_k - s[-1]) + xi[-1])
        s.append(s_k)
    return s, xi, k_max


def _terminal_plateau(
    mu: float, params: ModelParams, s: list[float], xi: list[float], k_max: int
) -> tuple[float, float]:
    """Terminal knot (s_K, xi_K) closing the gamed region against mu."""
    bg = params.beta * params.gamma
    q = params.beta * (1.0 - bg ** (k_max - 1)) / (1.0 - bg)
    alt = (
        (params.c_plus - q * params.gamma * params.c_minus) * mu
        - (params.r + q * params.c_minus * params.delta)
        + params.beta * (xi[-1] - _slope(k_max - 1, params) * s[-1])
    )
    xi_k = min(g_value(mu, params), alt)
    s_k = s[-1] + (xi_k - xi[-1]) / _slope(k_max - 1, params)
    return s_k, xi_k


@dataclass(frozen=True)
class PiecewiseLinearW:
    """Closed-form W on [0, mu] plus the zero-action tail beyond mu.

    breakpoints are ascending; values has one entry per breakpoint;
    slopes has one entry per segment between consecutive breakpoints.
    Below the first breakpoint the curve is flat (only reachable in the
    leg-up regime, where the first pivot may be negative and is then
    clipped away).
    """

    regime: TwoLevelRegime
    mu: float
    params: ModelParams
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]

    def value(self, x):
        xs = np.asarray(x, dtype=float)
        out = np.empty_like(xs)
        below = xs <= self.mu
        out[below] = np.interp(xs[below], self.breakpoints, self.values)
        if np.any(~below):
            out[~below] = self._tail(xs[~below])
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self.value(x)

    def _tail(self, xs: np.ndarray) -> np.ndarray:
        """Zero-action coasting values for x > mu, as a geometric sum."""
        p = self.params
        if self.regime.tag is RegimeTag.LEG_UP:
            # boost keeps the attribute above mu forever
            return p.c_plus * xs - p.r / (1.0 - p.beta)
        shift = p.delta / (1.0 - p.gamma)
        if self.mu - shift <= 1e-12:
            return p.c_plus * xs - p.r / (1.0 - p.beta)
        c_eff = (1.0 - p.beta * p.gamma) * p.c_plus
        r_eff = p.r + p.beta * p.c_plus * p.delta
        # steps until gamma-decay toward shift re-enters [0, mu]
        n = np.ceil(
            np.log((self.mu - shift) / (xs - shift)) / math.log(p.gamma)
        ).astype(np.intp)
        n = np.maximum(n, 0)
        x_n = shift + p.gamma**n * (xs - shift)
        bump = x_n > self.mu + 1e-12
        n[bump] += 1
        x_n[bump] = shift + p.gamma ** n[bump] * (xs[bump] - shift)
        bn = p.beta**n
        bgn = (p.beta * p.gamma) ** n
        inside = np.interp(x_n, self.breakpoints, self.values)
        return (
            c_eff * shift * (1.0 - bn) / (1.0 - p.beta)
            + c_eff * (xs - shift) * (1.0 - bgn) / (1.0 - p.beta * p.gamma)
            - r_eff * (1.0 - bn) / (1.0 - p.beta)
            + bn * inside
        )


def _dedupe(knots: list[float], vals: list[float]) -> tuple[tuple, tuple]:
    """Drop zero-width segments; keep the later value on exact ties."""
    out_k: list[float] = []
    out_v: list[float] = []
    for k, v in zip(knots, vals):
        if out_k and k - out_k[-1] <= 1e-15:
            out_v[-1] = v
            continue
        out_k.append(k)
        out_v.append(v)
    return tuple(out_k), tuple(out_v)


def w_closed(mu: float, params: ModelParams) -> PiecewiseLinearW:
    """Closed-form W for the single-threshold ladder with threshold mu."""
    regime = classify_regime(mu, params)
    tag = regime.tag

    if tag is RegimeTag.LEG_UP:
        _legup_preconditions(params)
        s, xi = _legup_sequence(mu, params)
        knots = list(reversed(s))
        vals = list(reversed(xi))
        slopes = [_slope(k, params) for k in range(len(s) - 1, 0, -1)]
    elif tag is RegimeTag.CASE_A:
        g = g_value(mu, params)
        knots, vals, slopes = [0.0, mu], [g, g], [0.0]
    elif tag is RegimeTag.CASE_B:
        g = g_value(mu, params)
        omega = max(g, 0.0) / params.c_plus
        knots = [0.0, omega, mu]
        vals = [0.0, params.c_plus * omega, params.c_plus * omega]
        slopes = [params.c_plus, 0.0]
    else:
        s, xi, k_max = _upper_sequence(mu, params)
        if tag is RegimeTag.CASE_C:
            s_k, xi_k = _terminal_plateau(mu, params, s, xi, k_max)
            knots = s + [s_k, mu]
            vals = xi + [xi_k, xi_k]
            slopes = [_slope(k, params) for k in range(k_max)] + [0.0]
        else:
            # gamed region swallows the plateau: cap segments at mu
            active = [k for k in range(len(s)) if s[k] < mu]
            top = active[-1]
            knots = s[: top + 1] + [mu]
            vals = xi[: top + 1] + [xi[top] + _slope(top, params) * (mu - s[top])]
            slopes = [_slope(k, params) for k in range(top + 1)]

    knots_t, vals_t = _dedupe(knots, vals)
    if len(knots_t) < len(knots):
        slopes = [
            (b - a) / (k1 - k0)
            for a, b, k0, k1 in zip(vals_t, vals_t[1:], knots_t, knots_t[1:])
        ]
    return PiecewiseLinearW(
        regime=regime,
        mu=float(mu),
        params=params,
        breakpoints=knots_t,
        values=vals_t,
        slopes=tuple(slopes),
    )


@dataclass(frozen=True)
class TwoLevelPolicyParams:
    """Action-region cutoffs of the closed-form optimal strategy.

    x_circ: mixed-strategy pivot (leg-up regime only, else 0);
    x_lower: onset of any nonzero action; x_upper: switch point between
    gaming and improvement; mu_lower/mu_upper: the regime cutoffs.
    """

    x_circ: float
    x_lower: float
    x_upper: float
    mu_lower: float
    mu_upper: float


def two_level_policy_params(mu: float, params: ModelParams) -> TwoLevelPolicyParams:
    regime = classify_regime(mu, params)
    bounds = region_boundaries(params)
    tag = regime.tag
    if tag is RegimeTag.LEG_UP:
        _legup_preconditions(params)
        s, _ = _legup_sequence(mu, params)
        x_circ = max(0.0, s[-1])
        return TwoLevelPolicyParams(x_circ, 0.0, x_circ, *bounds[:2])
    if tag in (RegimeTag.CASE_A, RegimeTag.CASE_B):
        onset = max(0.0, g_value(mu, params) / params.c_plus)
        return TwoLevelPolicyParams(0.0, onset, onset, *bounds[:2])
    onset = mu - params.r / params.c_minus
    if tag is RegimeTag.CASE_C:
        s, xi, k_max = _upper_sequence(mu, params)
        switch, _ = _terminal_plateau(mu, params, s, xi, k_max)
    else:
        switch = mu
    return TwoLevelPolicyParams(0.0, onset, switch, *bounds[:2])


def policy_closed(mu: float, params: ModelParams, x: float) -> Action:
    """Optimal (improvement, gaming) action at attribute x."""
    if x >= mu:
        return Action(0.0, 0.0)
    pp = two_level_policy_params(mu, params)
    tag = classify_regime(mu, params).tag
    if tag is RegimeTag.LEG_UP:
        if x >= pp.x_circ:
            return Action(0.0, mu - x)
        return Action(pp.x_circ - x, mu - pp.x_circ)
    if tag in (RegimeTag.CASE_A, RegimeTag.CASE_B):
        if x >= pp.x_lower:
            return Action(mu - x, 0.0)
        return Action(0.0, 0.0)
    if tag is RegimeTag.CASE_C:
        if pp.x_lower <= x < pp.x_upper:
            return Action(0.0, mu - x)
        if x >= pp.x_upper:
            return Action(mu - x, 0.0)
        return Action(0.0, 0.0)
    if x >= pp.x_lower:
        return Action(0.0, mu - x)
    return Action(0.0, 0.0)
