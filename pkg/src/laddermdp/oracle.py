"""Brute-force finite-horizon verification oracle.

Backward induction on the agent's utility-maximization problem over a
fine attribute grid, independent of the W-transform machinery: values
are plain discounted utilities, improvement options are enumerated
exhaustively over the grid, and the gaming action is maximized exactly
per improvement target (the only non-dominated gaming values are 0 and
the top-ups that exactly hit the stay or promote threshold, so
enumerating those three equals an arbitrarily fine gaming grid).

The per-state maximum over improvement targets x_tilde >= x is computed
with a suffix scan over net values; this is the same maximum as the
nested loop over (a_plus, a_minus) pairs, just evaluated in O(grid).
Used to certify expected values in the test suite and to cross-check
value_iterate on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Ladder, ModelParams

__all__ = [
    "OracleResult",
    "OracleSizeError",
    "OracleSpec",
    "brute_force_value",
    "truncation_bound",
]


class OracleSizeError(ValueError):
    """Instance exceeds the oracle's brute-force budget."""


@dataclass(frozen=True)
class OracleSpec:
    """Finite-horizon DP configuration."""

    x_max: float
    horizon: int = 60
    action_step: float = 0.01
    attr_step: float = 0.01

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.attr_step <= 0.0 or self.action_step <= 0.0:
            raise ValueError("steps must be positive")
        if self.x_max <= 0.0:
            raise ValueError(f"x_max must be positive, got {self.x_max}")
        stride = self.action_step / self.attr_step
        if abs(stride - round(stride)) > 1e-9:
            raise ValueError("action_step must be a multiple of attr_step")
        steps = self.x_max / self.attr_step
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError("x_max must be a multiple of attr_step")

    @property
    def stride(self) -> int:
        return round(self.action_step / self.attr_step)

    @property
    def n_points(self) -> int:
        return round(self.x_max / self.attr_step) + 1

    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_points)


def truncation_bound(ladder: Ladder, params: ModelParams, horizon: int) -> float:
    """Upper bound on the utility lost by stopping after `horizon` steps.

    The agent's residual utility lies in [0, r*(L-1)/(1-beta)]: it can
    always act lazily for 0, and cannot beat the full top-level reward
    stream.
    """
    top_reward = params.r * (ladder.levels - 1)
    return params.beta**horizon * top_reward / (1.0 - params.beta)


@dataclass(frozen=True)
class OracleResult:
    """Finite-horizon values and greedy first actions on the oracle grid."""

    spec: OracleSpec
    ladder: Ladder
    params: ModelParams
    points: np.ndarray
    values: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray

    def index_of(self, x: float) -> int:
        i = int(np.rint(x / self.spec.attr_step))
        return min(max(i, 0), self.spec.n_points - 1)

    def value_at(self, level: int, x: float) -> float:
        return float(self.values[level - 1, self.index_of(x)])

    def action_at(self, level: int, x: float) -> tuple[float, float]:
        i = self.index_of(x)
        return float(self.a_plus[level - 1, i]), float(self.a_minus[level - 1, i])


def _interp_table(xs: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(base index, fraction) tables for linear interpolation at `targets`."""
    dx = xs[1] - xs[0]
    pos = np.clip(targets, 0.0, xs[-1]) / dx
    base = np.minimum(pos.astype(np.intp), xs.size - 2)
    return base, pos - base


def _strided_suffix_max(g: np.ndarray, stride: int) -> np.ndarray:
    """out[i] = max(g[i], g[i+stride], g[i+2*stride], ...) along the last axis."""
    out = np.empty_like(g)
    for c in range(stride):
        seg = g[..., c::stride]
        out[..., c::stride] = np.maximum.accumulate(seg[..., ::-1], axis=-1)[..., ::-1]
    return out


class _LayerWorkspace:
    """Per-(level, landing) static terms and interpolation tables.

    Candidate order per improvement target: keep current feature (no
    gaming), top up to the stay threshold, top up to the promote
    threshold. The landing of the no-gaming candidate depends on where
    x_tilde falls relative to the two thresholds.
    """

    def __init__(self, ladder: Ladder, params: ModelParams, spec: OracleSpec):
        xs = spec.points()
        L, n = ladder.levels, xs.size
        self.beta = params.beta
        self.landing = np.empty((3, L, n), dtype=np.intp)
        self.base = np.empty((3, L, n), dtype=np.intp)
        self.frac = np.empty((3, L, n))
        self.static = np.empty((3, L, n))

        for lvl in range(1, L + 1):
            lo = ladder.threshold(lvl)
            up = min(lvl + 1, L)
            hi = ladder.threshold(up) if lvl < L else math.inf

            natural = np.full(n, lvl, dtype=np.intp)
            if lvl > 1:
                natural[xs < lo] = lvl - 1
            if lvl < L:
                natural[xs >= hi] = lvl + 1
            stay_top = np.maximum(lo - xs, 0.0)
            pr_top = np.maximum(ladder.threshold(up) - xs, 0.0)

            cand = (
                (natural, np.zeros(n)),
                (np.full(n, lvl, dtype=np.intp), stay_top),
                (np.full(n, up, dtype=np.intp), pr_top),
            )
            for b, (land, topup) in enumerate(cand):
                cont = params.gamma * xs + params.delta * (land - 1)
                self.landing[b, lvl - 1] = land - 1
                self.base[b, lvl - 1], self.frac[b, lvl - 1] = _interp_table(xs, cont)
                self.static[b, lvl - 1] = (
                    params.r * (land - 1) - params.c_minus * topup
                )

    def best_by_target(self, next_values: np.ndarray) -> np.ndarray:
        """(L, n) best candidate utility at each improvement target."""
        lo = next_values[self.landing, self.base]
        hi = next_values[self.landing, self.base + 1]
        cand = self.static + self.beta * (lo + self.frac * (hi - lo))
        return cand.max(axis=0)


def brute_force_value(
    ladder: Ladder, params: ModelParams, spec: OracleSpec
) -> OracleResult:
    """Exhaustive finite-horizon DP; values and optimal first actions.

    Ties across improvement targets resolve to the largest target, and
    across gaming candidates to the smallest gaming action.
    """
    xs = spec.points()
    L, n = ladder.levels, xs.size
    if L * n * spec.horizon > 2e7 or L * n * n > 2e8:
        raise OracleSizeError(
            f"instance too large: {L} levels x {n} points x T={spec.horizon}"
        )

    ws = _LayerWorkspace(ladder, params, spec)
    effort = params.c_plus * xs  # improvement cost measured from 0

    values = np.zeros((L, n))
    for _ in range(spec.horizon):
        g = ws.best_by_target(values) - effort
        values = _strided_suffix_max(g, spec.stride) + effort

    # First actions from the final layer: for each state pick the best
    # reachable target (largest on ties), then the cheapest gaming
    # candidate attaining the target's value.
    land_lo = values  # value table one step ahead of the first action
    # recompute per-candidate values at every target
    lo = land_lo[ws.landing, ws.base]
    hi = land_lo[ws.landing, ws.base + 1]
    per_cand = ws.static + ws.beta * (lo + ws.frac * (hi - lo))
    best_target = per_cand.max(axis=0)

    a_plus = np.empty((L, n))
    a_minus = np.empty((L, n))
    stride = spec.stride
    for li in range(L):
        g = best_target[li] - effort
        for i in range(n):
            js = np.arange(i, n, stride)
            rel = g[js]
            # argmax with largest-index tie preference
            j = js[rel.size - 1 - int(np.argmax(rel[::-1]))]
            a_plus[li, i] = xs[j] - xs[i]
            col = per_cand[:, li, j]
            tops = (
                0.0,
                max(ladder.threshold(li + 1) - xs[j], 0.0),
                max(ladder.threshold(min(li + 2, L)) - xs[j], 0.0),
            )
            top = col.max()
            pick = min(
                (tops[b] for b in range(3) if col[b] >= top - 1e-12),
                default=0.0,
            )
            a_minus[li, i] = pick

    for arr in (values, a_plus, a_minus):
        arr.setflags(write=False)
    return OracleResult(
        spec=spec,
        ladder=ladder,
        params=params,
        points=xs,
        values=values,
        a_plus=a_plus,
        a_minus=a_minus,
    )
