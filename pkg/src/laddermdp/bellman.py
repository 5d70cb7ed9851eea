"""Fixed-point machinery for the agent's value function in W-space.

The agent's minimization problem is solved through the transform
W(l, x) = V(l, x) + c_plus * x, where V is the discounted cost-minus-reward
value. In W-space the Bellman operator splits into three branch candidates
per improved attribute x_tilde (relegate / stay / promote, each with its
gaming top-up priced at c_minus) followed by a running minimum over
x_tilde >= x. The operator is a beta-contraction and preserves
monotonicity and the discrete c_plus-Lipschitz bound, so everything here
works on uniform grids with linear interpolation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Ladder, ModelParams, natural_equilibrium

__all__ = [
    "GridSpec",
    "PhiCandidates",
    "ValueGrid",
    "bellman_backup",
    "default_grid",
    "interpolate",
    "phi_candidates",
    "v_from_w",
    "w_from_v",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform attribute grid {0, dx, 2*dx, ..., x_max}."""

    x_max: float
    dx: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dx) and self.dx > 0.0):
            raise ValueError(f"dx must be positive and finite, got {self.dx}")
        if not (math.isfinite(self.x_max) and self.x_max > 0.0):
            raise ValueError(f"x_max must be positive and finite, got {self.x_max}")
        steps = self.x_max / self.dx
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError(
                f"x_max={self.x_max} is not an integer multiple of dx={self.dx}"
            )
        pts = np.linspace(0.0, self.x_max, round(steps) + 1)
        pts.setflags(write=False)
        object.__setattr__(self, "_points", pts)

    @property
    def n_points(self) -> int:
        return self._points.size

    @property
    def points(self) -> np.ndarray:
        """Read-only array of grid points."""
        return self._points

    def nearest_index(self, x: float) -> int:
        """Index of the grid point closest to x (ties round half to even)."""
        i = int(np.rint(x / self.dx))
        return min(max(i, 0), self.n_points - 1)


def default_grid(ladder: Ladder, params: ModelParams, dx: float) -> GridSpec:
    """Grid wide enough that no optimizer lies beyond the truncation.

    The upper bound leaves a 25% margin over both the top threshold and
    the natural attribute ceiling, plus the largest stretch the reward
    stream could ever justify improving.
    """
    ceiling = max(ladder.top, natural_equilibrium(ladder.levels, params))
    raw = 1.25 * ceiling + params.r / ((1.0 - params.beta) * params.c_plus)
    x_max = math.ceil(raw / dx - 1e-9) * dx
    return GridSpec(x_max=x_max, dx=dx)


@dataclass(frozen=True)
class ValueGrid:
    """Per-level W values over a GridSpec.

    Rows must be finite, non-decreasing, and discretely c_plus-Lipschitz;
    these hold for the all-zeros start and are preserved by bellman_backup.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError(f"values must be 2-D (levels, points), got {vals.shape}")
        if vals.shape[1] != self.grid.n_points:
            raise ValueError(
                f"values have {vals.shape[1]} columns, grid has {self.grid.n_points}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def levels(self) -> int:
        return self.values.shape[0]

    def row(self, level: int) -> np.ndarray:
        """W values of one level, 1-indexed."""
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        return self.values[level - 1]

    def check_invariants(self, params: ModelParams) -> None:
        """Raise if any row is decreasing or steeper than c_plus."""
        diffs = np.diff(self.values, axis=1)
        if diffs.size == 0:
            return
        if diffs.min() < -1e-9:
            raise ValueError(f"W row decreases by {-diffs.min():g}")
        lip = params.c_plus * self.grid.dx + 1e-9
        if diffs.max() > lip:
            raise ValueError(f"W row slope {diffs.max():g} exceeds bound {lip:g}")


def w_from_v(v: float, x: float, params: ModelParams) -> float:
    """W = V + c_plus * x."""
    return v + params.c_plus * x

def v_from_w(w: float, x: float, params: ModelParams) -> float:
    """V = W - c_plus * x."""
    return w - params.c_plus * x


def interpolate(w_level: np.ndarray, grid: GridSpec, x: float) -> float:
    """Linear interpolation of one W row; out-of-range x clamps with a warning."""
    if x < 0.0 or x > grid.x_max:
        warnings.warn(
            f"interpolation point {x:g} outside [0, {grid.x_max:g}], clamping",
            RuntimeWarning,
            stacklevel=2,
        )
        x = min(max(x, 0.0), grid.x_max)
    return float(np.interp(x, grid.points, w_level))


@dataclass(frozen=True)
class PhiCandidates:
    """Branch values at one improved attribute x_tilde."""

    v_rel: float
    v_stay: float
    v_pr: float

    @property
    def phi(self) -> float:
        return min(self.v_rel, self.v_stay, self.v_pr)


# Branch order used throughout: relegate, stay, promote.
_N_BRANCHES = 3


class _BackupWorkspace:
    """Precomputed branch tables so repeated backups are pure gathers.

    For each (branch, level) the continuation point gamma*x + delta*(l'-1)
    is fixed, so its interpolation index and weight are computed once.
    The static part bundles effective improvement cost, gaming top-up and
    reward of the landing level.
    """

    def __init__(self, ladder: Ladder, params: ModelParams, grid: GridSpec):
        xs = grid.points
        n, L = xs.size, ladder.levels
        c_eff = (1.0 - params.beta * params.gamma) * params.c_plus
        r_eff = params.r + params.beta * params.c_plus * params.delta

        self.beta = params.beta
        self.static = np.empty((_N_BRANCHES, L, n))
        self.land = np.empty((_N_BRANCHES, L, n), dtype=np.intp)
        self.idx = np.empty((_N_BRANCHES, L, n), dtype=np.intp)
        self.frac = np.empty((_N_BRANCHES, L, n))

        overflow = 0.0
        for lvl in range(1, L + 1):
            landings = (max(lvl - 1, 1), lvl, min(lvl + 1, L))
            # Relegation carries no top-up; stay/promote pay c_minus up to
            # the threshold of the level they need to hold or reach.
            topups = (
                np.zeros(n),
                np.maximum(ladder.threshold(lvl) - xs, 0.0),
                np.maximum(ladder.threshold(min(lvl + 1, L)) - xs, 0.0),
            )
            for b, (land, topup) in enumerate(zip(landings, topups)):
                self.static[b, lvl - 1] = (
                    c_eff * xs + params.c_minus * topup - r_eff * (land - 1)
                )
                cont = params.gamma * xs + params.delta * (land - 1)
                overflow = max(overflow, cont[-1] - grid.x_max)
                cont = np.clip(cont, 0.0, grid.x_max)
                pos = cont / grid.dx
                base = np.minimum(pos.astype(np.intp), n - 2)
                self.land[b, lvl - 1] = land - 1
                self.idx[b, lvl - 1] = base
                self.frac[b, lvl - 1] = pos - base
        if overflow > 1e-9:
            warnings.warn(
                f"continuation attribute exceeds x_max by {overflow:g}; clamped",
                RuntimeWarning,
                stacklevel=3,
            )

    def candidates(self, values: np.ndarray) -> np.ndarray:
        """(3, L, n) branch values at every grid point of every level."""
        lo = values[self.land, self.idx]
        hi = values[self.land, self.idx + 1]
        cont = lo + self.frac * (hi - lo)
        return self.static + self.beta * cont

    def backup_values(self, values: np.ndarray) -> np.ndarray:
        phi = self.candidates(values).min(axis=0)
        # min over x_tilde >= x: one reverse running-min sweep per level
        return np.minimum.accumulate(phi[:, ::-1], axis=1)[:, ::-1]


def phi_candidates(
    level: int, x_tilde: float, W: ValueGrid, ladder: Ladder, params: ModelParams
) -> PhiCandidates:
    """Branch values at improved attribute x_tilde (may lie off-grid)."""
    if ladder.levels != W.levels:
        raise ValueError(f"ladder has {ladder.levels} levels, W has {W.levels}")
    if not 1 <= level <= ladder.levels:
        raise ValueError(f"level {level} outside 1..{ladder.levels}")
    if not (-1e-12 <= x_tilde <= W.grid.x_max + 1e-12):
        raise ValueError(f"x_tilde={x_tilde} outside grid [0, {W.grid.x_max}]")
    x_tilde = min(max(x_tilde, 0.0), W.grid.x_max)

    c_eff = (1.0 - params.beta * params.gamma) * params.c_plus
    r_eff = params.r + params.beta * params.c_plus * params.delta

    def branch(land: int, topup: float) -> float:
        cont = params.gamma * x_tilde + params.delta * (land - 1)
        omega = interpolate(W.row(land), W.grid, min(cont, W.grid.x_max))
        return (
            c_eff * x_tilde
            + params.c_minus * topup
            - r_eff * (land - 1)
            + params.beta * omega
        )

    up = min(level + 1, ladder.levels)
    return PhiCandidates(
        v_rel=branch(max(level - 1, 1), 0.0),
        v_stay=branch(level, max(ladder.threshold(level) - x_tilde, 0.0)),
        v_pr=branch(up, max(ladder.threshold(up) - x_tilde, 0.0)),
    )


def bellman_backup(
    W: ValueGrid, ladder: Ladder, params: ModelParams, grid: GridSpec
) -> ValueGrid:
    """One application of the W-space Bellman operator.

    Pointwise minimum of the three branch candidates, then a suffix
    running minimum along each row. A beta-contraction in sup-norm.
    """
    if grid != W.grid:
        raise ValueError("grid does not match W.grid")
    if ladder.levels != W.levels:
        raise ValueError(f"ladder has {ladder.levels} levels, W has {W.levels}")
    if grid.x_max <= ladder.top:
        raise ValueError(f"x_max={grid.x_max} must exceed top threshold {ladder.top}")
    ws = _BackupWorkspace(ladder, params, grid)
    return ValueGrid(grid, ws.backup_values(W.values))
