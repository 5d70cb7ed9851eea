"""Interpolated value iteration and policy extraction.

Iterates the W-space backup to a sup-norm fixed point, then reads the
optimal actions off the converged grid: the improvement action moves to
the largest grid point whose W value ties W(l, x) (ties favor more
improvement), and the gaming action follows from which branch attains
the minimum there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bellman import GridSpec, ValueGrid, _BackupWorkspace
from .core import Action, Ladder, ModelParams

__all__ = [
    "ConvergenceReport",
    "Policy",
    "SolverConvergenceError",
    "convergence_report",
    "error_bound",
    "load_policy",
    "policy_from_dict",
    "policy_to_dict",
    "save_policy",
    "value_iterate",
]

#: Branch codes stored per (level, grid point).
PROMOTE, STAY, RELEGATE = 1, 0, -1


class SolverConvergenceError(RuntimeError):
    """Raised when value iteration exceeds 10x the theoretical bound."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass(frozen=True)
class Policy:
    """Converged value function with per-grid-point optimal actions."""

    ladder: Ladder
    params: ModelParams
    W: ValueGrid
    a_plus: np.ndarray
    a_minus: np.ndarray
    branch: np.ndarray
    iterations: int
    residuals: tuple[float, ...]
    epsilon: float
    initial_gap: float

    def __post_init__(self) -> None:
        shape = (self.ladder.levels, self.W.grid.n_points)
        for name in ("a_plus", "a_minus", "branch"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
        if self.a_plus.min() < 0.0 or self.a_minus.min() < 0.0:
            raise ValueError("actions must be non-negative")
        xs = self.W.grid.points
        if (self.a_plus + xs).max() > self.W.grid.x_max + 1e-9:
            raise ValueError("a_plus moves past x_max")

    @property
    def grid(self) -> GridSpec:
        return self.W.grid

    def action(self, level: int, x: float) -> Action:
        """Optimal action at (level, x), looked up at the nearest grid point.

        The grid point supplies the improvement target and the branch;
        the returned amounts adapt to the actual attribute, so gaming
        tops up to the intended threshold even when x is off-grid (a
        stored amount applied verbatim would undershoot the threshold
        for x just below its grid point and silently fail to cross).
        """
        li = level - 1
        i = self.grid.nearest_index(x)
        stored = self.a_plus[li, i]
        # stored == 0 means "stay put", not "move to the grid point"
        a_plus = max(self.grid.points[i] + stored - x, 0.0) if stored > 0.0 else 0.0
        branch = int(self.branch[li, i])
        if branch == RELEGATE:
            return Action(a_plus, 0.0)
        up = min(level + 1, self.ladder.levels) if branch == PROMOTE else level
        mu = self.ladder.threshold(up)
        x_post = x + a_plus
        wobble = 4.0 * math.ulp(max(mu, 1.0))
        if a_plus > 0.0 and self.a_minus[li, i] <= wobble:
            # the grid point crossed by improvement alone; keep the replay
            # pure by folding the re-basing roundoff (a few ulps at most)
            # into the improvement amount rather than a gaming sliver
            while 0.0 < mu - x_post <= wobble:
                a_plus = math.nextafter(a_plus, math.inf)
                x_post = x + a_plus
            return Action(a_plus, 0.0)
        if (
            branch == PROMOTE
            and stored == 0.0
            and self.a_minus[li, i] <= wobble
            and mu - x_post > wobble
            and i > 0
            and int(self.branch[li, i - 1]) == PROMOTE
            and self.a_plus[li, i - 1] > 0.0
        ):
            # the grid point sits on the threshold, so its ulp-scale
            # crossing carries no improvement-vs-gaming preference; the
            # neighbor below faced a real gap and crossed by improving
            a_plus = mu - x_post
            x_post = x + a_plus
            while 0.0 < mu - x_post <= wobble:
                a_plus = math.nextafter(a_plus, math.inf)
                x_post = x + a_plus
            return Action(a_plus, 0.0)
        a_minus = max(mu - x_post, 0.0)
        # re-adding a rounded difference can land one ulp short of mu,
        # which the threshold comparison would read as a failed crossing
        while a_minus > 0.0 and x_post + a_minus < mu:
            a_minus = math.nextafter(a_minus, math.inf)
        return Action(a_plus, a_minus)

    def value(self, level: int, x: float) -> float:
        """Agent's maximal discounted utility c_plus*x - W(level, x)."""
        i = self.grid.nearest_index(x)
        return self.params.c_plus * x - self.W.values[level - 1, i]


def error_bound(params: ModelParams, grid: GridSpec) -> float:
    """Sup-norm gap between the grid fixed point and the true W."""
    return params.c_plus * grid.dx / (2.0 * (1.0 - params.beta))


def _iteration_bound(gap: float, epsilon: float, beta: float) -> int:
    if gap <= epsilon:
        return 2
    return math.ceil(math.log(gap / epsilon) / abs(math.log(beta))) + 2


def _extract(
    values: np.ndarray,
    candidates: np.ndarray,
    ladder: Ladder,
    grid: GridSpec,
    flat_atol: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read actions off a converged W grid.

    candidates is the (3, levels, n) branch-value array evaluated at the
    same W. Branch ties within 1e-12 resolve promote > stay > relegate.
    """
    xs = grid.points
    levels, n = values.shape
    a_plus = np.empty((levels, n))
    a_minus = np.empty((levels, n))
    branch = np.empty((levels, n), dtype=np.int8)
    for li in range(levels):
        row = values[li]
        # rows are non-decreasing, so the largest value-tied point is found
        # by bisection on row[j] <= row[i] + flat_atol
        j = np.searchsorted(row, row + flat_atol, side="right") - 1
        a_plus[li] = xs[j] - xs
        v_rel, v_stay, v_pr = (candidates[b, li, j] for b in range(3))
        best = np.minimum(np.minimum(v_rel, v_stay), v_pr)
        promote = v_pr <= best + 1e-12
        stay = ~promote & (v_stay <= best + 1e-12)
        branch[li] = np.where(promote, PROMOTE, np.where(stay, STAY, RELEGATE))
        up = min(li + 2, levels)
        top_pr = np.maximum(ladder.threshold(up) - xs[j], 0.0)
        top_stay = np.maximum(ladder.threshold(li + 1) - xs[j], 0.0)
        a_minus[li] = np.where(promote, top_pr, np.where(stay, top_stay, 0.0))
    return a_plus, a_minus, branch


def value_iterate(
    ladder: Ladder,
    params: ModelParams,
    grid: GridSpec,
    epsilon: float = 1e-9,
    warm_start: ValueGrid | Policy | None = None,
    flat_atol: float | None = None,
) -> Policy:
    """Iterate the W-space backup to a fixed point and extract the policy.

    Stops once the sup-norm residual drops to epsilon; linear convergence
    at rate beta makes the iteration count predictable, and runs are cut
    off at 10x that prediction. warm_start (a ValueGrid or a previous
    Policy on the same grid) speeds up nearby re-solves.

    flat_atol controls how close two W values must be to count as tied
    during action extraction; the default scales with the converged
    residual so extraction noise tracks epsilon.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if grid.x_max <= ladder.top:
        raise ValueError(f"x_max={grid.x_max} must exceed top threshold {ladder.top}")
    if flat_atol is None:
        flat_atol = max(10.0 * epsilon / (1.0 - params.beta), 1e-9)

    if warm_start is None:
        w0 = np.zeros((ladder.levels, grid.n_points))
    else:
        start = warm_start.W if isinstance(warm_start, Policy) else warm_start
        if start.grid != grid or start.levels != ladder.levels:
            raise ValueError("warm_start grid or level count does not match")
        w0 = start.values

    ws = _BackupWorkspace(ladder, params, grid)
    residuals: list[float] = []
    cutoff = 0
    current = w0
    while True:
        new = ws.backup_values(current)
        resid = float(np.max(np.abs(new - current)))
        residuals.append(resid)
        current = new
        if len(residuals) == 1:
            # distance to the fixed point is at most resid/(1-beta)
            gap_est = max(resid / (1.0 - params.beta), epsilon)
            cutoff = max(10 * _iteration_bound(gap_est, epsilon, params.beta), 20)
        if resid <= epsilon:
            break
        if len(residuals) >= cutoff:
            raise SolverConvergenceError(
                f"no convergence to {epsilon:g} after {len(residuals)} iterations "
                f"(last residual {resid:g})",
                residuals,
            )

    a_plus, a_minus, branch = _extract(
        current, ws.candidates(current), ladder, grid, flat_atol
    )
    return Policy(
        ladder=ladder,
        params=params,
        W=ValueGrid(grid, current),
        a_plus=a_plus,
        a_minus=a_minus,
        branch=branch,
        iterations=len(residuals),
        residuals=tuple(residuals),
        epsilon=epsilon,
        initial_gap=float(np.max(np.abs(current - w0))),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    iteration_bound: int
    max_ratio: float
    contraction_pass: bool
    iterations_pass: bool


def convergence_report(policy: Policy, params: ModelParams) -> ConvergenceReport:
    """Check a solve against its linear-convergence guarantees.

    The contraction test compares consecutive residual ratios (from the
    second residual on) against beta; the iteration test compares the
    count against the bound implied by the initial gap, with +2 slack.

    Ratios are only taken while the residual sits well above the
    rounding floor of the W values themselves: below roughly 1e7 ulps
    the quotient measures float noise, not the operator.
    """
    resid = policy.residuals
    floor = 1e7 * math.ulp(max(1.0, float(np.max(np.abs(policy.W.values)))))
    ratios = [
        resid[k + 1] / resid[k] for k in range(1, len(resid) - 1) if resid[k] >= floor
    ]
    max_ratio = max(ratios, default=0.0)
    bound = _iteration_bound(policy.initial_gap, policy.epsilon, params.beta)
    return ConvergenceReport(
        iterations=policy.iterations,
        iteration_bound=bound,
        max_ratio=max_ratio,
        contraction_pass=max_ratio <= params.beta + 1e-6,
        iterations_pass=policy.iterations <= bound + 2,
    )


_POLICY_FORMAT = "laddermdp-policy-v1"


def policy_to_dict(policy: Policy) -> dict:
    """JSON-ready dict with grid spec and row-major arrays."""
    p = policy.params
    return {
        "format": _POLICY_FORMAT,
        "params": {
            "beta": p.beta,
            "gamma": p.gamma,
            "delta": p.delta,
            "c_plus": p.c_plus,
            "c_minus": p.c_minus,
            "r": p.r,
            "theta": p.theta,
        },
        "ladder": list(policy.ladder.mu),
        "grid": {"x_max": policy.grid.x_max, "dx": policy.grid.dx},
        "epsilon": policy.epsilon,
        "iterations": policy.iterations,
        "initial_gap": policy.initial_gap,
        "residuals": list(policy.residuals),
        "w": policy.W.values.tolist(),
        "a_plus": policy.a_plus.tolist(),
        "a_minus": policy.a_minus.tolist(),
        "branch": policy.branch.tolist(),
    }


def policy_from_dict(data: dict) -> Policy:
    if data.get("format") != _POLICY_FORMAT:
        raise ValueError(f"unsupported policy format {data.get('format')!r}")
    params = ModelParams(**data["params"])
    ladder = Ladder(data["ladder"])
    grid = GridSpec(**data["grid"])
    return Policy(
        ladder=ladder,
        params=params,
        W=ValueGrid(grid, np.asarray(data["w"], dtype=float)),
        a_plus=np.asarray(data["a_plus"], dtype=float),
        a_minus=np.asarray(data["a_minus"], dtype=float),
        branch=np.asarray(data["branch"], dtype=np.int8),
        iterations=int(data["iterations"]),
        residuals=tuple(float(r) for r in data["residuals"]),
        epsilon=float(data["epsilon"]),
        initial_gap=float(data["initial_gap"]),
    )


def save_policy(policy: Policy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh)


def load_policy(path) -> Policy:
    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))
