"""Principal-side objective and black-box design optimization.

Scores a candidate design (reward rate plus thresholds) by rolling out
the agent's solved best response from a distribution of starting
attributes and discounting three ingredients per step: whether the
classifier would have made the same call on the true post-action
attribute as on the gamed feature, the attribute itself, and the
reward bill. A small from-scratch CMA-ES searches designs for each
ladder depth, and an outer loop picks the depth with the best utility.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .bellman import GridSpec
from .core import AgentState, Ladder, ModelParams, classify
from .simulate import rollout
from .solver import Policy, value_iterate

__all__ = [
    "CmaConfig",
    "DesignVector",
    "GenerationRecord",
    "InitialDistribution",
    "LevelResult",
    "LevelSearch",
    "PrincipalParams",
    "UtilityTerms",
    "cma_es_optimize",
    "design_ladder",
    "design_policy",
    "gaming_free_mass",
    "load_score_distribution",
    "optimize_over_levels",
    "project_design",
    "relaxed_utility",
    "synthetic_score_distribution",
    "utility_terms",
    "write_json_report",
]


@dataclass(frozen=True)
class PrincipalParams:
    """Discounting and weights of the relaxed objective.

    alpha    principal discount factor, in (0, 1)
    lam      weight on the agent's next-step attribute
    xi       weight on the reward bill r * level
    horizon  truncation step T; terms run t = 0..T inclusive

    The horizon must make the discarded tail negligible: alpha**horizon
    is capped at 5e-5 (the documented default pair T=200, alpha=0.95
    sits just under it).
    """

    alpha: float = 0.95
    lam: float = 5.0
    xi: float = 0.01
    horizon: int = 200

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        # zero weights are meaningful (they single out the robustness term)
        if self.lam < 0.0 or self.xi < 0.0:
            raise ValueError("lam and xi must be >= 0")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.alpha**self.horizon > 5e-5:
            raise ValueError(
                f"alpha**horizon = {self.alpha ** self.horizon:.2e} leaves a "
                "non-negligible tail; raise horizon or lower alpha"
            )


@dataclass(frozen=True)
class InitialDistribution:
    """Discrete starting-attribute distribution on [0, 10]."""

    support: tuple[float, ...]
    mass: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.mass) or not self.support:
            raise ValueError("support and mass must be equal-length and non-empty")
        if min(self.support) < 0.0 or max(self.support) > 10.0:
            raise ValueError("support must lie in [0, 10]")
        if min(self.mass) < 0.0:
            raise ValueError("mass must be non-negative")
        total = math.fsum(self.mass)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mass must sum to 1, got {total!r}")


@dataclass(frozen=True)
class DesignVector:
    """Reward rate and the thresholds above the pinned entry threshold."""

    r: float
    thresholds: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.r < 0.0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if any(t < 0.0 for t in self.thresholds):
            raise ValueError("thresholds must be >= 0")
        if any(b < a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be non-decreasing")

    @property
    def dim(self) -> int:
        return 1 + len(self.thresholds)


def project_design(vector: Sequence[float]) -> DesignVector:
    """Map a raw genotype onto the feasible set: clip at 0, sort thresholds."""
    v = np.maximum(np.asarray(vector, dtype=float), 0.0)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("design genotype must be a 1-D vector of length >= 1")
    return DesignVector(float(v[0]), tuple(float(t) for t in np.sort(v[1:])))


def _genotype(design: DesignVector) -> np.ndarray:
    return np.array((design.r, *design.thresholds), dtype=float)


def design_ladder(design: DesignVector, grid: GridSpec) -> Ladder:
    """Ladder for a design, with thresholds capped inside the grid.

    The solver needs headroom above the top threshold, so candidates
    wandering past x_max are evaluated as if their thresholds stopped
    one step short of it; selection pressure pulls them back.
    """
    cap = grid.x_max - grid.dx
    return Ladder((0.0, *(min(t, cap) for t in design.thresholds)))


@lru_cache(maxsize=256)
def _best_response(
    ladder: Ladder, params: ModelParams, grid: GridSpec, epsilon: float
) -> Policy:
    return value_iterate(ladder, params, grid, epsilon=epsilon)


def design_policy(
    design: DesignVector,
    params: ModelParams,
    grid: GridSpec,
    solver_epsilon: float = 1e-6,
) -> tuple[Ladder, ModelParams, Policy]:
    """Ladder, effective params (design's r installed), solved best response."""
    ladder = design_ladder(design, grid)
    eff = replace(params, r=max(design.r, 1e-12))
    return ladder, eff, _best_response(ladder, eff, grid, solver_epsilon)


@dataclass(frozen=True)
class UtilityTerms:
    """Decomposed principal utility: total = robust + lam*attr - xi*cost."""

    robust: float
    attr: float
    cost: float
    total: float


def utility_terms(
    design: DesignVector,
    pparams: PrincipalParams,
    params: ModelParams,
    dist: InitialDistribution,
    grid: GridSpec,
    solver_epsilon: float = 1e-6,
) -> UtilityTerms:
    """Expected discounted utility of a design, term by term.

    Solves the agent once (cached per design), rolls out from every
    support point, and discounts per step t = 0..horizon: the
    same-call indicator (classifier decision on the gamed feature vs
    on the true post-action attribute, both at the level the action
    was taken from), the next attribute, and the reward bill r times
    the attained level. design.r overrides params.r; a projected
    r == 0 is evaluated as a vanishing but positive reward.
    """
    ladder, eff, policy = design_policy(design, params, grid, solver_epsilon)
    steps = pparams.horizon + 1
    disc = pparams.alpha ** np.arange(steps)

    robust = attr = cost = total = 0.0
    for x0, w in zip(dist.support, dist.mass):
        if w == 0.0:
            continue
        traj = rollout(policy, AgentState(1, x0), ladder, eff, horizon=steps)
        same = np.array(
            [
                classify(ladder, s.level_before, s.z, eff)
                == classify(ladder, s.level_before, s.x_post, eff)
                for s in traj.steps
            ],
            dtype=float,
        )
        attrs = np.array([st.attribute for st in traj.states[1:]])
        bill = design.r * np.array([s.level_after for s in traj.steps], dtype=float)
        robust += w * float(disc @ same)
        attr += w * float(disc @ attrs)
        cost += w * float(disc @ bill)
        # accumulate the full per-step term separately so the reported
        # total is not defined as its own decomposition
        total += w * float(disc @ (same + pparams.lam * attrs - pparams.xi * bill))
    return UtilityTerms(robust=robust, attr=attr, cost=cost, total=total)


def relaxed_utility(
    design: DesignVector,
    pparams: PrincipalParams,
    params: ModelParams,
    dist: InitialDistribution,
    grid: GridSpec,
    solver_epsilon: float = 1e-6,
) -> float:
    """Scalar value of utility_terms; see there for the semantics."""
    return utility_terms(design, pparams, params, dist, grid, solver_epsilon).total


def gaming_free_mass(
    design: DesignVector,
    pparams: PrincipalParams,
    params: ModelParams,
    dist: InitialDistribution,
    grid: GridSpec,
    solver_epsilon: float = 1e-6,
) -> float:
    """Share of initial mass whose entire rollout never games."""
    ladder, eff, policy = design_policy(design, params, grid, solver_epsilon)
    clean = 0.0
    for x0, w in zip(dist.support, dist.mass):
        if w == 0.0:
            continue
        traj = rollout(policy, AgentState(1, x0), ladder, eff, pparams.horizon + 1)
        if all(s.action.a_minus <= 1e-9 for s in traj.steps):
            clean += w
    return clean


@dataclass(frozen=True)
class CmaConfig:
    population: int = 10
    generations: int = 30
    sigma0: float = 1.0
    initial_mean: tuple[float, ...] | None = None


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_value: float
    best: DesignVector
    sigma: float


def cma_es_optimize(
    objective: Callable[[DesignVector], float],
    dim: int,
    seed: int,
    config: CmaConfig = CmaConfig(),
) -> tuple[DesignVector, float, tuple[GenerationRecord, ...]]:
    """Minimize a black-box objective over projected design vectors.

    Non-elitist (mu/mu_w, lambda) covariance matrix adaptation with the
    usual dimension-dependent weights and learning rates. Candidates
    are repaired onto the feasible set (clip to >= 0, sort thresholds)
    and the repaired points are both what the objective sees and what
    the mean and covariance updates consume, so the strategy never
    tracks infeasible mass. Fully deterministic for a fixed seed.

    Returns the best design ever evaluated, its value, and one record
    per generation (that generation's best).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    pop = config.population
    mu = pop // 2
    if pop < 2 or mu < 1:
        raise ValueError(f"population must be >= 2, got {pop}")

    rng = np.random.default_rng(seed)
    n = dim
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(weights @ weights)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    if config.initial_mean is not None:
        mean = np.asarray(config.initial_mean, dtype=float).copy()
        if mean.shape != (n,):
            raise ValueError(f"initial_mean must have length {n}")
    else:
        mean = np.concatenate([[1.0], np.linspace(0.0, 10.0, n)[1:]])
    sigma = config.sigma0
    cov = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)

    best_design: DesignVector | None = None
    best_value = math.inf
    history: list[GenerationRecord] = []

    for gen in range(config.generations):
        cov = (cov + cov.T) / 2.0
        eigvals, basis = np.linalg.eigh(cov)
        scale = np.sqrt(np.maximum(eigvals, 1e-20))

        repaired = np.empty((pop, n))
        values = np.empty(pop)
        designs: list[DesignVector] = []
        for i in range(pop):
            z = rng.standard_normal(n)
            candidate = mean + sigma * (basis @ (scale * z))
            design = project_design(candidate)
            designs.append(design)
            repaired[i] = _genotype(design)
            values[i] = objective(design)

        order = np.argsort(values, kind="stable")
        gen_best = designs[order[0]]
        gen_best_value = float(values[order[0]])
        if gen_best_value < best_value:
            best_value = gen_best_value
            best_design = gen_best
        history.append(GenerationRecord(gen, gen_best_value, gen_best, sigma))

        selected = repaired[order[:mu]]
        old_mean = mean
        mean = weights @ selected
        step = (mean - old_mean) / sigma

        inv_sqrt_step = basis @ ((basis.T @ step) / scale)
        p_sigma = (1.0 - c_sigma) * p_sigma + math.sqrt(
            c_sigma * (2.0 - c_sigma) * mu_eff
        ) * inv_sqrt_step
        norm_ps = float(np.linalg.norm(p_sigma))
        h_sigma = float(
            norm_ps / math.sqrt(1.0 - (1.0 - c_sigma) ** (2 * (gen + 1)))
            < (1.4 + 2.0 / (n + 1.0)) * chi_n
        )
        p_c = (1.0 - c_c) * p_c + h_sigma * math.sqrt(
            c_c * (2.0 - c_c) * mu_eff
        ) * step

        deviations = (selected - old_mean) / sigma
        rank_mu = (weights[:, None] * deviations).T @ deviations
        rank_one = np.outer(p_c, p_c) + (1.0 - h_sigma) * c_c * (2.0 - c_c) * cov
        cov = (1.0 - c_1 - c_mu) * cov + c_1 * rank_one + c_mu * rank_mu
        sigma *= math.exp((c_sigma / d_sigma) * (norm_ps / chi_n - 1.0))

    assert best_design is not None
    return best_design, best_value, tuple(history)


@dataclass(frozen=True)
class LevelResult:
    levels: int
    design: DesignVector
    utility: float
    terms: UtilityTerms


@dataclass(frozen=True)
class LevelSearch:
    """Per-depth optimization results and the overall winner."""

    results: tuple[LevelResult, ...]

    @property
    def best(self) -> LevelResult:
        # ties break toward the shallower ladder
        return max(self.results, key=lambda r: (r.utility, -r.levels))

    def table(self) -> list[dict[str, float]]:
        """One row per depth: L, r, top threshold, utility."""
        return [
            {
                "L": r.levels,
                "r": r.design.r,
                "mu_L": r.design.thresholds[-1] if r.design.thresholds else 0.0,
                "U": r.utility,
            }
            for r in self.results
        ]


def optimize_over_levels(
    pparams: PrincipalParams,
    params: ModelParams,
    dist: InitialDistribution,
    grid: GridSpec,
    seed: int = 0,
    levels: Iterable[int] = range(2, 9),
    config: CmaConfig = CmaConfig(),
    solver_epsilon: float = 1e-6,
) -> LevelSearch:
    """Run one CMA-ES search per ladder depth and keep them all.

    Each depth L optimizes (r, mu_2..mu_L), dim = L, with its own
    derived seed (seed + L) so depths are independent yet the whole
    search replays bit-for-bit from one seed.
    """
    results = []
    for count in levels:
        if count < 2:
            raise ValueError(f"ladder depth must be >= 2, got {count}")

        def objective(design: DesignVector) -> float:
            return -relaxed_utility(
                design, pparams, params, dist, grid, solver_epsilon
            )

        best, value, _ = cma_es_optimize(objective, dim=count, seed=seed + count, config=config)
        results.append(
            LevelResult(
                levels=count,
                design=best,
                utility=-value,
                terms=utility_terms(best, pparams, params, dist, grid, solver_epsilon),
            )
        )
    return LevelSearch(results=tuple(results))


def write_json_report(search: LevelSearch, path) -> None:
    """Dump per-depth results and the winner as deterministic JSON."""
    def encode(result: LevelResult) -> dict:
        return {
            "levels": result.levels,
            "r": result.design.r,
            "thresholds": list(result.design.thresholds),
            "utility": result.utility,
            "terms": {
                "robust": result.terms.robust,
                "attr": result.terms.attr,
                "cost": result.terms.cost,
            },
        }

    payload = {
        "per_level": [encode(r) for r in search.results],
        "best": encode(search.best),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def synthetic_score_distribution(bins: int = 25) -> InitialDistribution:
    """Built-in stand-in for a credit-score file.

    Two-component normal mixture on the raw 300-850 range: 45% mass at
    mean 580 (sd 65) and 55% at mean 720 (sd 55), evaluated on a dense
    grid and pushed through the same min-max + histogram pipeline as
    file input.
    """
    scores = np.linspace(300.0, 850.0, 1101)

    def bell(center: float, sd: float) -> np.ndarray:
        return np.exp(-0.5 * ((scores - center) / sd) ** 2) / sd

    weights = 0.45 * bell(580.0, 65.0) + 0.55 * bell(720.0, 55.0)
    return _histogram_distribution(scores, weights, bins)


def _histogram_distribution(
    scores: np.ndarray, weights: np.ndarray, bins: int
) -> InitialDistribution:
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        # no spread to normalize; the lone score maps to the top
        return InitialDistribution(support=(10.0,), mass=(1.0,))
    normalized = (scores - lo) / (hi - lo) * 10.0
    mass, edges = np.histogram(normalized, bins=bins, range=(0.0, 10.0), weights=weights)
    centers = (edges[:-1] + edges[1:]) / 2.0
    total = mass.sum()
    return InitialDistribution(
        support=tuple(float(c) for c in centers),
        mass=tuple(float(m / total) for m in mass),
    )


def load_score_distribution(path=None, bins: int = 25) -> InitialDistribution:
    """Read raw scores and bin them onto the [0, 10] attribute scale.

    Lines hold either one value (a score) or two comma-separated values
    (score, weight). Scores are min-max normalized to [0, 10] and
    histogrammed into equal-width bins; the returned support is the bin
    centers. A degenerate file whose scores are all equal collapses to
    a point mass at 10. With no path, the synthetic mixture stands in.
    """
    if path is None:
        return synthetic_score_distribution(bins)
    scores: list[float] = []
    weights: list[float] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) > 2:
                raise ValueError(f"line {lineno}: expected score[,weight], got {text!r}")
            try:
                score = float(parts[0])
                weight = float(parts[1]) if len(parts) == 2 else 1.0
            except ValueError:
                raise ValueError(f"line {lineno}: could not parse {text!r}") from None
            if weight < 0.0:
                raise ValueError(f"line {lineno}: negative weight {weight!r}")
            scores.append(score)
            weights.append(weight)
    if not scores:
        raise ValueError("no data rows in score file")
    return _histogram_distribution(np.array(scores), np.array(weights), bins)
