"""Command-line front end: solve, inspect, design, simulate, optimize.

Every subcommand reads its inputs from (in increasing precedence) a
named preset, a strict JSON config file, and command-line flags, then
prints a small JSON summary to stdout and writes CSV series or JSON
reports to the requested paths. Exit codes: 0 success, 2 bad config,
3 when the requested analysis itself reports infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .bellman import GridSpec, default_grid
from .closed_form import IncentiveDomainError, classify_regime, w_closed
from .core import AgentState, Ladder, ModelParams
from .design import (
    DesignProblem,
    greedy_thresholds,
    natural_sequence,
    sweep_entry,
    verify_feasible,
    write_sweep_csv,
)
from .principal import (
    CmaConfig,
    PrincipalParams,
    design_policy,
    load_score_distribution,
    optimize_over_levels,
    write_json_report,
)
from .simulate import (
    population_rollout,
    rollout,
    steady_state,
    write_trajectory_csv,
)
from .solver import (
    SolverConvergenceError,
    convergence_report,
    error_bound,
    save_policy,
    value_iterate,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(Exception):
    """Bad or missing configuration; message names the field."""


# field -> (python type family, constraint text used in error messages)
_FIELDS = {
    "beta": ("float", "in (0,1)"),
    "gamma": ("float", "in (0,1)"),
    "delta": ("float", ">= 0"),
    "c_plus": ("float", "> 0"),
    "c_minus": ("float", "> 0"),
    "r": ("float", "> 0"),
    "mu": ("list", "thresholds starting at 0 (comma list)"),
    "M": ("float", ">= 0"),
    "x_max": ("float", "> 0; default sized from the ladder"),
    "dx": ("float", "> 0; default 0.05"),
    "epsilon": ("float", "> 0; solver or bisection tolerance"),
    "x0": ("float", ">= 0; default 0"),
    "level0": ("int", "1..L; default 1"),
    "horizon": ("int", ">= 1; default 200"),
    "alpha": ("float", "in (0,1); default 0.95"),
    "lam": ("float", ">= 0; default 5.0"),
    "xi": ("float", ">= 0; default 0.01"),
    "seed": ("int", "default 0"),
    "levels": ("list", "ladder depths, e.g. 2:8; default 2:8"),
    "population": ("int", ">= 2; default 10"),
    "generations": ("int", ">= 1; default 30"),
    "sigma0": ("float", "> 0; default 1.0"),
    "scores": ("str", "path to score file; default synthetic"),
    "bins": ("int", ">= 1; default 25"),
    "axis": ("str", "one of beta|gamma|delta|c_plus|c_minus|r|M"),
    "values": ("list", "comma list or start:stop:step"),
    "beta_values": ("list", "comma list or start:stop:step"),
    "gamma_values": ("list", "comma list or start:stop:step"),
    "c_minus_values": ("list", "comma list or start:stop:step"),
    "mu_values": ("list", "comma list or start:stop:step"),
    "max_levels": ("int", ">= 2; default 50"),
    "workers": ("int", ">= 1; default $LADDERMDP_WORKERS or 1"),
    "behavior": ("bool", "sweep optimized-design behavior instead of thresholds"),
    "behavior_horizon": ("int", ">= 1; default 20"),
    "x0_set": ("list", "initial attributes; default derived from the ladder"),
    "out": ("str", "output path"),
    "traj_out": ("str", "trajectory CSV path"),
    "witness_out": ("str", "witness trajectory CSV path"),
    "mode": ("str", "natural or greedy"),
}

_MODEL = ("beta", "gamma", "delta", "c_plus", "c_minus", "r")
_GRID = ("x_max", "dx")

# per-command field whitelists; required fields error out when absent
_COMMANDS: dict[str, dict[str, tuple[str, ...]]] = {
    "solve": {
        "required": _MODEL + ("mu",),
        "optional": _GRID + ("epsilon", "out"),
    },
    "regions": {
        "required": _MODEL + ("mu_values", "out"),
        "optional": _GRID + ("epsilon", "horizon"),
    },
    "closed-form": {
        "required": _MODEL + ("mu",),
        "optional": _GRID + ("epsilon", "out"),
    },
    "design": {
        "required": ("mode",) + _MODEL + ("M",),
        "optional": _GRID + ("epsilon", "max_levels", "out"),
    },
    "verify": {
        "required": _MODEL + ("mu", "M"),
        "optional": _GRID + ("epsilon", "horizon", "x0_set", "out", "witness_out"),
    },
    "simulate": {
        "required": _MODEL + ("mu", "out"),
        "optional": _GRID + ("epsilon", "x0", "level0", "horizon"),
    },
    "sweep": {
        "required": _MODEL + ("axis", "values", "out"),
        "optional": _GRID
        + ("M", "epsilon", "max_levels", "workers", "behavior")
        + ("alpha", "lam", "xi", "horizon", "seed", "levels", "scores", "bins")
        + ("population", "generations", "sigma0", "behavior_horizon"),
    },
    "heatmap": {
        "required": ("delta", "c_plus", "c_minus", "r", "beta_values", "gamma_values", "M", "out"),
        "optional": _GRID + ("epsilon", "max_levels", "workers"),
    },
    "phase": {
        "required": ("beta", "gamma", "delta", "c_plus", "r", "c_minus_values", "M", "out"),
        "optional": _GRID + ("epsilon", "max_levels"),
    },
    "optimize": {
        "required": _MODEL,
        "optional": _GRID
        + ("epsilon", "alpha", "lam", "xi", "horizon", "seed", "levels")
        + ("population", "generations", "sigma0", "scores", "bins")
        + ("out", "traj_out", "behavior_horizon"),
    },
}

_EPSILON_DEFAULT = {
    "solve": 1e-9,
    "regions": 1e-8,
    "closed-form": 1e-9,
    "verify": 1e-9,
    "simulate": 1e-9,
    "design": 1e-3,
    "sweep": 1e-3,
    "heatmap": 1e-3,
    "phase": 1e-3,
    "optimize": 1e-6,
}

_DEFAULTS = {
    "dx": 0.05,
    "x0": 0.0,
    "level0": 1,
    "horizon": 200,
    "alpha": 0.95,
    "lam": 5.0,
    "xi": 0.01,
    "seed": 0,
    "levels": "2:8",
    "population": 10,
    "generations": 30,
    "sigma0": 1.0,
    "bins": 25,
    "max_levels": 50,
    "behavior": False,
    "behavior_horizon": 20,
}

_TABLE1_BASE = {
    "beta": 0.8,
    "gamma": 0.8,
    "delta": 0.01,
    "r": 1.0,
    "alpha": 0.95,
    "lam": 5.0,
    "xi": 0.01,
    "horizon": 200,
    "seed": 0,
    "bins": 25,
    "levels": "2:8",
    "x_max": 15.0,
    "dx": 0.1,
}

PRESETS: dict[str, dict] = {
    "fig3c": {
        "command": "simulate",
        "describe": "five-level rollout from (1, 0) with cheap gaming and a "
        "strong per-level boost: gaming ascent, level flapping, one late "
        "improvement, then absorption at the top",
        "beta": 0.8,
        "gamma": 0.8,
        "delta": 0.8,
        "c_plus": 1.0,
        "c_minus": 0.365,
        "r": 1.0,
        "mu": [0.0, 4.0, 8.0, 12.0, 16.0],
        "x0": 0.0,
        "level0": 1,
        "horizon": 20,
        "x_max": 20.0,
        "dx": 0.1,
    },
    "table1-caseI": dict(
        _TABLE1_BASE,
        command="optimize",
        describe="design search over depths 2..8 at costs (0.8, 0.7): "
        "moderate improvement cost, expensive gaming",
        c_plus=0.8,
        c_minus=0.7,
    ),
    "table1-caseII": dict(
        _TABLE1_BASE,
        command="optimize",
        describe="design search over depths 2..8 at costs (1.5, 1.2): "
        "expensive improvement, expensive gaming",
        c_plus=1.5,
        c_minus=1.2,
    ),
    "table1-caseIII": dict(
        _TABLE1_BASE,
        command="optimize",
        describe="design search over depths 2..8 at costs (0.8, 0.4): "
        "moderate improvement cost, cheap-but-incentivizable gaming",
        c_plus=0.8,
        c_minus=0.4,
    ),
    "table1-caseIV": dict(
        _TABLE1_BASE,
        command="optimize",
        describe="design search over depths 2..8 at costs (1.5, 0.4): "
        "gaming undercuts improvement, honest designs are out of reach",
        c_plus=1.5,
        c_minus=0.4,
    ),
    "fig5-sweep": {
        "command": "sweep",
        "describe": "greedy threshold sensitivity in the retention factor at "
        "the no-boost base (swap --axis/--values for other parameters)",
        "axis": "gamma",
        "values": "0.7,0.8,0.9",
        "beta": 0.8,
        "gamma": 0.9,
        "delta": 0.0,
        "c_plus": 1.0,
        "c_minus": 0.7,
        "r": 1.0,
        "M": 30.0,
        "max_levels": 5,
        "x_max": 40.0,
        "dx": 0.1,
    },
    "fig7-heatmap": {
        "command": "heatmap",
        "describe": "greedy ladder depth and attribute ceiling over a "
        "farsightedness x retention grid at the no-boost base",
        "beta_values": "0.6,0.7,0.8",
        "gamma_values": "0.7,0.8,0.9",
        "delta": 0.0,
        "c_plus": 1.0,
        "c_minus": 0.7,
        "r": 1.0,
        "M": 30.0,
        "max_levels": 5,
        "x_max": 40.0,
        "dx": 0.1,
    },
    "fig8-phase": {
        "command": "phase",
        "describe": "gaming-cost sweep across the incentivizability boundary "
        "(critical value (1-beta*gamma)*c_plus = 0.28 here); ladder depth "
        "capped at 4 by default to keep the run short",
        "c_minus_values": "0.2:0.6:0.02",
        "beta": 0.8,
        "gamma": 0.9,
        "delta": 0.0,
        "c_plus": 1.0,
        "r": 1.0,
        "M": 50.0,
        "max_levels": 4,
        "x_max": 60.0,
        "dx": 0.1,
    },
    "fig9-ablation": {
        "command": "sweep",
        "describe": "population behavior under re-optimized designs per boost "
        "value: mean post-action attribute and improvement fraction over a "
        "20-step horizon (search budget reduced to depths 2..4)",
        "behavior": True,
        "axis": "delta",
        "values": "0.0,0.1,0.5",
        "beta": 0.8,
        "gamma": 0.7,
        "delta": 0.0,
        "c_plus": 1.0,
        "c_minus": 0.5,
        "r": 1.0,
        "alpha": 0.95,
        "lam": 5.0,
        "xi": 0.01,
        "horizon": 200,
        "behavior_horizon": 20,
        "levels": "2:4",
        "seed": 0,
        "bins": 25,
        "x_max": 15.0,
        "dx": 0.1,
    },
}


def _parse_floats(value, field: str) -> tuple[float, ...]:
    """Comma list, JSON list, or inclusive start:stop:step range."""
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    text = str(value).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{field}: expected start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{field}: could not parse {text!r}") from None
        if step <= 0.0 or stop < start:
            raise ConfigError(f"{field}: need stop >= start and step > 0")
        count = int(round((stop - start) / step)) + 1
        vals = [round(start + i * step, 12) for i in range(count)]
        return tuple(v for v in vals if v <= stop + step * 1e-9)
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{field}: could not parse {text!r}") from None


def _parse_levels(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(",") if p.strip())


def _load_config_file(path: str, command: str) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"config file: {e}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError("config file: top level must be an object")
    allowed = set(_COMMANDS[command]["required"]) | set(_COMMANDS[command]["optional"])
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"{key}: unknown field for {command}")
        kind = _FIELDS[key][0]
        ok = {
            "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
            "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
            "str": lambda v: isinstance(v, str),
            "bool": lambda v: isinstance(v, bool),
            "list": lambda v: isinstance(v, (list, str, int, float)),
        }[kind](value)
        if not ok:
            raise ConfigError(f"{key}: expected {kind}, got {value!r}")
    return data


def _resolve(args: argparse.Namespace, check_required: bool = True) -> dict:
    command = args.command
    cfg: dict = {}
    if args.preset is not None:
        preset = PRESETS.get(args.preset)
        if preset is None:
            raise ConfigError(
                f"preset: unknown name {args.preset!r} "
                f"(choose from {', '.join(sorted(PRESETS))})"
            )
        if preset["command"] != command:
            raise ConfigError(
                f"preset: {args.preset!r} belongs to the "
                f"{preset['command']!r} subcommand"
            )
        cfg.update({k: v for k, v in preset.items() if k not in ("command", "describe")})
    if args.config is not None:
        cfg.update(_load_config_file(args.config, command))
    allowed = set(_COMMANDS[command]["required"]) | set(_COMMANDS[command]["optional"])
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            cfg[key] = flag
    for key, value in _DEFAULTS.items():
        if key in allowed:
            cfg.setdefault(key, value)
    cfg.setdefault("epsilon", _EPSILON_DEFAULT[command])
    if check_required:
        required = list(_COMMANDS[command]["required"])
        # the swept parameter is supplied through --values, not its own flag
        if command == "sweep" and cfg.get("axis") in required:
            required.remove(cfg["axis"])
        for key in required:
            if key not in cfg:
                raise ConfigError(f"{key}: required, {_FIELDS[key][1]}")
    return cfg


def _model_params(cfg: dict) -> ModelParams:
    return ModelParams(
        beta=cfg["beta"],
        gamma=cfg["gamma"],
        delta=cfg["delta"],
        c_plus=cfg["c_plus"],
        c_minus=cfg["c_minus"],
        r=cfg["r"],
    )


def _ladder(cfg: dict) -> Ladder:
    return Ladder(_parse_floats(cfg["mu"], "mu"))


def _grid(cfg: dict, ladder: Ladder | None, params: ModelParams | None) -> GridSpec:
    if cfg.get("x_max") is not None:
        return GridSpec(x_max=float(cfg["x_max"]), dx=float(cfg["dx"]))
    if ladder is None or params is None:
        raise ConfigError("x_max: required, > 0 (no ladder to size a default from)")
    return default_grid(ladder, params, float(cfg["dx"]))


def _pparams(cfg: dict) -> PrincipalParams:
    return PrincipalParams(
        alpha=cfg["alpha"], lam=cfg["lam"], xi=cfg["xi"], horizon=cfg["horizon"]
    )


def _workers(cfg: dict) -> int:
    if cfg.get("workers") is not None:
        return max(1, int(cfg["workers"]))
    return max(1, int(os.environ.get("LADDERMDP_WORKERS", "1")))


def _map_ordered(fn, task_args: list[tuple], workers: int) -> list:
    if workers <= 1 or len(task_args) <= 1:
        return [fn(*t) for t in task_args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*task_args)))


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cell(value) -> str | int:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if value != value else repr(value)  # NaN prints blank
    return value


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cmd_solve(cfg: dict) -> int:
    params = _model_params(cfg)
    ladder = _ladder(cfg)
    grid = _grid(cfg, ladder, params)
    policy = value_iterate(ladder, params, grid, epsilon=cfg["epsilon"])
    report = convergence_report(policy, params)
    if cfg.get("out"):
        save_policy(policy, cfg["out"])
    _emit(
        {
            "levels": ladder.levels,
            "grid": {"x_max": grid.x_max, "dx": grid.dx, "n_points": grid.n_points},
            "iterations": report.iterations,
            "iteration_bound": report.iteration_bound,
            "max_ratio": report.max_ratio,
            "error_bound": error_bound(params, grid),
            "out": cfg.get("out"),
        }
    )
    return EXIT_OK


def _cmd_regions(cfg: dict) -> int:
    params = _model_params(cfg)
    mu_values = _parse_floats(cfg["mu_values"], "mu_values")
    if not mu_values:
        raise ConfigError("mu_values: required, comma list or start:stop:step")
    top = max(mu_values)
    grid = _grid(cfg, Ladder((0.0, top)), params)
    rows: list[list] = []
    for mu in mu_values:
        try:
            tag = classify_regime(mu, params).tag.value
        except IncentiveDomainError:
            tag = "NotIncentivizable"
        ladder = Ladder((0.0, mu))
        policy = value_iterate(ladder, params, grid, epsilon=cfg["epsilon"])
        for x in policy.grid.points:
            act = policy.action(1, float(x))
            settled = steady_state(
                policy, AgentState(1, float(x)), ladder, params, horizon=cfg["horizon"]
            )
            if settled.states:
                s_level, s_attr = settled.state.level, settled.state.attribute
            else:
                s_level, s_attr = None, None
            rows.append(
                [
                    repr(mu),
                    tag,
                    repr(float(x)),
                    repr(act.a_plus),
                    repr(act.a_minus),
                    settled.kind,
                    s_level,
                    s_attr,
                    settled.entry_time,
                ]
            )
    _write_csv(
        cfg["out"],
        [
            "mu",
            "regime",
            "x",
            "a_plus",
            "a_minus",
            "steady_kind",
            "steady_level",
            "steady_attribute",
            "entry_time",
        ],
        rows,
    )
    _emit({"mu_count": len(mu_values), "rows": len(rows), "out": cfg["out"]})
    return EXIT_OK


def _cmd_closed_form(cfg: dict) -> int:
    params = _model_params(cfg)
    mu_list = _parse_floats(cfg["mu"], "mu")
    if len(mu_list) == 1:
        mu = mu_list[0]
    elif len(mu_list) == 2 and mu_list[0] == 0.0:
        mu = mu_list[1]
    else:
        raise ConfigError("mu: closed-form comparison is two-level; give one threshold")
    analytic = w_closed(mu, params)
    ladder = Ladder((0.0, mu))
    grid = _grid(cfg, ladder, params)
    policy = value_iterate(ladder, params, grid, epsilon=cfg["epsilon"])
    xs = policy.grid.points
    w_ana = analytic.value(xs)
    w_num = policy.W.values[0]
    gaps = abs(w_num - w_ana)
    bound = error_bound(params, grid)
    if cfg.get("out"):
        _write_csv(
            cfg["out"],
            ["x", "w_closed", "w_solver", "gap"],
            [
                [repr(float(x)), repr(float(a)), repr(float(n)), repr(float(g))]
                for x, a, n, g in zip(xs, w_ana, w_num, gaps)
            ],
        )
    _emit(
        {
            "regime": analytic.regime.tag.value,
            "mu": mu,
            "sup_gap": float(gaps.max()),
            "error_bound": bound,
            "within_bound": bool(gaps.max() <= bound + 1e-6),
            "out": cfg.get("out"),
        }
    )
    return EXIT_OK


def _cmd_design(cfg: dict) -> int:
    params = _model_params(cfg)
    problem = DesignProblem(M=cfg["M"], r=cfg["r"], params=params)
    if cfg["mode"] == "natural":
        try:
            ladder = natural_sequence(problem)
        except ValueError as e:
            print(f"infeasible: {e}", file=sys.stderr)
            return EXIT_INFEASIBLE
        payload = {"mode": "natural", "thresholds": list(ladder.mu), "levels": ladder.levels}
    elif cfg["mode"] == "greedy":
        grid = _grid(cfg, None, None)
        result = greedy_thresholds(
            problem, grid, epsilon=cfg["epsilon"], max_levels=cfg["max_levels"]
        )
        payload = {
            "mode": "greedy",
            "thresholds": list(result.thresholds),
            "diagnostic": result.diagnostic,
            "max_level": result.max_level,
            "max_attribute": result.max_attribute,
        }
        if result.ladder is None:
            if cfg.get("out"):
                Path(cfg["out"]).write_text(json.dumps(payload, indent=2) + "\n")
            _emit(payload)
            return EXIT_INFEASIBLE
    else:
        raise ConfigError("mode: natural or greedy")
    if cfg.get("out"):
        Path(cfg["out"]).write_text(json.dumps(payload, indent=2) + "\n")
    _emit(payload)
    return EXIT_OK


def _cmd_verify(cfg: dict) -> int:
    params = _model_params(cfg)
    ladder = _ladder(cfg)
    problem = DesignProblem(M=cfg["M"], r=cfg["r"], params=params)
    grid = _grid(cfg, ladder, params)
    x0_set = None
    if cfg.get("x0_set") is not None:
        x0_set = list(_parse_floats(cfg["x0_set"], "x0_set"))
    report = verify_feasible(ladder, problem, grid, x0_set=x0_set, horizon=cfg["horizon"])
    payload = {
        "feasible": report.feasible,
        "violations": [
            {"x0": v.x0, "constraints": list(v.constraints), "first_t": v.first_t}
            for v in report.violated
        ],
    }
    if report.convergence is not None:
        payload["convergence"] = {
            "iterations": report.convergence.iterations,
            "iteration_bound": report.convergence.iteration_bound,
            "max_ratio": report.convergence.max_ratio,
        }
    if cfg.get("out"):
        Path(cfg["out"]).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if cfg.get("witness_out") and report.witness is not None:
        write_trajectory_csv(report.witness, cfg["witness_out"])
    _emit(payload)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _cmd_simulate(cfg: dict) -> int:
    params = _model_params(cfg)
    ladder = _ladder(cfg)
    grid = _grid(cfg, ladder, params)
    policy = value_iterate(ladder, params, grid, epsilon=cfg["epsilon"])
    start = AgentState(int(cfg["level0"]), float(cfg["x0"]))
    traj = rollout(policy, start, ladder, params, horizon=cfg["horizon"])
    write_trajectory_csv(traj, cfg["out"])
    settled = steady_state(policy, start, ladder, params, horizon=cfg["horizon"])
    _emit(
        {
            "steps": len(traj),
            "steady_kind": settled.kind,
            "steady_states": [
                {"level": s.level, "attribute": s.attribute} for s in settled.states
            ],
            "entry_time": settled.entry_time,
            "discounted_return": traj.discounted_return(params.beta),
            "out": cfg["out"],
        }
    )
    return EXIT_OK


_SWEEP_AXES = ("beta", "gamma", "delta", "c_plus", "c_minus", "r", "M")


def _sweep_problem(base: ModelParams, axis: str, value: float, M: float) -> DesignProblem:
    if axis == "M":
        return DesignProblem(M=value, r=base.r, params=base)
    params = replace(base, **{axis: value})
    return DesignProblem(M=M, r=params.r, params=params)


def _behavior_rows(
    axis: str,
    value: float,
    params: ModelParams,
    pparams: PrincipalParams,
    dist,
    grid: GridSpec,
    levels: tuple[int, ...],
    config: CmaConfig,
    seed: int,
    solver_epsilon: float,
    behavior_horizon: int,
) -> list[list]:
    """Optimize at one axis value, then report the population response."""
    search = optimize_over_levels(
        pparams,
        params,
        dist,
        grid,
        seed=seed,
        levels=levels,
        config=config,
        solver_epsilon=solver_epsilon,
    )
    best = search.best
    ladder, eff, policy = design_policy(best.design, params, grid, solver_epsilon)
    agg = population_rollout(policy, ladder, eff, dist, behavior_horizon)
    rows = []
    for t in range(behavior_horizon):
        rows.append(
            [
                axis,
                repr(value),
                best.levels,
                t,
                repr(float(agg.mean_x_post[t])),
                repr(float(agg.std_x_post[t])),
                float(agg.mean_improvement_fraction[t]),
            ]
        )
    return rows


def _cmd_sweep(cfg: dict) -> int:
    axis = cfg["axis"]
    values = _parse_floats(cfg["values"], "values")
    if not values:
        raise ConfigError("values: required, comma list or start:stop:step")
    if axis in _SWEEP_AXES[:-1] and axis not in cfg:
        cfg = dict(cfg, **{axis: values[0]})
    params = _model_params(cfg)
    workers = _workers(cfg)
    if cfg.get("behavior"):
        if axis not in _SWEEP_AXES[:-1]:
            raise ConfigError("axis: behavior sweeps vary a model parameter, not M")
        pparams = _pparams(cfg)
        dist = load_score_distribution(cfg.get("scores"), bins=cfg["bins"])
        grid = _grid(cfg, None, None)
        levels = _parse_levels(cfg["levels"])
        config = CmaConfig(
            population=cfg["population"],
            generations=cfg["generations"],
            sigma0=cfg["sigma0"],
        )
        tasks = [
            (
                axis,
                v,
                replace(params, **{axis: v}),
                pparams,
                dist,
                grid,
                levels,
                config,
                cfg["seed"],
                cfg["epsilon"],
                cfg["behavior_horizon"],
            )
            for v in values
        ]
        batches = _map_ordered(_behavior_rows, tasks, workers)
        rows = [row for batch in batches for row in batch]
        _write_csv(
            cfg["out"],
            ["axis", "value", "levels", "t", "mean_x_post", "std_x_post", "mean_improvement_fraction"],
            rows,
        )
        _emit({"axis": axis, "values": len(values), "rows": len(rows), "out": cfg["out"]})
        return EXIT_OK
    if axis not in _SWEEP_AXES:
        raise ConfigError(f"axis: {_FIELDS['axis'][1]}")
    if axis != "M" and "M" not in cfg:
        raise ConfigError("M: required, >= 0")
    grid = _grid(cfg, None, None)
    problems = [_sweep_problem(params, axis, v, cfg.get("M", 0.0)) for v in values]
    tasks = [(p, grid, cfg["epsilon"], cfg["max_levels"]) for p in problems]
    records = _map_ordered(sweep_entry, tasks, workers)
    write_sweep_csv(records, cfg["out"])
    _emit({"axis": axis, "rows": len(records), "out": cfg["out"]})
    return EXIT_OK


def _cmd_heatmap(cfg: dict) -> int:
    betas = _parse_floats(cfg["beta_values"], "beta_values")
    gammas = _parse_floats(cfg["gamma_values"], "gamma_values")
    if not betas or not gammas:
        raise ConfigError("beta_values/gamma_values: required, non-empty")
    grid = _grid(cfg, None, None)
    problems = []
    for b in betas:
        for g in gammas:
            params = ModelParams(
                beta=b,
                gamma=g,
                delta=cfg["delta"],
                c_plus=cfg["c_plus"],
                c_minus=cfg["c_minus"],
                r=cfg["r"],
            )
            problems.append(DesignProblem(M=cfg["M"], r=params.r, params=params))
    tasks = [(p, grid, cfg["epsilon"], cfg["max_levels"]) for p in problems]
    records = _map_ordered(sweep_entry, tasks, _workers(cfg))
    write_sweep_csv(records, cfg["out"])
    _emit({"cells": len(records), "out": cfg["out"]})
    return EXIT_OK


def _cmd_phase(cfg: dict) -> int:
    values = _parse_floats(cfg["c_minus_values"], "c_minus_values")
    if not values:
        raise ConfigError("c_minus_values: required, non-empty")
    grid = _grid(cfg, None, None)
    records = []
    for cm in values:
        params = ModelParams(
            beta=cfg["beta"],
            gamma=cfg["gamma"],
            delta=cfg["delta"],
            c_plus=cfg["c_plus"],
            c_minus=cm,
            r=cfg["r"],
        )
        problem = DesignProblem(M=cfg["M"], r=params.r, params=params)
        records.append(sweep_entry(problem, grid, cfg["epsilon"], cfg["max_levels"]))
    write_sweep_csv(records, cfg["out"])
    _emit({"values": len(values), "out": cfg["out"]})
    return EXIT_OK


def _cmd_optimize(cfg: dict) -> int:
    params = _model_params(cfg)
    pparams = _pparams(cfg)
    dist = load_score_distribution(cfg.get("scores"), bins=cfg["bins"])
    if cfg.get("x_max") is None:
        # headroom above the score scale; candidate thresholds are capped
        # inside the grid by the evaluation itself
        cfg = dict(cfg, x_max=15.0)
    grid = _grid(cfg, None, None)
    search = optimize_over_levels(
        pparams,
        params,
        dist,
        grid,
        seed=cfg["seed"],
        levels=_parse_levels(cfg["levels"]),
        config=CmaConfig(
            population=cfg["population"],
            generations=cfg["generations"],
            sigma0=cfg["sigma0"],
        ),
        solver_epsilon=cfg["epsilon"],
    )
    if cfg.get("out"):
        write_json_report(search, cfg["out"])
    if cfg.get("traj_out"):
        best = search.best
        ladder, eff, policy = design_policy(best.design, params, grid, cfg["epsilon"])
        rows = []
        for x0, mass in zip(dist.support, dist.mass):
            traj = rollout(
                policy, AgentState(1, x0), ladder, eff, horizon=cfg["behavior_horizon"]
            )
            for s in traj.steps:
                rows.append(
                    [
                        repr(x0),
                        repr(mass),
                        s.t,
                        s.level_before,
                        repr(s.x_before),
                        repr(s.action.a_plus),
                        repr(s.action.a_minus),
                        repr(s.z),
                        repr(s.x_post),
                        s.level_after,
                        repr(s.reward),
                        repr(s.cost),
                    ]
                )
        _write_csv(
            cfg["traj_out"],
            ["x0", "mass", "t", "level", "x_pre", "a_plus", "a_minus", "z", "x_post", "level_after", "reward", "cost"],
            rows,
        )
    best = search.best
    _emit(
        {
            "table": search.table(),
            "best": {
                "levels": best.levels,
                "r": best.design.r,
                "thresholds": list(best.design.thresholds),
                "utility": best.utility,
            },
            "out": cfg.get("out"),
            "traj_out": cfg.get("traj_out"),
        }
    )
    return EXIT_OK


_HANDLERS = {
    "solve": _cmd_solve,
    "regions": _cmd_regions,
    "closed-form": _cmd_closed_form,
    "design": _cmd_design,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "heatmap": _cmd_heatmap,
    "phase": _cmd_phase,
    "optimize": _cmd_optimize,
}

_FLAG_TYPES = {"float": float, "int": int, "str": str}


def _add_flags(sub: argparse.ArgumentParser, command: str) -> None:
    spec = _COMMANDS[command]
    for name in spec["required"] + spec["optional"]:
        if name == "mode":
            continue
        kind, doc = _FIELDS[name]
        flag = "--" + name.replace("_", "-")
        if command == "phase" and name == "c_minus_values":
            # the sweep axis doubles as the plain flag name here
            sub.add_argument("--c-minus", dest="c_minus_values", type=str, help=doc)
            continue
        if kind == "bool":
            sub.add_argument(flag, action="store_true", default=None, help=doc)
        elif kind == "list":
            sub.add_argument(flag, type=str, default=None, help=doc)
        else:
            sub.add_argument(flag, type=_FLAG_TYPES[kind], default=None, help=doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laddermdp",
        description="Solve, design, and stress-test threshold-ladder "
        "incentive systems for strategic agents.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve one agent best response and dump the policy",
        "regions": "two-level strategy and steady-state map over (x, mu)",
        "closed-form": "analytic two-level value vs the solver",
        "design": "build a ladder (natural closed form or greedy search)",
        "verify": "check a ladder against the honest-climb constraints",
        "simulate": "roll a solved policy forward and dump the trajectory",
        "sweep": "greedy thresholds (or optimized-design behavior) along one axis",
        "heatmap": "greedy outcomes over a beta x gamma grid",
        "phase": "greedy outcomes along a gaming-cost sweep",
        "optimize": "search reward and thresholds per ladder depth",
    }
    for command in _COMMANDS:
        sub = subs.add_parser(command, help=helps[command])
        if command == "design":
            sub.add_argument("mode", choices=("natural", "greedy"), help="construction")
        sub.add_argument("--preset", type=str, default=None, help="named parameter set")
        sub.add_argument("--config", type=str, default=None, help="JSON config path")
        sub.add_argument(
            "--describe",
            action="store_true",
            help="print the resolved configuration and exit",
        )
        _add_flags(sub, command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args, check_required=not args.describe)
        if args.describe:
            payload = {"command": args.command, "config": cfg}
            if args.preset is not None:
                payload["preset"] = args.preset
                payload["description"] = PRESETS[args.preset]["describe"]
            _emit(payload)
            return EXIT_OK
        return _HANDLERS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverConvergenceError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
