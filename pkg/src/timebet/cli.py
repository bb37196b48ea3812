"""Experiment runner: JSON configs in, figure-ready CSV/JSON files out.

One config file describes one experiment.  Blocks (all optional keys
shown with their defaults):

  problem     {"variant": "bernoulli", "p0": …, "p1": …, "alpha": …}
              {"variant": "gaussian", "mean0": 0.0, "mean1": …,
               "sigma": 1.0, "alpha": …}
  reward      {"kind": "hard-deadline", "deadline": …}
              {"kind": "logistic", "center": …, "scale": …}
              {"kind": "exponential", "timescale": …}
              {"kind": "table", "values": […]}
              (bellman, simulate and compare accept a list of blocks)
  solver      {"wealth_nodes": 401, "z_min": 1e-8, "action_nodes": 401,
               "horizon": null, "capping": false,
               "quadrature_nodes": 41, "a_max": 4.0}
  simulation  {"horizon": …, "paths": 20000, "seed": 0,
               "measure": "alternative", "crn": true,
               "wealth_rounds": []}
  strategies  [{"kind": …, "label": optional, …}, …] with kinds
              constant{action}, gro, edo{timescale, capped},
              capped-constant{action}, star-bets{deadline},
              schedule-mix{deadline}, np-doob{deadline, scale},
              upper-tail{deadline, scale},
              bellman-policy{reward, capping}
  output      {"dir": null, "format": "csv"}

Subcommands: edo | bellman | doob | simulate | compare.  Flags override
file values (--out, --format, and for the simulation commands --seed
and --paths); when neither flag nor config names an output directory,
the TIMEBET_OUT environment variable is consulted before falling back
to the current directory.  Exit codes: 0 ok, 1 usage or config error,
2 solver or domain error.

Every file produced embeds provenance: the exact command line, package
version, seed (null for the deterministic commands), a sha256 hash of
the resolved experiment blocks (output block excluded, so the same
experiment hashes identically wherever it is written), wall-clock
runtime, and the fully resolved config with every default materialised.
CSV files carry it as leading "# key: value" comment lines; JSON
reports carry it under a "meta" key.  Data rows are deterministic for a
fixed config; the runtime line is the only part of a file that varies
between identical reruns.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np
from scipy.special import ndtr

from . import __version__
from .bellman import (
    QUADRATURE_NODES,
    WealthGrid,
    backward_induction,
    default_action_grid,
    long_records,
)
from .baselines import ScheduleMixStrategy, StarBetsStrategy, capped_constant
from .edo import gro_action, is_power_one, power_exponent, solve, stationary_rate
from .errors import TimebetError
from .hard_deadline import (
    BernoulliDoobStrategy,
    bernoulli_np_exact,
    bernoulli_upper_tail_approx,
    distribution_records,
    event_record,
    exact_stopping_distribution,
    gaussian_np,
)
from .model import Bernoulli, Gaussian, TestingProblem, canonical_family
from .reward import ExponentialDecay, HardDeadline, Logistic, Table
from .simulate import (
    ConstantBet,
    PolicyStrategy,
    SimConfig,
    compare,
    comparison_records,
    wilson_interval,
)

__all__ = ["ConfigError", "main"]

ENV_OUT = "TIMEBET_OUT"

_BLOCKS = ("problem", "reward", "solver", "simulation", "strategies", "output")

_SOLVER_DEFAULTS = {
    "wealth_nodes": 401,
    "z_min": 1e-8,
    "action_nodes": 401,
    "horizon": None,
    "capping": False,
    "quadrature_nodes": QUADRATURE_NODES,
    "a_max": 4.0,
}

_SIM_DEFAULTS = {
    "paths": 20_000,
    "seed": 0,
    "measure": "alternative",
    "crn": True,
    "wealth_rounds": [],
}


class ConfigError(Exception):
    """Malformed config file or option combination; maps to exit code 1."""


# ---------------------------------------------------------------------------
# Config loading and schema validation
# ---------------------------------------------------------------------------

_MISSING = object()

_KINDS = {
    "int": (int,),
    "number": (int, float),
    "bool": (bool,),
    "str": (str,),
    "list": (list,),
}


def _field(block: dict, key: str, where: str, kind: str, default=_MISSING):
    """One schema-checked field; booleans never pass as ints or numbers."""
    if key not in block:
        if default is _MISSING:
            raise ConfigError(f"{where}: missing required key '{key}'")
        return default
    value = block[key]
    if default is None and value is None:
        return None
    if isinstance(value, bool) and kind != "bool":
        raise ConfigError(f"{where}: '{key}' must be a {kind}, got a bool")
    if not isinstance(value, _KINDS[kind]):
        raise ConfigError(f"{where}: '{key}' must be a {kind}, got {value!r}")
    return value


def _reject_unknown(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _check_dict(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object, got {value!r}")
    return value


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return _check_dict(raw, "config")


def _check_problem_block(block) -> dict:
    block = _check_dict(block, "problem block")
    variant = _field(block, "variant", "problem block", "str")
    if variant == "bernoulli":
        _reject_unknown(block, ("variant", "p0", "p1", "alpha"), "problem block")
        return {
            "variant": "bernoulli",
            "p0": _field(block, "p0", "problem block", "number"),
            "p1": _field(block, "p1", "problem block", "number"),
            "alpha": _field(block, "alpha", "problem block", "number"),
        }
    if variant == "gaussian":
        _reject_unknown(
            block, ("variant", "mean0", "mean1", "sigma", "alpha"), "problem block"
        )
        return {
            "variant": "gaussian",
            "mean0": _field(block, "mean0", "problem block", "number", 0.0),
            "mean1": _field(block, "mean1", "problem block", "number"),
            "sigma": _field(block, "sigma", "problem block", "number", 1.0),
            "alpha": _field(block, "alpha", "problem block", "number"),
        }
    raise ConfigError(
        f"problem block: variant must be 'bernoulli' or 'gaussian', got {variant!r}"
    )


def _check_reward_block(block, where: str = "reward block") -> dict:
    block = _check_dict(block, where)
    kind = _field(block, "kind", where, "str")
    if kind == "hard-deadline":
        _reject_unknown(block, ("kind", "deadline"), where)
        return {"kind": kind, "deadline": _field(block, "deadline", where, "int")}
    if kind == "logistic":
        _reject_unknown(block, ("kind", "center", "scale"), where)
        return {
            "kind": kind,
            "center": _field(block, "center", where, "number"),
            "scale": _field(block, "scale", where, "number"),
        }
    if kind == "exponential":
        _reject_unknown(block, ("kind", "timescale"), where)
        return {"kind": kind, "timescale": _field(block, "timescale", where, "number")}
    if kind == "table":
        _reject_unknown(block, ("kind", "values"), where)
        values = _field(block, "values", where, "list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}: table values must be numbers, got {v!r}")
        return {"kind": kind, "values": list(values)}
    raise ConfigError(
        f"{where}: kind must be one of hard-deadline, logistic, exponential, "
        f"table; got {kind!r}"
    )


def _check_reward_blocks(raw) -> list[dict]:
    if isinstance(raw, list):
        if not raw:
            raise ConfigError("reward list must not be empty")
        return [
            _check_reward_block(b, f"reward block #{i + 1}") for i, b in enumerate(raw)
        ]
    return [_check_reward_block(raw)]


def _check_solver_block(block) -> dict:
    block = _check_dict(block, "solver block")
    _reject_unknown(block, _SOLVER_DEFAULTS, "solver block")
    out = {
        "wealth_nodes": _field(block, "wealth_nodes", "solver block", "int", 401),
        "z_min": _field(block, "z_min", "solver block", "number", 1e-8),
        "action_nodes": _field(block, "action_nodes", "solver block", "int", 401),
        "horizon": _field(block, "horizon", "solver block", "int", None),
        "capping": _field(block, "capping", "solver block", "bool", False),
        "quadrature_nodes": _field(
            block, "quadrature_nodes", "solver block", "int", QUADRATURE_NODES
        ),
        "a_max": _field(block, "a_max", "solver block", "number", 4.0),
    }
    return out


def _check_sim_block(block) -> dict:
    block = _check_dict(block, "simulation block")
    _reject_unknown(block, ("horizon", *_SIM_DEFAULTS), "simulation block")
    rounds = _field(block, "wealth_rounds", "simulation block", "list", [])
    for t in rounds:
        if isinstance(t, bool) or not isinstance(t, int):
            raise ConfigError(f"simulation block: wealth_rounds must be ints, got {t!r}")
    return {
        "horizon": _field(block, "horizon", "simulation block", "int"),
        "paths": _field(block, "paths", "simulation block", "int", 20_000),
        "seed": _field(block, "seed", "simulation block", "int", 0),
        "measure": _field(block, "measure", "simulation block", "str", "alternative"),
        "crn": _field(block, "crn", "simulation block", "bool", True),
        "wealth_rounds": list(rounds),
    }


def _check_strategy_blocks(raw) -> list[dict]:
    if not isinstance(raw, list):
        raise ConfigError(f"strategies must be a list, got {raw!r}")
    if not raw:
        raise ConfigError("strategies list must not be empty")
    return [_check_dict(b, f"strategy #{i + 1}") for i, b in enumerate(raw)]


def _resolve(raw: dict, args, uses: tuple, require: tuple) -> dict:
    """Validate the blocks a command reads, materialise defaults, apply flags."""
    _reject_unknown(raw, _BLOCKS, "config")
    for name in raw:
        if name not in uses and name != "output":
            raise ConfigError(f"config block '{name}' is not read by this command")
    for name in require:
        if name not in raw:
            raise ConfigError(f"this command needs a '{name}' block")
    resolved: dict = {}
    if "problem" in uses:
        resolved["problem"] = _check_problem_block(raw["problem"])
    if "reward" in uses and "reward" in raw:
        blocks = _check_reward_blocks(raw["reward"])
        resolved["reward"] = blocks if isinstance(raw["reward"], list) else blocks[0]
    if "solver" in uses:
        resolved["solver"] = _check_solver_block(raw.get("solver", {}))
    if "simulation" in uses:
        sim = _check_sim_block(raw["simulation"])
        if getattr(args, "seed", None) is not None:
            sim["seed"] = args.seed
        if getattr(args, "paths", None) is not None:
            sim["paths"] = args.paths
        resolved["simulation"] = sim
    if "strategies" in uses:
        resolved["strategies"] = _check_strategy_blocks(raw["strategies"])
    out = _check_dict(raw.get("output", {}), "output block")
    _reject_unknown(out, ("dir", "format"), "output block")
    fmt = args.format or _field(out, "format", "output block", "str", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output block: format must be 'csv' or 'json', got {fmt!r}")
    directory = (
        args.out
        or _field(out, "dir", "output block", "str", None)
        or os.environ.get(ENV_OUT)
        or "."
    )
    resolved["output"] = {"dir": directory, "format": fmt}
    return resolved


# ---------------------------------------------------------------------------
# Builders: config blocks to library objects
# ---------------------------------------------------------------------------


def _build_problem(block: dict) -> TestingProblem:
    if block["variant"] == "bernoulli":
        return TestingProblem(
            Bernoulli(float(block["p0"])), Bernoulli(float(block["p1"])),
            float(block["alpha"]),
        )
    sigma = float(block["sigma"])
    return TestingProblem(
        Gaussian(float(block["mean0"]), sigma),
        Gaussian(float(block["mean1"]), sigma),
        float(block["alpha"]),
    )


def _build_reward(block: dict):
    kind = block["kind"]
    if kind == "hard-deadline":
        return HardDeadline(block["deadline"])
    if kind == "logistic":
        return Logistic(float(block["center"]), float(block["scale"]))
    if kind == "exponential":
        return ExponentialDecay(float(block["timescale"]))
    return Table(tuple(float(v) for v in block["values"]))


def _num_slug(value) -> str:
    return f"{value:g}".replace(".", "p").replace("-", "m")


def _reward_slug(block: dict) -> str:
    kind = block["kind"]
    if kind == "hard-deadline":
        return f"hard-deadline-{block['deadline']}"
    if kind == "logistic":
        return f"logistic-{_num_slug(block['center'])}-{_num_slug(block['scale'])}"
    if kind == "exponential":
        return f"exponential-{_num_slug(block['timescale'])}"
    return f"table-{len(block['values'])}"


def _build_strategy(problem: TestingProblem, spec: dict, solver: dict, index: int):
    """One strategy from its config block.

    Returns (strategy, constant_action_or_None, normalised_block); the
    action comes back only when the strategy bets it every round
    uncapped, which is what the power-bound columns of `compare` are
    valid for.  The normalised block replaces the raw one in the config
    echo so defaulted keys show up there.
    """
    where = f"strategy #{index + 1}"
    kind = _field(spec, "kind", where, "str")
    label = _field(spec, "label", where, "str", None)
    family = canonical_family(problem, a_max=float(solver["a_max"]))
    if kind == "constant":
        _reject_unknown(spec, ("kind", "action", "label"), where)
        action = float(_field(spec, "action", where, "number"))
        strategy = ConstantBet(problem, family, action, label=label)
        norm = {"kind": kind, "action": action, "label": strategy.label}
        return strategy, action, norm
    if kind == "gro":
        _reject_unknown(spec, ("kind", "label"), where)
        action = gro_action(problem)
        if label is None:
            label = f"gro[{action:g}]"
        return ConstantBet(problem, family, action, label=label), action, {
            "kind": kind, "label": label,
        }
    if kind == "edo":
        _reject_unknown(spec, ("kind", "timescale", "capped", "label"), where)
        timescale = float(_field(spec, "timescale", where, "number"))
        capped = _field(spec, "capped", where, "bool", False)
        action = solve(problem, timescale).action
        if label is None:
            tag = "edo-capped" if capped else "edo"
            label = f"{tag}[{timescale:g}]"
        norm = {"kind": kind, "timescale": timescale, "capped": capped, "label": label}
        if capped:
            return capped_constant(problem, action, label=label), None, norm
        return ConstantBet(problem, family, action, label=label), action, norm
    if kind == "capped-constant":
        _reject_unknown(spec, ("kind", "action", "label"), where)
        action = float(_field(spec, "action", where, "number"))
        strategy = capped_constant(problem, action, label=label)
        norm = {"kind": kind, "action": action, "label": strategy.label}
        return strategy, None, norm
    if kind == "star-bets":
        _reject_unknown(spec, ("kind", "deadline", "label"), where)
        deadline = _field(spec, "deadline", where, "int")
        strategy = StarBetsStrategy(problem, deadline, label=label)
        norm = {"kind": kind, "deadline": deadline, "label": strategy.label}
        return strategy, None, norm
    if kind == "schedule-mix":
        _reject_unknown(spec, ("kind", "deadline", "label"), where)
        deadline = _field(spec, "deadline", where, "int")
        strategy = ScheduleMixStrategy(problem, deadline, label=label)
        norm = {"kind": kind, "deadline": deadline, "label": strategy.label}
        return strategy, None, norm
    if kind == "np-doob":
        _reject_unknown(spec, ("kind", "deadline", "scale", "label"), where)
        deadline = _field(spec, "deadline", where, "int")
        scale = _field(spec, "scale", where, "str", "event-mass")
        if problem.variant == "gaussian":
            # The Gaussian event has null mass exactly alpha, so both
            # scalings coincide and the scale key is irrelevant.
            doob = gaussian_np(problem.sigma, deadline, problem.alpha)
            if label is not None:
                doob = dataclasses.replace(doob, label=label)
            norm = {"kind": kind, "deadline": deadline, "scale": scale,
                    "label": doob.label}
            return doob, None, norm
        event = bernoulli_np_exact(problem.p0, problem.p1, deadline, problem.alpha)
        strategy = BernoulliDoobStrategy(event, scale=scale, label=label)
        norm = {"kind": kind, "deadline": deadline, "scale": scale,
                "label": strategy.label}
        return strategy, None, norm
    if kind == "upper-tail":
        _reject_unknown(spec, ("kind", "deadline", "scale", "label"), where)
        deadline = _field(spec, "deadline", where, "int")
        scale = _field(spec, "scale", where, "str", "event-mass")
        strategy = bernoulli_upper_tail_approx(
            problem.p0, problem.p1, deadline, problem.alpha, scale=scale
        )
        if label is not None:
            strategy.label = label
        norm = {"kind": kind, "deadline": deadline, "scale": scale,
                "label": strategy.label}
        return strategy, None, norm
    if kind == "bellman-policy":
        _reject_unknown(spec, ("kind", "reward", "capping", "label"), where)
        if "reward" not in spec:
            raise ConfigError(f"{where}: bellman-policy needs a reward block")
        block = _check_reward_block(spec["reward"], f"{where} reward")
        capping = _field(spec, "capping", where, "bool", bool(solver["capping"]))
        grid = WealthGrid.logarithmic(
            z_min=float(solver["z_min"]), count=solver["wealth_nodes"]
        )
        actions = default_action_grid(family, count=solver["action_nodes"])
        _, policy = backward_induction(
            problem,
            family,
            _build_reward(block),
            grid,
            actions,
            horizon=solver["horizon"],
            capping=capping,
            quadrature_nodes=solver["quadrature_nodes"],
        )
        if label is None:
            label = f"policy[{_reward_slug(block)}]"
        norm = {"kind": kind, "reward": block, "capping": capping, "label": label}
        return PolicyStrategy(problem, policy, label=label), None, norm
    raise ConfigError(f"{where}: unknown strategy kind {kind!r}")


def _build_strategies(problem, resolved):
    """All strategies; swaps the normalised blocks into the config echo."""
    built = []
    norms = []
    for i, spec in enumerate(resolved["strategies"]):
        strategy, action, norm = _build_strategy(problem, spec, resolved["solver"], i)
        built.append((strategy, action))
        norms.append(norm)
    resolved["strategies"] = norms
    return built


# ---------------------------------------------------------------------------
# Provenance and file writers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _meta(resolved: dict, argv: list, started: float) -> dict:
    # The hash covers the experiment, not where it is written.
    hashed = {k: v for k, v in resolved.items() if k != "output"}
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    sim = resolved.get("simulation")
    return {
        "command": " ".join(["timebet", *argv]),
        "version": __version__,
        "seed": None if sim is None else sim["seed"],
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "runtime_seconds": round(time.perf_counter() - started, 3),
        "config": resolved,
    }


def _outdir(resolved: dict) -> str:
    directory = resolved["output"]["dir"]
    os.makedirs(directory, exist_ok=True)
    return directory


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(resolved, name, fieldnames, rows, meta) -> str:
    """One tabular artifact: CSV with # provenance comments, or JSON rows."""
    directory = _outdir(resolved)
    if resolved["output"]["format"] == "json":
        return _write_report(resolved, name, {"rows": rows}, meta)
    path = os.path.join(directory, f"{name}.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in ("command", "version", "seed", "config_hash", "runtime_seconds"):
            fh.write(f"# {key}: {json.dumps(meta[key])}\n")
        fh.write(
            "# config: "
            + json.dumps(meta["config"], sort_keys=True, separators=(",", ":"))
            + "\n"
        )
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format_cell(row.get(f)) for f in fieldnames])
    return path


def _write_report(resolved, name, payload: dict, meta) -> str:
    path = os.path.join(_outdir(resolved), f"{name}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"meta": meta, **payload}, fh, indent=2, default=_jsonable)
        fh.write("\n")
    return path


def _dist_record(dist) -> dict:
    if isinstance(dist, Bernoulli):
        return {"variant": "bernoulli", "p": dist.p}
    return {"variant": "gaussian", "mean": dist.mean, "sigma": dist.sigma}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_edo(args, argv: list, started: float) -> int:
    raw = _load_config(args.config)
    resolved = _resolve(
        raw, args, uses=("problem", "reward"), require=("problem", "reward")
    )
    block = resolved["reward"]
    if isinstance(block, list) or block["kind"] != "exponential":
        raise ConfigError(
            "edo needs a single exponential reward block; its timescale is "
            "the stationary solver's target"
        )
    problem = _build_problem(resolved["problem"])
    solution = solve(problem, float(block["timescale"]))
    lower, upper = solution.value_bounds(1.0)
    gro = gro_action(problem)
    report = {
        "problem": resolved["problem"],
        "timescale": solution.timescale,
        "eta_star": solution.eta_star,
        "renyi_order": solution.renyi_order,
        "action": solution.action,
        "tilted": _dist_record(solution.tilted),
        "payoff_bound": solution.payoff_bound,
        "gamma": solution.gamma,
        "power_one": solution.power_one,
        "kappa": solution.kappa,
        "value_bounds": {"wealth": 1.0, "lower": lower, "upper": upper},
        "gro": {"action": gro, "difference": solution.action - gro},
        # Residual of the tilt equation g(eta) = 1/T at the reported root.
        "rate_residual": stationary_rate(problem, solution.eta_star)
        - 1.0 / solution.timescale,
    }
    bounds = solution.power_bounds(1.0)
    report["power_bounds"] = (
        None if bounds is None else {"lower": bounds[0], "upper": bounds[1]}
    )
    path = _write_report(resolved, "edo", report, _meta(resolved, argv, started))
    print(f"wrote {path}")
    return 0


def cmd_bellman(args, argv: list, started: float) -> int:
    raw = _load_config(args.config)
    resolved = _resolve(
        raw,
        args,
        uses=("problem", "reward", "solver"),
        require=("problem", "reward"),
    )
    problem = _build_problem(resolved["problem"])
    solver = resolved["solver"]
    family = canonical_family(problem, a_max=float(solver["a_max"]))
    grid = WealthGrid.logarithmic(
        z_min=float(solver["z_min"]), count=solver["wealth_nodes"]
    )
    actions = default_action_grid(family, count=solver["action_nodes"])
    blocks = resolved["reward"]
    if not isinstance(blocks, list):
        blocks = [blocks]
    for block in blocks:
        table, policy = backward_induction(
            problem,
            family,
            _build_reward(block),
            grid,
            actions,
            horizon=solver["horizon"],
            capping=solver["capping"],
            quadrature_nodes=solver["quadrature_nodes"],
        )
        horizon = table.horizon
        values = table.values[:horizon]
        heat = {
            "reward": block,
            "horizon": horizon,
            "capped": bool(policy.capped),
            "z": grid.nodes.tolist(),
            "t": list(range(horizon)),
            "value": values.tolist(),
            "action": policy.actions.tolist(),
            # Nodes from which no future reward is attainable.
            "hopeless": (values == 0.0).tolist(),
        }
        slug = _reward_slug(block)
        meta = _meta(resolved, argv, started)
        path = _write_rows(
            resolved, f"bellman_{slug}", ("t", "z", "value", "action"),
            long_records(table, policy), meta,
        )
        print(f"wrote {path}")
        path = _write_report(resolved, f"bellman_{slug}_heatmap", heat, meta)
        print(f"wrote {path}")
    return 0


def cmd_doob(args, argv: list, started: float) -> int:
    raw = _load_config(args.config)
    resolved = _resolve(
        raw, args, uses=("problem", "reward"), require=("problem", "reward")
    )
    block = resolved["reward"]
    if isinstance(block, list) or block["kind"] != "hard-deadline":
        raise ConfigError(
            "doob needs a single hard-deadline reward block naming the deadline"
        )
    deadline = block["deadline"]
    problem = _build_problem(resolved["problem"])
    if problem.variant == "gaussian":
        if problem.null.mean != 0.0:
            raise ConfigError(
                "the gaussian deadline analysis assumes a zero-mean null; "
                "recentre the observations"
            )
        event = gaussian_np(problem.sigma, deadline, problem.alpha)
        delta = problem.alternative.mean
        power = float(
            ndtr((delta * deadline - event.threshold) / (problem.sigma * math.sqrt(deadline)))
        )
        report = {
            "problem": resolved["problem"],
            "deadline": deadline,
            "event": event_record(event),
            "power": power,
            "early_rejection_possible": False,
            "note": "no early rejection possible: the conditional event "
            "probability stays below 1 before the deadline",
        }
        path = _write_report(resolved, "doob", report, _meta(resolved, argv, started))
        print(f"wrote {path}")
        return 0
    event = bernoulli_np_exact(problem.p0, problem.p1, deadline, problem.alpha)
    tail = bernoulli_upper_tail_approx(problem.p0, problem.p1, deadline, problem.alpha)
    report = {
        "problem": resolved["problem"],
        "deadline": deadline,
        "event": event_record(event),
        "upper_tail": {
            "threshold": tail.threshold,
            "event_mass": float(tail.event_mass),
            "event_mass_exact": str(tail.event_mass),
            "power": float(tail.power),
            "power_exact": str(tail.power),
        },
    }
    rows = None
    if not any(event.level_counts):
        report["note"] = "the event is empty: no string fits under alpha"
        report["early_rejection_possible"] = False
    elif not event.is_threshold:
        report["note"] = (
            "the optimal event is not of threshold form; no aggregated "
            "stopping law is emitted"
        )
        report["early_rejection_possible"] = None
    else:
        strategy = BernoulliDoobStrategy(event, scale="event-mass")
        report["stopping_scale"] = strategy.scale
        rows = []
        for measure in ("alternative", "null"):
            dist = exact_stopping_distribution(problem, strategy, deadline, measure)
            for record in distribution_records(dist):
                rows.append({"measure": measure, **record})
        # Every string has positive mass under both measures, so a
        # pre-deadline crossing exists iff it carries mass in the law.
        report["early_rejection_possible"] = any(
            r["round"] < deadline and r["mass"] > 0.0 for r in rows
        )
    meta = _meta(resolved, argv, started)
    path = _write_report(resolved, "doob", report, meta)
    print(f"wrote {path}")
    if rows is not None:
        path = _write_rows(
            resolved, "doob_distribution", ("measure", "round", "mass", "cdf"),
            rows, meta,
        )
        print(f"wrote {path}")
    return 0


def _run_comparison(resolved):
    problem = _build_problem(resolved["problem"])
    sim = resolved["simulation"]
    config = SimConfig(
        horizon=sim["horizon"],
        paths=sim["paths"],
        seed=sim["seed"],
        measure=sim["measure"],
        crn=sim["crn"],
        wealth_rounds=tuple(sim["wealth_rounds"]),
    )
    blocks = resolved.get("reward")
    if blocks is None:
        blocks = []
    elif not isinstance(blocks, list):
        blocks = [blocks]
    rewards = tuple(_build_reward(b) for b in blocks)
    built = _build_strategies(problem, resolved)
    outcomes = compare(problem, [s for s, _ in built], config, rewards=rewards)
    return problem, config, blocks, built, outcomes


def cmd_simulate(args, argv: list, started: float) -> int:
    raw = _load_config(args.config)
    resolved = _resolve(
        raw,
        args,
        uses=("problem", "reward", "solver", "simulation", "strategies"),
        require=("problem", "simulation", "strategies"),
    )
    _, config, blocks, _, outcomes = _run_comparison(resolved)
    meta = _meta(resolved, argv, started)
    path = _write_rows(
        resolved, "simulate_distributions", ("strategy", "t", "mass", "cdf", "se"),
        comparison_records(outcomes), meta,
    )
    print(f"wrote {path}")
    summary = []
    for outcome in outcomes:
        cdf = outcome.distribution.cdf
        entry = {
            "label": outcome.label,
            "rejection_rate": float(cdf[-1]),
            "never_reject": float(1.0 - cdf[-1]),
            "rewards": [
                {
                    "reward": _reward_slug(block),
                    "estimate": estimate.estimate,
                    "se": estimate.standard_error,
                    "truncation_bound": estimate.truncation_bound,
                }
                for block, (_, estimate) in zip(blocks, outcome.rewards)
            ],
        }
        summary.append(entry)
    path = _write_report(
        resolved, "simulate_summary",
        {"paths": config.paths, "strategies": summary}, meta,
    )
    print(f"wrote {path}")
    return 0


def cmd_compare(args, argv: list, started: float) -> int:
    raw = _load_config(args.config)
    resolved = _resolve(
        raw,
        args,
        uses=("problem", "reward", "solver", "simulation", "strategies"),
        require=("problem", "simulation", "strategies"),
    )
    problem, config, blocks, built, outcomes = _run_comparison(resolved)
    family = canonical_family(problem, a_max=float(resolved["solver"]["a_max"]))
    meta = _meta(resolved, argv, started)
    path = _write_rows(
        resolved, "compare_distributions", ("strategy", "t", "mass", "cdf", "se"),
        comparison_records(outcomes), meta,
    )
    print(f"wrote {path}")
    summary = []
    for (strategy, action), outcome in zip(built, outcomes):
        cdf = outcome.distribution.cdf
        power = float(cdf[-1])
        successes = int(round(power * config.paths))
        low, high = wilson_interval(successes, config.paths)
        row = {
            "strategy": outcome.label,
            "power": power,
            "wilson_low": low,
            "wilson_high": high,
            "never_reject": 1.0 - power,
            "action": action,
            "power_one": None,
            "bound_low": None,
            "bound_high": None,
        }
        if action is not None:
            # Total-power bounds hold for uncapped constant bets only.
            row["power_one"] = is_power_one(problem, family, action)
            exponent = power_exponent(problem, family, action)
            if exponent is not None:
                row["bound_low"], row["bound_high"] = exponent.bounds(1.0)
        summary.append(row)
    path = _write_rows(
        resolved, "compare_summary",
        (
            "strategy", "power", "wilson_low", "wilson_high", "never_reject",
            "action", "power_one", "bound_low", "bound_high",
        ),
        summary, meta,
    )
    print(f"wrote {path}")
    if blocks:
        rows = []
        for outcome in outcomes:
            for block, (_, estimate) in zip(blocks, outcome.rewards):
                rows.append(
                    {
                        "strategy": outcome.label,
                        "reward": _reward_slug(block),
                        "estimate": estimate.estimate,
                        "se": estimate.standard_error,
                        "truncation_bound": estimate.truncation_bound,
                    }
                )
        path = _write_rows(
            resolved, "compare_rewards",
            ("strategy", "reward", "estimate", "se", "truncation_bound"),
            rows, meta,
        )
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is the solver-error code
    # here, so route usage problems to exit code 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_COMMANDS = {
    "edo": (cmd_edo, "stationary-tilt solve for an exponential reward", False),
    "bellman": (cmd_bellman, "finite-horizon dynamic program tables", False),
    "doob": (cmd_doob, "hard-deadline oracle report", False),
    "simulate": (cmd_simulate, "run strategies forward on sampled outcomes", True),
    "compare": (cmd_compare, "multi-strategy power and reward bundle", True),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timebet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text, simulates) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, metavar="PATH",
                       help="experiment config file (JSON)")
        p.add_argument("--out", metavar="DIR",
                       help=f"output directory (overrides config and ${ENV_OUT})")
        p.add_argument("--format", choices=("csv", "json"),
                       help="tabular artifact format (default csv)")
        if simulates:
            p.add_argument("--seed", type=int, help="override the simulation seed")
            p.add_argument("--paths", type=int, help="override the path count")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        return args.func(args, argv, started)
    except ConfigError as exc:
        print(f"timebet: error: {exc}", file=sys.stderr)
        return 1
    except TimebetError as exc:
        print(f"timebet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
