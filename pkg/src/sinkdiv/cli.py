"""Command-line front end.

Subcommands: compute, sweep, dither, potentials. Configuration comes from a
JSON file plus repeatable --set key=value overrides; outputs are CSV/JSON
plot data written atomically. Exit codes: 0 success, 1 configuration error,
2 solver failure (suppressed by --allow-partial).
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .discrepancy import discrepancy
from .dither import DitherConfig
from .dither import dither as run_dither
from .divergence import epsilon_sweep, s_infinity, sinkhorn_divergence, witness_from_limits, write_sweep_csv
from .errors import ConfigError, SinkdivError
from .exact_ot import exact_ot
from .fileio import atomic_write_text
from .kernels import NegatedKernel, cost_from_spec, kernel_from_spec
from .measures import BoundingBox, load_measure, save_potential
from .sinkhorn import SinkhornConfig, extend_potentials, ot_infinity, solve

_COMPUTE_KINDS = {"ot_exact", "ot_eps", "s_eps", "discrepancy", "s_inf"}

# allowed keys per command; unknown keys are rejected before any computation
_SCHEMAS = {
    "compute": {
        "kind", "mu", "nu", "box", "cost", "kernel",
        "epsilon", "max_iter", "tol", "normalize", "output",
    },
    "sweep": {"mu", "nu", "box", "cost", "epsilons", "max_iter", "tol", "output"},
    "dither": {
        "target", "box", "cost", "M", "epsilon", "max_outer_iter", "grad_tol",
        "initial_step", "backtrack", "sufficient_decrease", "seed", "inner_tol",
        "inner_max_iter", "smoothing", "output_positions", "output_trace",
    },
    "potentials": {
        "mu", "nu", "box", "cost", "epsilon", "max_iter", "tol",
        "grid_points_per_axis", "output_phi", "output_psi",
        "output_diff", "output_witness",
    },
}


def _load_config(args, command: str) -> dict:
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            config = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object value")
        node[parts[-1]] = value
    # --seed only applies to commands whose configuration carries a seed
    if args.seed is not None and "seed" in _SCHEMAS[command]:
        config["seed"] = args.seed
    return config


def _validate_keys(command: str, config: dict):
    allowed = _SCHEMAS[command]
    for key in config:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"missing config key {key!r}")
    return config[key]


def _box_from(config) -> BoundingBox:
    spec = _require(config, "box")
    try:
        return BoundingBox(np.asarray(spec["lower"], float), np.asarray(spec["upper"], float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid box: {exc}") from exc


def _epsilon_from(config, key="epsilon") -> float:
    raw = _require(config, key)
    if raw == "inf":
        return math.inf
    try:
        value = float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {key!r}: {raw!r}") from exc
    if value <= 0:
        raise ConfigError(f"{key!r} must be positive")
    return value


def _sinkhorn_config(config, epsilon) -> SinkhornConfig:
    return SinkhornConfig(
        epsilon=epsilon,
        max_iter=int(config.get("max_iter", 10_000)),
        tol=float(config.get("tol", 1e-10)),
        normalize=bool(config.get("normalize", True)),
    )


def _emit_json(config, payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    out = config.get("output")
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_compute(config: dict, allow_partial: bool) -> int:
    _validate_keys("compute", config)
    kind = _require(config, "kind")
    if kind not in _COMPUTE_KINDS:
        raise ConfigError(f"unknown kind {kind!r}, expected one of {sorted(_COMPUTE_KINDS)}")
    box = _box_from(config)
    mu = load_measure(_require(config, "mu"))
    nu = load_measure(_require(config, "nu"))

    status = 0
    if kind == "discrepancy":
        kernel = kernel_from_spec(_require(config, "kernel"), box)
        result = discrepancy(kernel, mu, nu)
        value = result.value
        diagnostics = {"squared": result.squared, "witness_norm": result.witness_norm}
    elif kind == "s_inf":
        kernel = kernel_from_spec(_require(config, "kernel"), box)
        value = s_infinity(NegatedKernel(kernel), mu, nu)
        diagnostics = {"d_squared": 2.0 * value}
    elif kind == "ot_exact":
        cost = cost_from_spec(_require(config, "cost"), box)
        result = exact_ot(cost, mu, nu)
        diagnostics = {
            "dual_value": result.dual_value,
            "marginal_error": result.plan.marginal_error(),
        }
        value = result.value
    elif kind == "ot_eps":
        cost = cost_from_spec(_require(config, "cost"), box)
        cfg = _sinkhorn_config(config, _epsilon_from(config))
        solution = solve(cost, mu, nu, cfg)
        value = solution.value
        diagnostics = dict(solution.diagnostics())
        diagnostics["converged"] = solution.converged
        if not solution.converged and not allow_partial:
            status = 2
    else:  # s_eps
        cost = cost_from_spec(_require(config, "cost"), box)
        cfg = _sinkhorn_config(config, _epsilon_from(config))
        result = sinkhorn_divergence(cost, mu, nu, cfg)
        value = result.s_eps
        diagnostics = {
            "epsilon": result.epsilon,
            "ot_mu_nu": result.ot_mu_nu,
            "ot_mu_mu": result.ot_mu_mu,
            "ot_nu_nu": result.ot_nu_nu,
            "term_converged": result.term_converged,
        }
        if not result.converged and not allow_partial:
            status = 2

    _emit_json(config, {"value": value, "kind": kind, "diagnostics": diagnostics})
    return status


def cmd_sweep(config: dict, allow_partial: bool) -> int:
    _validate_keys("sweep", config)
    box = _box_from(config)
    mu = load_measure(_require(config, "mu"))
    nu = load_measure(_require(config, "nu"))
    cost = cost_from_spec(_require(config, "cost"), box)
    epsilons = config.get("epsilons")
    cfg = _sinkhorn_config(config, 1.0)
    records = epsilon_sweep(cost, mu, nu, epsilons=epsilons, cfg=cfg)
    write_sweep_csv(_require(config, "output"), records)
    if any(not r.converged for r in records) and not allow_partial:
        return 2
    return 0


def cmd_dither(config: dict, allow_partial: bool) -> int:
    _validate_keys("dither", config)
    box = _box_from(config)
    target = load_measure(_require(config, "target"))
    cost = cost_from_spec(_require(config, "cost"), box)
    cfg = DitherConfig(
        M=int(_require(config, "M")),
        epsilon=_epsilon_from(config),
        cost=cost,
        max_outer_iter=int(config.get("max_outer_iter", 500)),
        grad_tol=float(config.get("grad_tol", 1e-6)),
        initial_step=float(config.get("initial_step", 1.0)),
        backtrack=float(config.get("backtrack", 0.5)),
        sufficient_decrease=float(config.get("sufficient_decrease", 1e-4)),
        seed=int(config.get("seed", 0)),
        inner_tol=float(config.get("inner_tol", 1e-9)),
        inner_max_iter=int(config.get("inner_max_iter", 10_000)),
        smoothing=float(config.get("smoothing", 1e-2)),
    )
    state = run_dither(cfg, target)

    weights = np.full(cfg.M, 1.0 / cfg.M)
    save_potential(_require(config, "output_positions"), state.positions, weights)
    trace_lines = [json.dumps(entry, sort_keys=True) for entry in state.trace]
    atomic_write_text(_require(config, "output_trace"), "\n".join(trace_lines) + "\n")
    sys.stdout.write(
        json.dumps(
            {
                "converged": state.converged,
                "energy": state.energy,
                "iterations": state.trace[-1]["iter"],
                "line_search_failed": state.line_search_failed,
            },
            sort_keys=True,
        )
        + "\n"
    )
    # unmet gradient tolerance is reported in the JSON, not via the exit code
    return 0


def cmd_potentials(config: dict, allow_partial: bool) -> int:
    _validate_keys("potentials", config)
    box = _box_from(config)
    mu = load_measure(_require(config, "mu"))
    nu = load_measure(_require(config, "nu"))
    cost = cost_from_spec(_require(config, "cost"), box)
    epsilon = _epsilon_from(config)
    grid = box.grid(int(config.get("grid_points_per_axis", 64)))

    status = 0
    if math.isinf(epsilon):
        limits = ot_infinity(cost, mu, nu)
        phi, psi = limits.phi_inf, limits.psi_inf
        phi_grid = cost.matrix(grid, nu.points) @ nu.weights - 0.5 * limits.ot_inf
        psi_grid = cost.matrix(mu.points, grid).T @ mu.weights - 0.5 * limits.ot_inf
    else:
        cfg = _sinkhorn_config(config, epsilon)
        solution = solve(cost, mu, nu, cfg)
        if not solution.converged and not allow_partial:
            status = 2
        phi, psi = solution.potentials.phi, solution.potentials.psi
        phi_grid, psi_grid = extend_potentials(cost, mu, nu, solution.potentials, grid)

    save_potential(_require(config, "output_phi"), mu.points, phi)
    save_potential(_require(config, "output_psi"), nu.points, psi)
    save_potential(_require(config, "output_diff"), grid, phi_grid - psi_grid)

    from .kernels import kernel_for_cost

    kernel = kernel_for_cost(cost)
    witness = witness_from_limits(kernel, mu, nu, grid)
    save_potential(_require(config, "output_witness"), grid, witness)
    return status


_COMMANDS = {
    "compute": cmd_compute,
    "sweep": cmd_sweep,
    "dither": cmd_dither,
    "potentials": cmd_potentials,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinkdiv",
        description="Optimal transport, Sinkhorn divergences, discrepancies and dithering",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON run configuration")
        cmd.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config entry (dotted paths allowed, value parsed as JSON)",
        )
        cmd.add_argument("--allow-partial", action="store_true", dest="allow_partial")
        cmd.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args, args.command)
        return _COMMANDS[args.command](config, args.allow_partial)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SinkdivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())
