"""
Command-line front end over scenario files.

    rigidform analyze    SCENARIO... [--out DIR]
    rigidform steer      SCENARIO... [--rate R] [--epsilon E] [--refine] [--out DIR]
    rigidform drift      SCENARIO... [--seed N] [--out DIR]
    rigidform compensate SCENARIO... [--seed N] [--out DIR]
    rigidform export     SCENARIO... [--out DIR]

Exit status: 0 success, 1 usage or scenario error, 2 numerical failure,
3 steering ran but failed epsilon verification. With several scenario files
the largest status wins.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from .errors import RigidFormError
from .formation import classify_orbit, is_infinitesimally_rigid, potential, vector_field
from .orbit import fit_rigid_motion
from .robustness import demonstrate_drift, solve_offset
from .scenario import Scenario, ScenarioError, export_scenario, load_scenario, with_overrides
from .sim import Trajectory, settle_run
from .steering import execute_steering, plan_steering, verify_epsilon_controllability

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_UNVERIFIED = 0, 1, 2, 3
DEFAULT_EPSILON = 0.3


# ---------------------------------------------------------------- serialization

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj: Any, indent: int = 0) -> str:
    """JSON with every float at 17 significant digits; NaN and inf become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def trajectory_csv(traj: Trajectory) -> str:
    n, k = traj.shape
    header = ["t"] + [f"x{i + 1}_{d + 1}" for i in range(n) for d in range(k)]
    header += ["orbit_distance", "potential", "drift_fit_residual"]
    out = io.StringIO()
    out.write(",".join(header) + "\n")

    def cell(v):
        return fmt_float(v) if math.isfinite(v) else ""

    for s in range(len(traj)):
        row = [traj.times[s], *traj.states[s].reshape(-1), traj.orbit_distance[s], traj.potential[s], traj.fit_residual[s]]
        out.write(",".join(cell(v) for v in row) + "\n")
    return out.getvalue()


def _generator_dict(gen) -> dict:
    return {"omega": gen.omega, "v": gen.vel, "coordinates": gen.to_vector(), "norm": gen.norm()}


def _offsets_list(h) -> list:
    return [[i + 1, j + 1, c] for (i, j), c in sorted(h.values.items())]


def _stability_dict(rep) -> dict:
    eig = rep.eigenvalues
    return {
        "classification": str(rep.classification),
        "zero_count": rep.zero_count,
        "zero_tol": rep.zero_tol,
        "eigenvalues_real": eig.real,
        "eigenvalues_imag": eig.imag,
    }


# ---------------------------------------------------------------- commands

def _settled_target(sc: Scenario) -> np.ndarray:
    """Initial configuration relaxed onto a critical orbit of the nominal field."""
    g, law = sc.graph(), sc.law()
    it = sc.integrator
    return settle_run(lambda x: vector_field(g, law, x), sc.configuration(), it.settle_tol, it.horizon).state


def cmd_analyze(sc: Scenario) -> tuple[int, str, dict[str, str]]:
    g, law = sc.graph(), sc.law()
    q = _settled_target(sc)
    rigid = is_infinitesimally_rigid(g, q)
    rep = classify_orbit(g, law, q)
    line = f"rigid: {str(rigid).lower()}, zero eigenvalues: {rep.zero_count}, classification: {rep.classification}"
    report = {
        "name": sc.name,
        "rigid": rigid,
        "settled_configuration": q,
        "edge_length_error": float(np.max(np.abs(g.edge_lengths(q) - g.dbar))),
        **_stability_dict(rep),
    }
    return EXIT_OK, line, {f"{sc.name}_analyze.json": to_json(report) + "\n"}


def cmd_steer(sc: Scenario) -> tuple[int, str, dict[str, str]]:
    if sc.target is None:
        raise ScenarioError(f"{sc.name}: steering needs a 'target' section")
    if sc.rate is None:
        raise ScenarioError(f"{sc.name}: steering needs 'steering.rate' (or --rate)")
    eps = DEFAULT_EPSILON if sc.epsilon is None else sc.epsilon
    g, law, it = sc.graph(), sc.law(), sc.integrator
    q = _settled_target(sc)
    plan = plan_steering(g, law, q, sc.clique_spec(), sc.target.element(), sc.rate, refine=sc.refine)
    outcome = execute_steering(
        g, law, q, plan, step=it.step, stride=it.stride, settle_tol=it.settle_tol, settle_horizon=it.horizon
    )
    ok, rep = verify_epsilon_controllability(outcome, eps)
    settle_traj = settle_run(
        lambda x: vector_field(g, law, x),
        outcome.trajectory.final,
        it.settle_tol,
        it.horizon,
        stride=it.stride,
        record=True,
        reference=q,
        potential=lambda x: potential(g, law, x),
    ).trajectory
    result = {
        "name": sc.name,
        "verified": ok,
        "epsilon": eps,
        "rate": plan.rate,
        "duration": plan.duration,
        "target_generator": _generator_dict(plan.target_generator),
        "offsets": _offsets_list(plan.offsets),
        "coefficients": plan.coefficients,
        "max_orbit_distance": outcome.max_orbit_distance,
        "endpoint_error": outcome.endpoint_error,
        "settled_error": outcome.settled_error,
        "settle_max_orbit_distance": outcome.settle_max_orbit_distance,
        "settle_time": outcome.settle_time,
        "margins": {
            "orbit": rep.orbit_margin,
            "endpoint": rep.endpoint_margin,
            "settled": rep.settled_margin,
            "settle_orbit": rep.settle_orbit_margin,
        },
        "step": outcome.trajectory.step,
        "target_state": outcome.target_state,
        "settled_state": outcome.settled_state,
    }
    line = (
        f"{'verified' if ok else 'NOT verified'} at epsilon={eps:g}: max orbit distance {outcome.max_orbit_distance:.4g}, "
        f"endpoint error {outcome.endpoint_error:.4g}, settled error {outcome.settled_error:.4g}"
    )
    files = {
        f"{sc.name}_steer_trajectory.csv": trajectory_csv(outcome.trajectory),
        f"{sc.name}_steer_settle.csv": trajectory_csv(settle_traj),
        f"{sc.name}_steer_outcome.json": to_json(result) + "\n",
    }
    return (EXIT_OK if ok else EXIT_UNVERIFIED), line, files


def _need_perturbation(sc: Scenario):
    if sc.perturbation is None:
        raise ScenarioError(f"{sc.name}: this command needs a 'perturbation' section")
    return sc.offsets()


def cmd_drift(sc: Scenario) -> tuple[int, str, dict[str, str]]:
    h = _need_perturbation(sc)
    g, law, it = sc.graph(), sc.law(), sc.integrator
    q = _settled_target(sc)
    fit, traj = demonstrate_drift(g, law, q, h, tol=it.settle_tol, horizon=it.horizon, stride=it.stride)
    result = {
        "name": sc.name,
        "perturbation": _offsets_list(h),
        "generator": _generator_dict(fit.generator),
        "fit_residual": fit.residual,
        "settle_time": float(traj.times[-1]),
    }
    line = f"drift generator norm {fit.generator.norm():.6g} (fit residual {fit.residual:.3g})"
    files = {
        f"{sc.name}_drift.json": to_json(result) + "\n",
        f"{sc.name}_drift_trajectory.csv": trajectory_csv(traj),
    }
    return EXIT_OK, line, files


def cmd_compensate(sc: Scenario) -> tuple[int, str, dict[str, str]]:
    h = _need_perturbation(sc)
    g, law, it = sc.graph(), sc.law(), sc.integrator
    q = _settled_target(sc)
    comp = solve_offset(g, law, q, sc.clique_spec(), h)
    before, _ = demonstrate_drift(g, law, q, h, tol=it.settle_tol, horizon=it.horizon, stride=it.stride)
    total = h + comp.offset
    p = comp.equilibrium
    after = fit_rigid_motion(p, vector_field(g, law, p, perturbation=total))
    result = {
        "name": sc.name,
        "perturbation": _offsets_list(h),
        "offset": _offsets_list(comp.offset),
        "coefficients": comp.coefficients,
        "residual": comp.residual,
        "iterations": comp.iterations,
        "equilibrium": p,
        "stability": _stability_dict(comp.stability),
        "drift_before": _generator_dict(before.generator),
        "drift_after": _generator_dict(after.generator),
    }
    line = (
        f"residual {comp.residual:.3g}, {comp.stability.classification}; drift norm "
        f"{before.generator.norm():.3g} before, {after.generator.norm():.3g} after"
    )
    return EXIT_OK, line, {f"{sc.name}_compensate.json": to_json(result) + "\n"}


def cmd_export(sc: Scenario) -> tuple[int, str, dict[str, str]]:
    text = export_scenario(sc)
    return EXIT_OK, text.rstrip("\n"), {f"{sc.name}.yaml": text}


COMMANDS = {
    "analyze": cmd_analyze,
    "steer": cmd_steer,
    "drift": cmd_drift,
    "compensate": cmd_compensate,
    "export": cmd_export,
}


# ---------------------------------------------------------------- driver

def run_one(command: str, path: str, overrides: dict, out: str | None) -> tuple[int, str]:
    """Run one command on one scenario file; returns (exit code, message)."""
    try:
        sc = with_overrides(load_scenario(path), **overrides)
        code, line, files = COMMANDS[command](sc)
    except ScenarioError as exc:
        return EXIT_USAGE, f"error: {exc}"
    except RigidFormError as exc:
        return EXIT_NUMERIC, f"error: {path}: {type(exc).__name__}: {exc}"
    if out is not None:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (outdir / name).write_text(text)
    return code, line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


HELP = {
    "analyze": "rigidity, zero-eigenvalue count and stability class",
    "steer": "plan and execute a rigid motion toward the target",
    "drift": "drift speed and generator under mismatched offsets",
    "compensate": "solve for offsets that cancel the drift",
    "export": "write the normalised scenario back as YAML",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rigidform", description="Rigid formation analysis, steering and drift compensation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name].capitalize() + ".")
        p.add_argument("scenarios", nargs="+", help="scenario YAML files")
        p.add_argument("--out", help="directory for output files")
        p.add_argument("--jobs", type=int, default=1, help="parallel scenario files (default 1)")
        if name == "steer":
            p.add_argument("--rate", type=float, help="steering rate r, motion lasts 1/r (overrides file)")
            p.add_argument("--epsilon", type=float, help="orbit and endpoint tolerance (overrides file)")
            p.add_argument("--refine", action="store_true", help="refine offsets against the numeric orbit map")
        if name in ("drift", "compensate"):
            p.add_argument("--seed", type=int, help="seed for random offset mismatch (overrides file)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key, None) for key in ("rate", "epsilon", "refine", "seed")}
    if args.jobs < 1:
        print("rigidform: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    for key in ("rate", "epsilon"):
        if overrides[key] is not None and not overrides[key] > 0:
            print(f"rigidform: error: --{key} must be positive", file=sys.stderr)
            return EXIT_USAGE
    jobs = [(args.command, path, overrides, args.out) for path in args.scenarios]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, *zip(*jobs)))
    else:
        results = [run_one(*job) for job in jobs]
    status = EXIT_OK
    for path, (code, message) in zip(args.scenarios, results):
        prefix = f"{path}: " if len(jobs) > 1 and code not in (EXIT_USAGE, EXIT_NUMERIC) else ""
        print(prefix + message, file=sys.stderr if code in (EXIT_USAGE, EXIT_NUMERIC) else sys.stdout)
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
