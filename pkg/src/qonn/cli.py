"""Command-line entry point: ``qonn <subcommand> [options]``.

Every training subcommand accepts ``--config file.json`` and flag overrides;
the exit code is 0 only when no sweep cell errored.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .fock import build_basis, encode_dualrail
from .network import LinOptQonn, NmziMesh, record_layer_amplitudes, record_lo_layer_amplitudes
from .runner import (
    REFERENCE_TABLES,
    ConfigError,
    ExperimentConfig,
    emit_curves,
    format_report,
    load_sweep,
    parameter_dump,
    run_sweep,
    verify_tables,
)


def _angle(text: str) -> float:
    """Accepts plain floats and multiples of pi such as 'pi/4' or '3pi/4'."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("*", "").replace("pi", "")
    value = (float(coef) if coef not in ("", "+") else 1.0) * np.pi
    return value / float(den) if den else value


def _depths(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        if not part:
            continue
        if "-" in part or ".." in part:
            a, b = part.replace("..", "-").split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _ints(text: str) -> list[int]:
    return _depths(text)


def _floats(text: str) -> list[float]:
    return [_angle(p) for p in text.split(",") if p]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its fields")
    p.add_argument("--architecture", choices=["nonlinear", "linear-optics"])
    p.add_argument("--qubits", type=int)
    p.add_argument("--depths", type=_depths, help="e.g. 1-12 or 1,3,5")
    p.add_argument("--phi-b", type=_floats, help="comma list, e.g. 0,pi/4,pi")
    p.add_argument("--no-corrections", action="store_true")
    p.add_argument("--runs", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol-global", type=float)
    p.add_argument("--tol-local", type=float)
    p.add_argument("--workers", type=int, help="defaults to $QONN_WORKERS or 1")
    p.add_argument("--output", type=Path)
    p.add_argument("--json", action="store_true", help="also write curves.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qonn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="state preparation sweep")
    _add_common(p)
    p.add_argument("--alphas", type=_floats, help="GHZ-family angles")
    p.add_argument("--state-seeds", type=_ints, help="Haar-random target seeds")

    p = sub.add_parser("discriminate", help="Bell-state discrimination sweep")
    _add_common(p)
    p.add_argument("--states", type=int, choices=[4, 6])

    p = sub.add_parser("vqe", help="Heisenberg-model VQE sweep")
    _add_common(p)
    p.add_argument("--hamiltonian-seeds", type=_ints)

    p = sub.add_parser("sweep", help="run a sweep described entirely by a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("verify", help="check table arithmetic and, given sweeps, minimal depths")
    p.add_argument("--table", choices=sorted(REFERENCE_TABLES), action="append")
    p.add_argument("sweeps", nargs="*", type=Path, help="sweep output directories")

    p = sub.add_parser("dump-amplitudes", help="per-layer |c_t| of the best trained network of a sweep cell")
    p.add_argument("sweep", type=Path)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--phi-b", type=_angle)
    p.add_argument("--target")
    p.add_argument("--input", help="dual-rail input bits, default all zeros")
    p.add_argument("--params", action="store_true", help="dump trained parameters grouped by layer instead")
    return parser


_FIELDS = {
    "architecture": "architecture",
    "qubits": "qubits",
    "depths": "depths",
    "phi_b": "phi_b",
    "alphas": "alphas",
    "state_seeds": "state_seeds",
    "states": "states",
    "hamiltonian_seeds": "hamiltonian_seeds",
}
_OPT_FIELDS = {"runs": "runs", "budget": "budget", "seed": "seed", "tol_global": "tol_global", "tol_local": "tol_local"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
    base["task"] = base.get("task", args.command) if args.command == "sweep" else args.command
    if args.command == "vqe":
        base.setdefault("qubits", 5)
    opt = dict(base.pop("optimizer", {}))
    for flag, key in _FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[key] = value
    for flag, key in _OPT_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            opt[key] = value
    if getattr(args, "no_corrections", False):
        base["corrections"] = False
    if getattr(args, "output", None) is not None:
        base["output"] = str(args.output)
    base["optimizer"] = opt
    return ExperimentConfig.from_dict(base)


def _run(args) -> int:
    config = config_from_args(args)
    config.validate()
    result = run_sweep(config, workers=args.workers)
    if config.output and args.json:
        emit_curves(result, config.output, "json")
    for c in result.cells:
        phi = "-" if c.phi_b is None else f"{c.phi_b:.4f}"
        status = f"ERROR {c.error}" if c.error else f"best={c.best_cost:.3e}"
        print(f"depth={c.depth:<3} phi_b={phi:<7} target={c.target:<12} P={c.params:<4} runs={c.runs:<3} {status}")
    return 1 if result.errored else 0


def _verify(args) -> int:
    tables = args.table or sorted(REFERENCE_TABLES)
    sweeps = [load_sweep(d) for d in args.sweeps]
    ok = True
    for t in tables:
        checks = verify_tables(sweeps, t)
        print(format_report(t, checks))
        ok &= all(c.arithmetic_ok and c.depth_ok is not False for c in checks)
    return 0 if ok else 1


def _dump(args) -> int:
    result = load_sweep(args.sweep)
    config = result.config
    cells = [
        c
        for c in result.cells
        if c.depth == args.depth
        and (args.phi_b is None or (c.phi_b is not None and np.isclose(c.phi_b, args.phi_b)))
        and (args.target is None or c.target == args.target)
    ]
    if not cells:
        print("no matching cell", file=sys.stderr)
        return 1
    cell = cells[0]
    if args.params:
        print(json.dumps(parameter_dump(config, cell), indent=1))
        return 0
    basis = build_basis(config.modes, config.qubits)
    state = encode_dualrail(args.input or "0" * config.qubits, basis)
    x = np.asarray(cell.best_x)
    if config.architecture == "linear-optics":
        shots = record_lo_layer_amplitudes(state, LinOptQonn(config.modes, cell.depth), x)
    else:
        mesh = NmziMesh(config.modes, cell.depth, cell.phi_b, corrections=config.corrections)
        chi, theta = mesh.split(x)
        shots = record_layer_amplitudes(state, mesh, chi, theta)
    labels = ["".join(map(str, occ)) for occ in basis.states]
    print(json.dumps({"states": labels, "layers": [s.round(12).tolist() for s in shots]}))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("prepare", "discriminate", "vqe", "sweep"):
            return _run(args)
        if args.command == "verify":
            return _verify(args)
        return _dump(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
