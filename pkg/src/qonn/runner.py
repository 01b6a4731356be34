"""Experiment orchestration: depth sweeps, persistence, curve export, table checks.

A sweep directory holds ``config.json``, ``runs.jsonl`` (one training record
per line, tagged with its cell) and ``curves.csv``. Sweeps resume from the
runs already present in ``runs.jsonl``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .fock import StateVector, encode_dualrail
from .network import LinOptQonn, NmziMesh, count_params, lo_depth
from .optimizer import (
    DEFAULT_BUDGET,
    TOL_GLOBAL,
    TOL_LOCAL,
    TrainRecord,
    default_workers,
    run_seed,
    train_once,
)
from .tasks import (
    build_hamiltonian,
    discrimination_problem,
    discrimination_set,
    exact_ground_energy,
    network_simulator,
    preparation_problem,
    sample_lattice_model,
    target_ghz,
    target_haar_random,
    vqe_problem,
)

log = logging.getLogger(__name__)

TASKS = ("prepare", "discriminate", "vqe")
ARCHITECTURES = ("nonlinear", "linear-optics")
INFIDELITY_THRESHOLD = 1e-7
VQE_THRESHOLD = 1e-3
CSV_HEADER = ["depth", "phi_b", "target", "best_cost", "params", "runs"]


class ConfigError(ValueError):
    pass


@dataclass
class OptimizerSettings:
    runs: int = 50
    budget: int = DEFAULT_BUDGET
    tol_global: float = TOL_GLOBAL
    tol_local: float = TOL_LOCAL
    seed: int = 0


@dataclass
class ExperimentConfig:
    task: str
    architecture: str = "nonlinear"
    qubits: int = 2
    depths: list[int] = field(default_factory=lambda: [1])
    phi_b: list[float] = field(default_factory=lambda: [0.0])
    alphas: list[float] = field(default_factory=list)
    state_seeds: list[int] = field(default_factory=list)
    hamiltonian_seeds: list[int] = field(default_factory=list)
    states: int = 4
    corrections: bool = True
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    output: str | None = None

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if not self.depths:
            raise ConfigError("depth range is empty")
        if any(d < 0 for d in self.depths):
            raise ConfigError("depths must be non-negative")
        if self.architecture == "nonlinear":
            if not self.phi_b:
                raise ConfigError("no phi_b values given")
            if any(not 0 <= p < 2 * np.pi for p in self.phi_b):
                raise ConfigError("phi_b values must lie in [0, 2 pi)")
        elif not self.corrections:
            raise ConfigError("the linear-optics architecture has no separate corrections to disable")
        if self.task == "prepare" and not (self.alphas or self.state_seeds):
            raise ConfigError("state preparation needs alphas or state_seeds")
        if self.task == "discriminate":
            if self.qubits != 2:
                raise ConfigError("discrimination works on two qubits")
            if self.states not in (4, 6):
                raise ConfigError("discrimination sets have 4 or 6 states")
        if self.task == "vqe" and not self.hamiltonian_seeds:
            raise ConfigError("vqe needs hamiltonian_seeds")
        if self.optimizer.runs < 1:
            raise ConfigError("runs must be at least 1")

    @property
    def modes(self) -> int:
        return 2 * self.qubits

    def targets(self) -> list[str]:
        if self.task == "prepare":
            return [f"ghz:{a!r}" for a in self.alphas] + [f"haar:{s}" for s in self.state_seeds]
        if self.task == "discriminate":
            return [f"bell{self.states}"]
        return [f"heis:{s}" for s in self.hamiltonian_seeds]

    def biases(self) -> list[float | None]:
        return list(self.phi_b) if self.architecture == "nonlinear" else [None]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        opt = OptimizerSettings(**d.pop("optimizer", {}))
        cfg = cls(optimizer=opt, **d)
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        # the run count only extends a sweep, so it stays out of the identity
        payload = self.to_dict()
        payload.pop("output", None)
        payload["optimizer"].pop("runs", None)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class CellResult:
    depth: int
    phi_b: float | None
    target: str
    best_cost: float
    params: int
    d_lo: int
    runs: int
    seed: int
    costs: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    best_x: list[float] = field(default_factory=list)
    reference: float | None = None
    error: str | None = None

    @property
    def key(self) -> tuple:
        return (self.depth, self.phi_b, self.target)


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list[CellResult]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "cells": [asdict(c) for c in self.cells]}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls(ExperimentConfig.from_dict(d["config"]), [CellResult(**c) for c in d["cells"]])

    @property
    def errored(self) -> list[CellResult]:
        return [c for c in self.cells if c.error]

    def cell(self, depth: int, phi_b: float | None, target: str) -> CellResult:
        for c in self.cells:
            if c.key == (depth, phi_b, target):
                return c
        raise KeyError((depth, phi_b, target))


# ----------------------------------------------------------------- cells


def build_network(config: ExperimentConfig, depth: int, phi_b: float | None):
    if config.architecture == "linear-optics":
        return LinOptQonn(config.modes, depth)
    return NmziMesh(config.modes, depth, phi_b, corrections=config.corrections)


def build_problem(config: ExperimentConfig, depth: int, phi_b: float | None, target: str):
    """Returns the bounded problem and, for VQE, the exact ground energy."""
    net = build_network(config, depth, phi_b)
    budget = config.optimizer.budget
    kind, _, arg = target.partition(":")
    reference = None
    if config.task == "prepare":
        state = target_ghz(config.qubits, float(arg)) if kind == "ghz" else target_haar_random(config.qubits, int(arg))
        problem = preparation_problem(net, state, budget=budget)
    elif config.task == "discriminate":
        problem = discrimination_problem(net, discrimination_set(config.states), budget=budget)
    else:
        model = sample_lattice_model(int(arg))
        if model.spins != config.qubits:
            raise ConfigError(f"lattice fragment has {model.spins} spins, config says {config.qubits} qubits")
        problem = vqe_problem(net, model, budget=budget)
        reference = exact_ground_energy(build_hamiltonian(model))
    return net, problem, reference


def cell_params(config: ExperimentConfig, depth: int) -> int:
    kind = "linear" if config.architecture == "linear-optics" else "nonlinear"
    return count_params(config.modes, depth, kind)


def cell_seed(master: int, key: tuple) -> int:
    return run_seed(master, zlib.crc32(repr(key).encode()))


def _cell_key_dict(key: tuple) -> dict:
    depth, phi_b, target = key
    return {"depth": depth, "phi_b": phi_b, "target": target}


def _record_line(config: ExperimentConfig, key: tuple, record: TrainRecord) -> str:
    line = {
        "cell": _cell_key_dict(key),
        "config_hash": config.hash(),
        "version": __version__,
        "record": record.to_dict(),
    }
    return json.dumps(line, sort_keys=True)


def load_runs(path: Path) -> dict[tuple, dict[int, TrainRecord]]:
    runs: dict[tuple, dict[int, TrainRecord]] = {}
    if not path.exists():
        return runs
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        c = obj["cell"]
        key = (c["depth"], c["phi_b"], c["target"])
        rec = TrainRecord.from_dict(obj["record"])
        runs.setdefault(key, {})[rec.run] = rec
    return runs


def _train_cell(problem, seed: int, runs: Iterable[int], tol_global: float, tol_local: float):
    return [train_once(problem, run_seed(seed, r), r, tol_global, tol_local) for r in runs]


def run_sweep(config: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Train every (depth, phi_b, target) cell with multi-start optimization.

    Per-cell failures are recorded in the cell and do not stop the sweep.
    With ``config.output`` set, results are persisted and an interrupted
    sweep picks up the runs already on disk.
    """
    config.validate()
    workers = default_workers() if workers is None else workers
    opt = config.optimizer
    out = Path(config.output) if config.output else None
    done: dict = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cfg_path = out / "config.json"
        if cfg_path.exists():
            old = ExperimentConfig.from_dict(json.loads(cfg_path.read_text()))
            if old.hash() != config.hash():
                raise ConfigError(f"{out} holds a different sweep (config hash {old.hash()})")
        # the directory itself is not part of the record, so copies compare equal
        stored = config.to_dict()
        stored.pop("output", None)
        cfg_path.write_text(json.dumps(stored, indent=2, sort_keys=True) + "\n")
        done = load_runs(out / "runs.jsonl")

    keys = [(d, p, t) for d in config.depths for p in config.biases() for t in config.targets()]
    jobs = []
    for key in keys:
        have = done.get(key, {})
        missing = [r for r in range(opt.runs) if r not in have]
        jobs.append((key, missing))

    def work(key, missing):
        try:
            _, problem, reference = build_problem(config, *key)
            return _train_cell(problem, cell_seed(opt.seed, key), missing, opt.tol_global, opt.tol_local), reference, None
        except Exception as err:  # recorded per cell
            log.exception("cell %s failed", key)
            return [], None, f"{type(err).__name__}: {err}"

    if workers > 1:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=workers)(delayed(work)(k, m) for k, m in jobs)
    else:
        outcomes = []
        for k, m in jobs:
            outcomes.append(work(k, m))
            if out is not None:
                _append_runs(out, config, k, outcomes[-1][0])
    if workers > 1 and out is not None:
        for (k, _), (recs, _, _) in zip(jobs, outcomes):
            _append_runs(out, config, k, recs)

    cells = []
    for (key, _), (new, reference, error) in zip(jobs, outcomes):
        records = dict(done.get(key, {}))
        records.update({r.run: r for r in new})
        ordered = [records[r] for r in sorted(records)]
        cells.append(_summarize(config, key, ordered, reference, error))
    result = SweepResult(config, cells)
    if out is not None:
        _rewrite_runs(out, config, keys, done, jobs, outcomes)
        emit_curves(result, out, "csv")
    return result


def _rewrite_runs(out: Path, config, keys, done, jobs, outcomes) -> None:
    # canonical order (cell, run) so resumed and fresh sweeps give identical files
    lines = []
    for key, (_, (new, _, _)) in zip(keys, zip(jobs, outcomes)):
        records = dict(done.get(key, {}))
        records.update({r.run: r for r in new})
        lines.extend(_record_line(config, key, records[r]) for r in sorted(records))
    tmp = out / "runs.jsonl.tmp"
    tmp.write_text("".join(line + "\n" for line in lines))
    tmp.replace(out / "runs.jsonl")


def _append_runs(out: Path, config: ExperimentConfig, key: tuple, records: list[TrainRecord]) -> None:
    if not records:
        return
    with open(out / "runs.jsonl", "a") as fh:
        for rec in records:
            fh.write(_record_line(config, key, rec) + "\n")


def _summarize(config, key, records, reference, error) -> CellResult:
    depth, phi_b, target = key
    if reference is None and config.task == "vqe" and not error:
        _, _, reference = build_problem(config, *key)
    costs = [r.best_cost for r in records]
    if config.task == "vqe" and reference is not None:
        costs = [c - reference for c in costs]
    best = min(records, key=lambda r: (r.best_cost, r.seed)) if records else None
    kind = "linear" if config.architecture == "linear-optics" else "nonlinear"
    return CellResult(
        depth=depth,
        phi_b=phi_b,
        target=target,
        best_cost=float(min(costs)) if costs else float("nan"),
        params=count_params(config.modes, depth, kind),
        d_lo=lo_depth(config.modes, depth) if kind == "linear" else 0,
        runs=len(records),
        seed=cell_seed(config.optimizer.seed, key),
        costs=[float(c) for c in costs],
        evaluations=[r.evaluations for r in records],
        best_x=list(best.best_x) if best else [],
        reference=reference,
        error=error,
    )


# ---------------------------------------------------------------- export


def curves_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    cells = sorted(result.cells, key=lambda c: (-1.0 if c.phi_b is None else c.phi_b, c.target, c.depth))
    for c in cells:
        w.writerow([c.depth, "" if c.phi_b is None else repr(c.phi_b), c.target, repr(c.best_cost), c.params, c.runs])
    return buf.getvalue()


def emit_curves(result: SweepResult, out_dir: str | Path, fmt: str = "csv") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / "curves.csv"
        path.write_text(curves_csv(result))
    elif fmt == "json":
        path = out_dir / "curves.json"
        path.write_text(json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def parameter_dump(config: ExperimentConfig, cell: CellResult) -> dict:
    """Trained nonlinearities grouped by layer plus the correction phases."""
    net = build_network(config, cell.depth, cell.phi_b)
    x = np.asarray(cell.best_x, dtype=float)
    if isinstance(net, LinOptQonn):
        step = net.per_interferometer
        return {"interferometers": [x[i * step : (i + 1) * step].tolist() for i in range(net.depth + 1)]}
    chi, theta = net.split(x)
    layers, pos = [], 0
    for pairs in net.layers:
        layers.append(chi[pos : pos + 2 * len(pairs)].tolist())
        pos += 2 * len(pairs)
    half = len(theta) // 2
    return {
        "depth": net.depth,
        "phi_b": net.phi_b,
        "layers": layers,
        "corrections_in": theta[:half].tolist(),
        "corrections_out": theta[half:].tolist(),
    }


def output_state(config: ExperimentConfig, cell: CellResult, bits: str | None = None) -> StateVector:
    """Network output for the cell's best parameters on a dual-rail input."""
    net = build_network(config, cell.depth, cell.phi_b)
    x = np.asarray(cell.best_x, dtype=float)
    sim = network_simulator(net, config.qubits)
    state = encode_dualrail(bits or "0" * config.qubits, sim.basis)
    return StateVector(sim.basis, sim(state.amps, x))


# ---------------------------------------------------------- table checks

_PI = np.pi

# (row label, architecture, phi_b, corrections, per-column (D_NL, D_LO, P))
REFERENCE_TABLES = {
    "I": {
        "task": "prepare",
        "columns": [{"qubits": 3, "target": "ghz"}, {"qubits": 4, "target": "ghz"}],
        "rows": [
            ("NL (phi_b=0)", "nonlinear", 0.0, True, [(1, 0, 4), None]),
            ("NL (phi_b=pi)", "nonlinear", _PI, True, [(5, 0, 24), (9, 0, 62)]),
            ("LO", "linear-optics", None, True, [(1, 14, 60), (2, 27, 168)]),
        ],
    },
    "II": {
        "task": "prepare",
        "columns": [{"qubits": 3, "target": "haar"}],
        "rows": [
            ("NL (phi_b=pi)", "nonlinear", _PI, True, [(11, 0, 54)]),
            ("LO", "linear-optics", None, True, [(4, 35, 150)]),
        ],
    },
    "III": {
        "task": "discriminate",
        "columns": [{"qubits": 2, "states": 4}, {"qubits": 2, "states": 6}],
        "rows": [
            ("NL (phi_b=0)", "nonlinear", 0.0, True, [(1, 0, 2), (5, 0, 14)]),
            ("NL (phi_b=pi)", "nonlinear", _PI, True, [(3, 0, 8), (11, 0, 32)]),
            ("NL (phi_b=pi, no MZIs)", "nonlinear", _PI, False, [(19, 0, 56), (23, 0, 68)]),
            ("LO", "linear-optics", None, True, [(1, 10, 24), (3, 20, 48)]),
        ],
    },
    "IV": {
        "task": "vqe",
        "columns": [{"qubits": 5}],
        "rows": [
            ("NL (phi_b=pi/2)", "nonlinear", _PI / 2, True, [(7, 0, 62)]),
            ("LO", "linear-optics", None, True, [(1, 22, 180)]),
        ],
    },
}


@dataclass
class TableCheck:
    row: str
    column: dict
    expected_depth: int
    expected_params: int
    expected_d_lo: int
    params: int
    d_lo: int
    measured_depth: int | None = None
    curve: list[tuple[int, float]] = field(default_factory=list)

    @property
    def arithmetic_ok(self) -> bool:
        return self.params == self.expected_params and self.d_lo == self.expected_d_lo

    @property
    def depth_ok(self) -> bool | None:
        if not self.curve:
            return None
        return self.measured_depth == self.expected_depth


def _matches(cfg: ExperimentConfig, task: str, column: dict, arch: str, phi_b, corrections: bool) -> bool:
    if cfg.task != task or cfg.architecture != arch or cfg.qubits != column["qubits"]:
        return False
    if cfg.corrections != corrections and arch == "nonlinear":
        return False
    if "states" in column and cfg.states != column["states"]:
        return False
    if phi_b is not None and not any(np.isclose(p, phi_b) for p in cfg.phi_b):
        return False
    return True


def _curve(result: SweepResult, phi_b, column: dict, threshold: float) -> list[tuple[int, float]]:
    """Worst best-cost over the relevant targets, per depth."""
    want = column.get("target")
    by_depth: dict[int, list[float]] = {}
    for c in result.cells:
        if phi_b is not None and (c.phi_b is None or not np.isclose(c.phi_b, phi_b)):
            continue
        if want == "ghz" and not (c.target.startswith("ghz:") and np.isclose(float(c.target[4:]), _PI / 4)):
            continue
        if want == "haar" and not c.target.startswith("haar:"):
            continue
        if c.error:
            continue
        by_depth.setdefault(c.depth, []).append(c.best_cost)
    return sorted((d, max(v)) for d, v in by_depth.items())


def verify_tables(results: SweepResult | Iterable[SweepResult] | None, table: str) -> list[TableCheck]:
    """Compare parameter counts, D_LO and (when sweeps are supplied) minimal depths.

    Minimal depth is the first depth whose worst-case best cost across the
    row's targets is at or below the success threshold.
    """
    if table not in REFERENCE_TABLES:
        raise ValueError(f"unknown table {table!r}")
    spec = REFERENCE_TABLES[table]
    if results is None:
        results = []
    elif isinstance(results, SweepResult):
        results = [results]
    results = list(results)
    threshold = VQE_THRESHOLD if spec["task"] == "vqe" else INFIDELITY_THRESHOLD
    checks = []
    for label, arch, phi_b, corrections, entries in spec["rows"]:
        for column, entry in zip(spec["columns"], entries):
            if entry is None:
                continue
            depth, d_lo, params = entry
            modes = 2 * column["qubits"]
            kind = "linear" if arch == "linear-optics" else "nonlinear"
            check = TableCheck(
                row=label,
                column=column,
                expected_depth=depth,
                expected_params=params,
                expected_d_lo=d_lo,
                params=count_params(modes, depth, kind),
                d_lo=lo_depth(modes, depth) if kind == "linear" else 0,
            )
            for res in results:
                if _matches(res.config, spec["task"], column, arch, phi_b, corrections):
                    check.curve.extend(_curve(res, phi_b, column, threshold))
            if check.curve:
                check.curve.sort()
                check.measured_depth = next((d for d, c in check.curve if c <= threshold), None)
            checks.append(check)
    return checks


def format_report(table: str, checks: list[TableCheck]) -> str:
    lines = [f"Table {table}"]
    for c in checks:
        col = ",".join(f"{k}={v}" for k, v in c.column.items())
        arith = "ok" if c.arithmetic_ok else f"MISMATCH (P={c.params}, D_LO={c.d_lo})"
        depth = {None: "not measured", True: "ok", False: f"MISMATCH (measured {c.measured_depth})"}[c.depth_ok]
        lines.append(
            f"  {c.row:<24} [{col}] D_NL={c.expected_depth} D_LO={c.expected_d_lo} "
            f"P={c.expected_params}: arithmetic {arith}; minimal depth {depth}"
        )
        if c.curve:
            lines.append("    curve: " + ", ".join(f"{d}:{v:.2e}" for d, v in c.curve))
    return "\n".join(lines)


def load_sweep(directory: str | Path) -> SweepResult:
    """Rebuild a SweepResult from a persisted sweep directory."""
    directory = Path(directory)
    config = ExperimentConfig.from_dict(json.loads((directory / "config.json").read_text()))
    done = load_runs(directory / "runs.jsonl")
    cells = []
    for key in [(d, p, t) for d in config.depths for p in config.biases() for t in config.targets()]:
        records = [done[key][r] for r in sorted(done.get(key, {}))]
        if records:
            cells.append(_summarize(config, key, records, None, None))
    return SweepResult(config, cells)
