"""Run the sweeps behind the reference tables and check minimal depths.

Each table gets its own output directory under --out; reruns resume from the
persisted runs. ``--runs`` trades fidelity of the best-of statistic for time.

    python scripts/reproduce_tables.py --tables I,III --runs 10 --out sweeps/
"""

import argparse
import re
from pathlib import Path

import numpy as np

from qonn.runner import (
    REFERENCE_TABLES,
    ExperimentConfig,
    OptimizerSettings,
    format_report,
    run_sweep,
    verify_tables,
)


def configs_for(table, runs, seed, max_depth_margin):
    spec = REFERENCE_TABLES[table]
    for label, arch, phi_b, corrections, entries in spec["rows"]:
        for column, entry in zip(spec["columns"], entries):
            if entry is None:
                continue
            depth = entry[0]
            cfg = ExperimentConfig(
                task=spec["task"],
                architecture=arch,
                qubits=column["qubits"],
                depths=list(range(0 if arch == "linear-optics" else 1, depth + max_depth_margin + 1)),
                phi_b=[phi_b] if phi_b is not None else [0.0],
                corrections=corrections,
                optimizer=OptimizerSettings(runs=runs, seed=seed),
            )
            if spec["task"] == "prepare":
                if column["target"] == "ghz":
                    cfg.alphas = [np.pi / 4]
                else:
                    cfg.state_seeds = list(range(10))
            elif spec["task"] == "discriminate":
                cfg.states = column["states"]
            else:
                cfg.hamiltonian_seeds = list(range(5))
            tag = "-".join(f"{k}{v}" for k, v in column.items())
            slug = re.sub(r"[^A-Za-z0-9]+", "_", f"{label}-{tag}").strip("_")
            yield slug, cfg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tables", default=",".join(sorted(REFERENCE_TABLES)))
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--margin", type=int, default=1, help="extra depths beyond the reference minimum")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("sweeps"))
    args = ap.parse_args()

    for table in args.tables.split(","):
        results = []
        for slug, cfg in configs_for(table, args.runs, args.seed, args.margin):
            cfg.output = str(args.out / table / slug)
            print(f"table {table}: {slug} depths {cfg.depths[0]}-{cfg.depths[-1]}", flush=True)
            results.append(run_sweep(cfg, workers=args.workers))
        print(format_report(table, verify_tables(results, table)), flush=True)


if __name__ == "__main__":
    main()
