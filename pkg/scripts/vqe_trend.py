"""Energy error of the trained network against exact diagonalization, per model and depth.

    python scripts/vqe_trend.py --models 0-4 --depths 1,7 --runs 50
"""

import argparse
import json
import time

import numpy as np

from qonn.network import NmziMesh
from qonn.optimizer import train
from qonn.tasks import build_hamiltonian, exact_ground_energy, sample_lattice_model, vqe_problem


def parse_ints(text):
    out = []
    for part in text.split(","):
        a, _, b = part.partition("-")
        out.extend(range(int(a), int(b or a) + 1))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=parse_ints, default=[0, 1, 2, 3, 4])
    ap.add_argument("--depths", type=parse_ints, default=[1, 7])
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--phi-b", type=float, default=np.pi / 2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", help="optional JSON file for the table")
    args = ap.parse_args()

    rows = []
    for m in args.models:
        model = sample_lattice_model(m)
        e0 = exact_ground_energy(build_hamiltonian(model))
        for depth in args.depths:
            t = time.time()
            res = train(vqe_problem(NmziMesh(10, depth, args.phi_b), model), runs=args.runs, seed=args.seed, workers=args.workers)
            de = res.best.best_cost - e0
            rows.append({"model": m, "depth": depth, "e_exact": e0, "delta_e": de, "runs": args.runs,
                         "evaluations": int(sum(r.evaluations for r in res.records))})
            print(f"model {m}  D={depth:<2}  E0={e0:+.6f}  dE={de:.3e}  ({time.time() - t:.0f} s)", flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
