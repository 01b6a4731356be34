"""Best-of-R infidelity of GHZ-state preparation over a grid of bias phases and depths.

    python scripts/bias_scan.py --qubits 3 --phi-b 0,pi/4,pi/2,pi --depths 1-5 --runs 30
"""

import argparse
import time

import numpy as np

from qonn.cli import _angle, _depths
from qonn.network import NmziMesh
from qonn.optimizer import train
from qonn.runner import INFIDELITY_THRESHOLD
from qonn.tasks import preparation_problem, target_ghz


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=3)
    ap.add_argument("--alpha", type=_angle, default=np.pi / 4)
    ap.add_argument("--phi-b", default="0,pi/4,pi")
    ap.add_argument("--depths", type=_depths, default=[1, 2, 3, 4, 5])
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    target = target_ghz(args.qubits, args.alpha)
    for phi in [_angle(p) for p in args.phi_b.split(",")]:
        for depth in args.depths:
            t = time.time()
            mesh = NmziMesh(2 * args.qubits, depth, phi)
            res = train(preparation_problem(mesh, target), runs=args.runs, seed=args.seed, workers=args.workers)
            hits = int(np.sum(res.costs <= INFIDELITY_THRESHOLD))
            print(f"phi_b={phi:.4f}  D={depth:<2}  P={mesh.n_params:<3}  best 1-F={res.best.best_cost:.3e}  "
                  f"hits={hits}/{args.runs}  ({time.time() - t:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
