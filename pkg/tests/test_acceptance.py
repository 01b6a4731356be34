"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest (``pytest tests/test_acceptance.py``) or directly with
``python tests/test_acceptance.py``. Criterion 9 belongs to the slow suite
and only runs with ``--run-slow`` or ``QONN_RUN_SLOW=1``.
"""

import os
import sys
import time

import numpy as np
import pytest

from qonn.fock import StateVector, build_basis, decode_dualrail, encode_dualrail, project_dualrail
from qonn.network import (
    LinOptQonn,
    NmziMesh,
    NmziParams,
    apply_core,
    apply_nmzi_closed,
    apply_nmzi_composed,
    count_params,
    lo_depth,
)
from qonn.optics import apply_multimode, apply_two_mode, clements_columns, clements_mesh, mzi_matrix
from qonn.optimizer import BoundedProblem, default_workers, train, train_once
from qonn.runner import INFIDELITY_THRESHOLD, REFERENCE_TABLES, VQE_THRESHOLD
from qonn.tasks import (
    build_hamiltonian,
    discrimination_problem,
    discrimination_set,
    exact_ground_energy,
    preparation_problem,
    sample_lattice_model,
    target_ghz,
    vqe_problem,
)

MASTER_SEED = 0


def report(number, title, ok, detail, elapsed):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail}; {elapsed:.1f} s)", flush=True)
    return ok


def gate(capsys, criterion) -> bool:
    # the PASS/FAIL lines must reach the terminal even under capture
    with capsys.disabled():
        return criterion()


# -------------------------------------------------------------- criteria


def criterion_1():
    t = time.time()
    basis = build_basis(4, 2)
    amps = []
    for bits in ("00", "01", "10", "11"):
        s = encode_dualrail(bits, basis)
        out = apply_nmzi_closed(s, NmziParams(np.pi, np.pi, 0.0), (1, 3))
        amps.append(np.vdot(s.amps, out.amps))
    amps = np.array(amps) / amps[0]
    dev = float(np.max(np.abs(amps - [1, 1, 1, -1])))
    return report(1, "CZ special case", dev <= 1e-10, f"max deviation {dev:.1e}", time.time() - t)


def criterion_2():
    t = time.time()
    rng = np.random.default_rng(MASTER_SEED)
    dev = 0.0
    for _ in range(200):
        p = NmziParams(*rng.uniform(0, np.pi, 2), rng.uniform(0, 2 * np.pi))
        for total in range(6):
            basis = build_basis(2, total)
            for occ in basis.states:
                s = StateVector.from_occupation(basis, occ)
                a = apply_nmzi_closed(s, p, (0, 1)).amps
                b = apply_nmzi_composed(s, p, (0, 1)).amps
                dev = max(dev, float(np.max(np.abs(a - b))))
    return report(2, "closed-form NMZI vs composition", dev <= 1e-12, f"max deviation {dev:.1e}", time.time() - t)


def criterion_3():
    t = time.time()
    rng = np.random.default_rng(MASTER_SEED + 1)
    dev = 0.0
    for trial in range(50):
        M = int(rng.integers(2, 7))
        N = int(rng.integers(1, 4))
        theta = rng.uniform(0, 2 * np.pi, M * M)
        basis = build_basis(M, N)
        amps = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        state = StateVector(basis, amps / np.linalg.norm(amps))
        seq = state
        k = 0
        for column in clements_columns(M):
            for pair in column:
                seq = apply_two_mode(seq, mzi_matrix(theta[k], theta[k + 1]), pair)
                k += 2
        n = basis.states.astype(float)
        seq = StateVector(basis, seq.amps * np.exp(1j * n @ theta[k:]))
        perm = apply_multimode(state, clements_mesh(theta, M))
        dev = max(dev, float(np.max(np.abs(seq.amps - perm.amps))))
    return report(3, "permanent lift vs two-mode sequence", dev <= 1e-10, f"max deviation {dev:.1e}", time.time() - t)


def criterion_4():
    t = time.time()
    bad = []
    n = 0
    for name, spec in REFERENCE_TABLES.items():
        for label, arch, _, _, entries in spec["rows"]:
            for column, entry in zip(spec["columns"], entries):
                if entry is None:
                    continue
                depth, d_lo, params = entry
                modes = 2 * column["qubits"]
                kind = "linear" if arch == "linear-optics" else "nonlinear"
                n += 1
                got_p = count_params(modes, depth, kind)
                got_d = lo_depth(modes, depth) if kind == "linear" else 0
                if (got_p, got_d) != (params, d_lo):
                    bad.append(f"{name}/{label}: P {got_p} vs {params}, D_LO {got_d} vs {d_lo}")
    detail = f"{n} entries checked" + (f"; mismatches: {bad}" if bad else "")
    return report(4, "table arithmetic (P, D_LO)", not bad, detail, time.time() - t)


def _best_of(problem, runs):
    return train(problem, runs=runs, seed=MASTER_SEED, workers=default_workers())


def criterion_5():
    t = time.time()
    res = _best_of(discrimination_problem(NmziMesh(4, 1, 0.0), discrimination_set(4)), 50)
    best = res.best.best_cost
    hits = int(np.sum(res.costs <= INFIDELITY_THRESHOLD))
    return report(
        5, "four-state discrimination, D_NL=1, phi_b=0", best <= INFIDELITY_THRESHOLD,
        f"best 1-CF {best:.2e}, {hits}/50 runs under 1e-7", time.time() - t,
    )


def criterion_6():
    t = time.time()
    mesh = NmziMesh(4, 5, 0.0)
    res = _best_of(discrimination_problem(mesh, discrimination_set(6)), 50)
    best = res.best.best_cost
    hits = int(np.sum(res.costs <= INFIDELITY_THRESHOLD))
    chi, _ = mesh.split(res.best.best_x)
    near = np.minimum(np.abs(chi - np.pi / 2), np.abs(chi - np.pi)) <= 0.05
    cluster = f"{int(near.sum())}/{chi.size} trained chi within 0.05 of pi/2 or pi (reported only)"
    return report(
        6, "six-state discrimination, D_NL=5, phi_b=0", best <= INFIDELITY_THRESHOLD,
        f"best 1-CF {best:.2e}, {hits}/50 runs under 1e-7; {cluster}", time.time() - t,
    )


def criterion_7():
    t = time.time()
    target = target_ghz(3, np.pi / 4)
    curve = []
    for depth in range(1, 6):
        res = _best_of(preparation_problem(NmziMesh(6, depth, np.pi / 4), target), 30)
        curve.append((depth, res.best.best_cost))
        if res.best.best_cost <= INFIDELITY_THRESHOLD:
            break
    ok = any(c <= INFIDELITY_THRESHOLD for _, c in curve)
    detail = "best-of-30 1-F by depth: " + ", ".join(f"D={d}: {c:.2e}" for d, c in curve)
    return report(7, "GHZ-3 (alpha=pi/4) at phi_b=pi/4, some D_NL<=5", ok, detail, time.time() - t)


def criterion_8():
    t = time.time()
    net = LinOptQonn(4, 1)
    assert net.n_params == 24
    res = _best_of(discrimination_problem(net, discrimination_set(4)), 50)
    best = res.best.best_cost
    hits = int(np.sum(res.costs <= INFIDELITY_THRESHOLD))
    return report(
        8, "linear-optics baseline, four-state discrimination, D_NL=1", best <= INFIDELITY_THRESHOLD,
        f"best 1-CF {best:.2e}, {hits}/50 runs under 1e-7", time.time() - t,
    )


def criterion_9(models=5, runs=50):
    t = time.time()
    rows = []
    ok = True
    for seed in range(models):
        model = sample_lattice_model(seed)
        e0 = exact_ground_energy(build_hamiltonian(model))
        de = {}
        for depth in (1, 7):
            res = _best_of(vqe_problem(NmziMesh(10, depth, np.pi / 2), model), runs)
            de[depth] = res.best.best_cost - e0
        ok &= de[7] <= VQE_THRESHOLD and de[1] > de[7]
        rows.append(f"model {seed}: dE(1)={de[1]:.2e} dE(7)={de[7]:.2e}")
    return report(9, "VQE trend, phi_b=pi/2", ok, "; ".join(rows), time.time() - t)


def criterion_10():
    t = time.time()
    rng = np.random.default_rng(MASTER_SEED + 10)
    failures = []

    # norm and photon number over random circuits
    worst = 0.0
    for _ in range(1000):
        M = int(rng.integers(2, 9))
        N = int(rng.integers(1, 4))
        mesh = NmziMesh(M, int(rng.integers(0, 7)), rng.uniform(0, 2 * np.pi), corrections=False)
        basis = build_basis(M, N)
        a = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        out = apply_core(StateVector(basis, a / np.linalg.norm(a)), mesh, rng.uniform(0, np.pi, mesh.n_chi))
        worst = max(worst, abs(out.norm() - 1.0))
        if out.basis.photons != N:
            failures.append("photon number")
    if worst > 1e-12:
        failures.append(f"norm drift {worst:.1e}")

    # variational bound
    model = sample_lattice_model(MASTER_SEED)
    e_min = exact_ground_energy(build_hamiltonian(model))
    problem = vqe_problem(NmziMesh(10, 2, np.pi / 2), model)
    energies = [problem.objective(rng.uniform(problem.lower, problem.upper)) for _ in range(50)]
    if min(energies) < e_min - 1e-12:
        failures.append("variational bound")

    # dual-rail codec round trip
    for n in range(1, 6):
        basis = build_basis(2 * n, n)
        for k in range(2**n):
            bits = format(k, f"0{n}b")
            psi, w = project_dualrail(encode_dualrail(bits, basis))
            if decode_dualrail(basis.states[np.flatnonzero(encode_dualrail(bits, basis).amps)[0]]) != bits or abs(w - 1) > 1e-15 or abs(psi[k]) != 1:
                failures.append(f"codec {bits}")

    # optimizer determinism and bounds
    lower, upper = np.zeros(4), np.ones(4)
    seen = []

    def f(x):
        seen.append(bool(np.all(x >= lower) and np.all(x <= upper)))
        return float(np.sum((x - 1.5) ** 2))

    p = BoundedProblem(lower, upper, f, budget=5000)
    a, b = train_once(p, 123), train_once(p, 123)
    if (a.best_cost, a.evaluations, a.best_x) != (b.best_cost, b.evaluations, b.best_x):
        failures.append("optimizer determinism")
    if not all(seen):
        failures.append("bounds violated")

    detail = "1000 circuits, norm drift %.1e" % worst + (f"; failures: {failures}" if failures else "")
    return report(10, "property suite", not failures, detail, time.time() - t)


# ------------------------------------------------------------ pytest hooks


def test_criterion_1_cz(capsys):
    assert gate(capsys, criterion_1)


def test_criterion_2_closed_form(capsys):
    assert gate(capsys, criterion_2)


def test_criterion_3_permanent_lift(capsys):
    assert gate(capsys, criterion_3)


def test_criterion_4_accounting(capsys):
    assert gate(capsys, criterion_4)


def test_criterion_5_four_state_discrimination(capsys):
    assert gate(capsys, criterion_5)


def test_criterion_6_six_state_discrimination(capsys):
    assert gate(capsys, criterion_6)


def test_criterion_7_ghz3_preparation(capsys):
    assert gate(capsys, criterion_7)


def test_criterion_8_linear_optics_baseline(capsys):
    assert gate(capsys, criterion_8)


@pytest.mark.slow
def test_criterion_9_vqe(capsys):
    assert gate(capsys, criterion_9)


def test_criterion_10_properties(capsys):
    assert gate(capsys, criterion_10)


if __name__ == "__main__":
    results = [c() for c in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8)]
    if "--run-slow" in sys.argv or os.environ.get("QONN_RUN_SLOW"):
        results.append(criterion_9())
    else:
        print("[SKIP] criterion 9: VQE trend (slow suite; pass --run-slow)")
    results.append(criterion_10())
    sys.exit(0 if all(results) else 1)
