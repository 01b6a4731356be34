"""Linear and Kerr-type optical elements acting on Fock states.

Transfer-matrix convention: a 2x2 (or MxM) matrix ``U`` maps a single-photon
amplitude vector ``psi`` to ``U @ psi``; creation operators transform as
``a_j^dag -> sum_i U[i, j] b_i^dag``. Multiphoton amplitudes follow from this
via binomial expansion (two modes) or permanents (any number of modes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from math import comb, factorial, sqrt
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fock import FockBasis, StateVector

CONSTRUCTION_TOL = 1e-12
EXTERNAL_TOL = 1e-8
MAX_PERMANENT_SIZE = 12

_DC = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


class NonUnitaryError(ValueError):
    pass


def unitarity_error(U: np.ndarray) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))))


def check_unitary(U: np.ndarray, tol: float = EXTERNAL_TOL) -> None:
    err = unitarity_error(U)
    if err > tol:
        raise NonUnitaryError(f"matrix deviates from unitarity by {err:.3e} (tol {tol:.0e})")


def dc_matrix() -> np.ndarray:
    """Balanced directional coupler, (1/sqrt2) [[1, 1], [1, -1]]."""
    return _DC.copy()


def mzi_matrix(theta1: float, theta2: float) -> np.ndarray:
    """MZI: DC . diag(e^{i theta2}, 1) . DC . diag(e^{i theta1}, 1)."""
    p1 = np.diag([np.exp(1j * theta1), 1.0])
    p2 = np.diag([np.exp(1j * theta2), 1.0])
    return _DC @ p2 @ _DC @ p1


@dataclass(frozen=True)
class NsGate:
    """Programmable sign-shift gate exp(i chi/2 n(n-1)) on one mode."""

    chi: float
    mode: int


def _check_mode(basis: FockBasis, mode: int) -> None:
    if not 0 <= mode < basis.modes:
        raise IndexError(f"mode {mode} out of range for {basis.modes} modes")


def apply_ns(state: StateVector, gate: NsGate) -> StateVector:
    _check_mode(state.basis, gate.mode)
    n = state.basis.states[:, gate.mode]
    return StateVector(state.basis, state.amps * np.exp(0.5j * gate.chi * n * (n - 1)))


def apply_phase(state: StateVector, phi: float, mode: int) -> StateVector:
    """Linear phase shifter e^{i phi n} on one mode."""
    _check_mode(state.basis, mode)
    n = state.basis.states[:, mode]
    return StateVector(state.basis, state.amps * np.exp(1j * phi * n))


# ------------------------------------------------------------ two-mode lift


def two_mode_lift(U: np.ndarray, total: int) -> np.ndarray:
    """Action of a 2x2 transfer matrix on the ``total``-photon sector of two modes.

    Rows and columns are indexed by the occupation of the first mode, so entry
    ``[p, a]`` is <p, total-p| U |a, total-a>.
    """
    U = np.asarray(U, dtype=complex)
    u00, u01, u10, u11 = U[0, 0], U[0, 1], U[1, 0], U[1, 1]
    k = total
    out = np.zeros((k + 1, k + 1), dtype=complex)
    for a in range(k + 1):
        b = k - a
        norm_in = sqrt(factorial(a) * factorial(b))
        for p in range(k + 1):
            q = k - p
            s = 0j
            for j in range(max(0, p - b), min(a, p) + 1):
                s += (
                    comb(a, j) * comb(b, p - j)
                    * u00**j * u10 ** (a - j) * u01 ** (p - j) * u11 ** (b - p + j)
                )
            out[p, a] = s * sqrt(factorial(p) * factorial(q)) / norm_in
    return out


@lru_cache(maxsize=1024)
def pair_groups(basis: FockBasis, i: int, j: int) -> tuple[np.ndarray, ...]:
    """Index tables grouping basis states that differ only on modes ``i``, ``j``.

    Element ``k`` has shape (groups, k+1); entry ``[r, p]`` is the position of
    the state with the r-th spectator configuration, ``t_i = p`` and
    ``t_j = k - p``.
    """
    if i == j:
        raise ValueError("mode pair must be two distinct modes")
    _check_mode(basis, i)
    _check_mode(basis, j)
    keep = [m for m in range(basis.modes) if m not in (i, j)]
    groups: list[dict] = [dict() for _ in range(basis.photons + 1)]
    for pos, occ in enumerate(basis.states):
        k = int(occ[i] + occ[j])
        rest = tuple(int(occ[m]) for m in keep)
        groups[k].setdefault(rest, [None] * (k + 1))[int(occ[i])] = pos
    tables = []
    for k, g in enumerate(groups):
        arr = np.array(list(g.values()), dtype=np.int64).reshape(-1, k + 1)
        arr.setflags(write=False)
        tables.append(arr)
    return tuple(tables)


def apply_pair_blocks(amps: np.ndarray, basis: FockBasis, modes: tuple[int, int], blocks) -> np.ndarray:
    """Apply per-sector matrices ``blocks[k]`` to the mode pair; returns new amplitudes."""
    out = np.array(amps, dtype=complex, copy=True)
    for k, table in enumerate(pair_groups(basis, *modes)):
        if table.size == 0:
            continue
        out[table] = amps[table] @ blocks[k].T
    return out


def apply_two_mode(state: StateVector, U: np.ndarray, modes: tuple[int, int]) -> StateVector:
    """Multiphoton lift of a 2x2 unitary acting on ``modes = (i, j)``."""
    blocks = [two_mode_lift(U, k) for k in range(state.basis.photons + 1)]
    return StateVector(state.basis, apply_pair_blocks(state.amps, state.basis, modes, blocks))


def pair_operator(basis: FockBasis, U: np.ndarray, modes: tuple[int, int]) -> sp.csr_matrix:
    """Sparse DxD matrix of the two-mode lift on the full Fock space."""
    rows, cols, vals = [], [], []
    for k, table in enumerate(pair_groups(basis, *modes)):
        if table.size == 0:
            continue
        L = two_mode_lift(U, k)
        # every group contributes the same (k+1)x(k+1) block
        rows.append(np.repeat(table, k + 1, axis=1).ravel())
        cols.append(np.tile(table, (1, k + 1)).ravel())
        vals.append(np.broadcast_to(L.ravel(), (table.shape[0], (k + 1) ** 2)).ravel())
    D = basis.dim
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D)
    ).tocsr()
    mat.eliminate_zeros()
    return mat


def layer_operator(basis: FockBasis, U: np.ndarray, pairs: Sequence[tuple[int, int]]) -> sp.csr_matrix:
    """Product of identical two-mode lifts on disjoint pairs (they commute)."""
    op = sp.identity(basis.dim, dtype=complex, format="csr")
    for pair in pairs:
        op = pair_operator(basis, U, pair) @ op
    op = op.tocsr()
    if np.allclose(op.data.imag, 0.0):
        op = op.real.tocsr()
    op.eliminate_zeros()
    return op


# ---------------------------------------------------------- permanents


def permanent(A: np.ndarray) -> complex:
    """Matrix permanent by Ryser's formula, subsets visited in Gray-code order."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_PERMANENT_SIZE:
        raise ValueError(f"permanent of a {n}x{n} matrix exceeds the size limit {MAX_PERMANENT_SIZE}")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    gray_prev = 0
    for k in range(1, 2**n):
        gray = k ^ (k >> 1)
        changed = gray ^ gray_prev
        col = changed.bit_length() - 1
        if gray & changed:
            row_sums += A[:, col]
        else:
            row_sums -= A[:, col]
        gray_prev = gray
        sign = -1 if bin(gray).count("1") % 2 else 1
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def permanent_naive(A: np.ndarray) -> complex:
    """Sum over all n! permutations; test oracle only."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    return complex(sum(np.prod([A[i, s[i]] for i in range(n)]) for s in permutations(range(n)))) if n else 1 + 0j


def _repeat_index(occ: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(occ)), occ)


def multimode_lift(basis: FockBasis, V: np.ndarray) -> np.ndarray:
    """Dense Fock-space matrix <t|Phi(V)|s> = perm(V[t, s]) / sqrt(prod t! prod s!)."""
    V = np.asarray(V, dtype=complex)
    if V.shape != (basis.modes, basis.modes):
        raise ValueError(f"transfer matrix shape {V.shape} does not match {basis.modes} modes")
    check_unitary(V, EXTERNAL_TOL)
    fact = np.array([np.prod([factorial(int(t)) for t in occ]) for occ in basis.states], dtype=float)
    idx = [_repeat_index(occ) for occ in basis.states]
    D = basis.dim
    out = np.empty((D, D), dtype=complex)
    for r in range(D):
        rows = V[idx[r]]
        for c in range(D):
            out[r, c] = permanent(rows[:, idx[c]])
    return out / np.sqrt(np.outer(fact, fact))


def apply_multimode(state: StateVector, V: np.ndarray) -> StateVector:
    """Apply an MxM linear-optical transfer matrix via permanents (reference path)."""
    return StateVector(state.basis, multimode_lift(state.basis, V) @ state.amps)


# ---------------------------------------------------------- Clements mesh


def clements_columns(modes: int) -> list[list[tuple[int, int]]]:
    """Rectangular mesh: even columns couple (0,1),(2,3)...; odd ones (1,2),(3,4)..."""
    cols = []
    for c in range(modes):
        start = c % 2
        cols.append([(i, i + 1) for i in range(start, modes - 1, 2)])
    return cols


def clements_param_count(modes: int) -> int:
    return modes * modes


def embed_two_mode(U: np.ndarray, modes: int, pair: tuple[int, int]) -> np.ndarray:
    out = np.eye(modes, dtype=complex)
    i, j = pair
    out[np.ix_([i, j], [i, j])] = U
    return out


def clements_mesh(theta: Sequence[float], modes: int) -> np.ndarray:
    """Transfer matrix of a rectangular MZI mesh.

    ``theta`` holds the (theta1, theta2) pair of each MZI, column by column and
    top to bottom, followed by ``modes`` output phases: ``modes**2`` numbers.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (modes * modes,):
        raise ValueError(f"Clements mesh on {modes} modes needs {modes * modes} phases, got {theta.size}")
    V = np.eye(modes, dtype=complex)
    k = 0
    for column in clements_columns(modes):
        for pair in column:
            V = embed_two_mode(mzi_matrix(theta[k], theta[k + 1]), modes, pair) @ V
            k += 2
    return np.diag(np.exp(1j * theta[k:])) @ V


def transfer_matrix_to_json(V: np.ndarray) -> str:
    V = np.asarray(V, dtype=complex)
    return json.dumps(
        {
            "rows": V.shape[0],
            "cols": V.shape[1],
            "data": [[float(z.real), float(z.imag)] for z in V.ravel()],
        }
    )


def transfer_matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    data = np.array(obj["data"], dtype=float)
    return (data[:, 0] + 1j * data[:, 1]).reshape(obj["rows"], obj["cols"])
