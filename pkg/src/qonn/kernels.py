"""Compiled evaluation of phase-and-coupler programs.

A program is a fixed list of steps acting on Fock amplitudes. Each step
multiplies by a diagonal phase ``exp(i (const + sum_c coef[:, c] x[param[c]]))``
and then, optionally, by one of a few real sparse matrices (the coupler
layers). Every network in this package compiles to such a program, so a
single kernel evaluates all of them.
"""

from __future__ import annotations

from typing import Sequence

import numba
import numpy as np
import scipy.sparse as sp


@numba.njit(cache=True)
def _factor_table(x, uvals, uparam):
    tab = np.empty(uvals.size, dtype=np.complex128)
    for u in range(uvals.size):
        ph = uvals[u] * x[uparam[u]]
        tab[u] = complex(np.cos(ph), np.sin(ph))
    return tab


@numba.njit(cache=True)
def _run_vec(amps, x, uvals, uparam, idx, col_start, econst, has_phase, step_op, indptr, indices, data):
    D = amps.size
    tab = _factor_table(x, uvals, uparam)
    cur = amps.copy()
    nxt = np.empty_like(cur)
    for k in range(step_op.size):
        if has_phase[k]:
            c0, c1 = col_start[k], col_start[k + 1]
            for d in range(D):
                f = econst[d, k]
                for c in range(c0, c1):
                    f *= tab[idx[d, c]]
                cur[d] *= f
        o = step_op[k]
        if o >= 0:
            for r in range(D):
                re = 0.0
                im = 0.0
                for p in range(indptr[o, r], indptr[o, r + 1]):
                    v = cur[indices[p]]
                    re += data[p] * v.real
                    im += data[p] * v.imag
                nxt[r] = complex(re, im)
            cur, nxt = nxt, cur
    return cur


@numba.njit(cache=True)
def _run(amps, x, uvals, uparam, idx, col_start, econst, has_phase, step_op, indptr, indices, data):
    D, S = amps.shape
    tab = _factor_table(x, uvals, uparam)
    cur = amps.copy()
    nxt = np.empty_like(cur)
    for k in range(step_op.size):
        if has_phase[k]:
            c0, c1 = col_start[k], col_start[k + 1]
            for d in range(D):
                f = econst[d, k]
                for c in range(c0, c1):
                    f *= tab[idx[d, c]]
                for s in range(S):
                    cur[d, s] *= f
        o = step_op[k]
        if o >= 0:
            nxt[:, :] = 0.0
            for r in range(D):
                for p in range(indptr[o, r], indptr[o, r + 1]):
                    j = indices[p]
                    w = data[p]
                    for s in range(S):
                        nxt[r, s] += w * cur[j, s]
            cur, nxt = nxt, cur
    return cur


class PhaseProgram:
    """Builder and runner for a sequence of (phase, real sparse layer) steps."""

    def __init__(self, dim: int, ops: Sequence[sp.spmatrix]):
        self.dim = dim
        mats = [sp.csr_matrix(op) for op in ops]
        for m in mats:
            if m.shape != (dim, dim):
                raise ValueError(f"operator shape {m.shape} does not match dimension {dim}")
            if np.iscomplexobj(m.data) and np.any(m.data.imag):
                raise ValueError("program operators must be real")
        offsets = np.cumsum([0] + [m.nnz for m in mats])
        self._indptr = np.stack([m.indptr.astype(np.int64) + off for m, off in zip(mats, offsets)]) if mats else np.zeros((0, dim + 1), np.int64)
        self._indices = np.concatenate([m.indices for m in mats]).astype(np.int32) if mats else np.zeros(0, np.int32)
        self._data = np.concatenate([m.data.real for m in mats]).astype(float) if mats else np.zeros(0)
        self._steps: list[tuple[list[tuple[np.ndarray, int]], np.ndarray | None, int]] = []
        self._frozen = None

    def add(self, terms: Sequence[tuple[np.ndarray, int]] = (), const: np.ndarray | None = None, op: int = -1) -> None:
        """Append a step: phase from ``terms`` (coefficient column, parameter index) and ``const``, then ``op``."""
        self._steps.append((list(terms), const, op))
        self._frozen = None

    def _compile(self):
        # each coefficient column takes few distinct values (photon-number
        # functions), so phases become products of per-call lookup tables
        n_steps = len(self._steps)
        uvals, uparam, idx, starts = [], [], [], [0]
        econst = np.ones((self.dim, n_steps), dtype=complex)
        has_phase = np.zeros(n_steps, dtype=np.bool_)
        step_op = np.empty(n_steps, dtype=np.int64)
        n_u = 0
        for k, (terms, c, op) in enumerate(self._steps):
            for coef, param in terms:
                u, inv = np.unique(np.asarray(coef, dtype=float), return_inverse=True)
                uvals.append(u)
                uparam.append(np.full(u.size, param, dtype=np.int64))
                idx.append(inv.ravel() + n_u)
                n_u += u.size
            starts.append(len(idx))
            if c is not None:
                econst[:, k] = np.exp(1j * np.asarray(c, dtype=float))
            has_phase[k] = bool(terms) or (c is not None and np.any(c))
            step_op[k] = op
        self._frozen = (
            np.concatenate(uvals) if uvals else np.zeros(0),
            np.concatenate(uparam) if uparam else np.zeros(0, np.int64),
            np.ascontiguousarray(np.stack(idx, axis=1)) if idx else np.zeros((self.dim, 0), np.int64),
            np.array(starts, dtype=np.int64),
            econst,
            has_phase,
            step_op,
        )
        return self._frozen

    def __call__(self, amps: np.ndarray, x: np.ndarray) -> np.ndarray:
        frozen = self._frozen or self._compile()
        a = np.asarray(amps, dtype=complex)
        x = np.ascontiguousarray(x, dtype=float)
        if a.ndim == 1:
            return _run_vec(np.ascontiguousarray(a), x, *frozen, self._indptr, self._indices, self._data)
        return _run(np.ascontiguousarray(a), x, *frozen, self._indptr, self._indices, self._data)
