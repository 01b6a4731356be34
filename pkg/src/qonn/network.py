"""NMZI meshes, the full QONN with single-qubit corrections, and the
linear-optics-programmed baseline.

Layer numbering is 1-based: odd layers hold the offset blocks on modes
(1,2), (3,4), ... (0-based), even layers the aligned blocks on (0,1), (2,3), ...
The chi vector is laid out layer by layer, block by block, (chi1, chi2) per
block, where chi1 acts on the lower mode of the pair (the arm carrying the
bias phase). Correction phases theta are (theta1, theta2) per qubit, input
MZIs first, then output MZIs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, sqrt
from typing import Sequence

import numpy as np

from .fock import FockBasis, StateVector, build_basis
from .kernels import PhaseProgram
from .optics import (
    NsGate,
    apply_ns,
    apply_pair_blocks,
    apply_phase,
    apply_two_mode,
    clements_columns,
    dc_matrix,
    layer_operator,
)

CHI_MAX = np.pi
DENSE_DIM = 128
ALIGNED, OFFSET = 0, 1  # operator slots of the compiled programs


class ParameterCountError(ValueError):
    pass


# --------------------------------------------------------------- accounting


def count_params(modes: int, depth: int, kind: str = "nonlinear") -> int:
    """Trainable parameters of the core (nonlinear) or of the baseline (linear)."""
    if kind == "nonlinear":
        if modes % 2 == 0:
            return depth * (modes - 2) + 2 * (depth // 2)
        # odd M: both layer types hold (M-1)/2 blocks
        return depth * (modes - 1)
    if kind == "linear":
        return (depth + 1) * modes * (modes - 1)
    raise ValueError(f"unknown architecture kind {kind!r}")


def lo_depth(modes: int, depth: int) -> int:
    """Phase-shift layers of the linear-optics baseline with ``depth`` NS layers."""
    return (modes + 1) * (depth + 1)


def layer_pairs(modes: int, layer: int) -> list[tuple[int, int]]:
    """Mode pairs of the 1-based ``layer``: odd layers offset, even layers aligned."""
    start = 1 if layer % 2 else 0
    return [(i, i + 1) for i in range(start, modes - 1, 2)]


# ------------------------------------------------------------- single NMZI


@dataclass(frozen=True)
class NmziParams:
    chi1: float
    chi2: float
    phi_b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "chi1", float(np.clip(self.chi1, 0.0, CHI_MAX)))
        object.__setattr__(self, "chi2", float(np.clip(self.chi2, 0.0, CHI_MAX)))


def nmzi_block(total: int, chi1: float, chi2: float, phi: float) -> np.ndarray:
    """Closed-form NMZI action on the ``total``-photon sector of its two modes.

    Entry ``[p_out, n]`` is the amplitude of |p_out, total-p_out> produced
    from |n, total-n>: an outer binomial expansion through the first coupler,
    the Kerr and bias phases on the intermediate occupation (p, q), then the
    binomial expansion through the second coupler.
    """
    k = total
    out = np.zeros((k + 1, k + 1), dtype=complex)
    for n in range(k + 1):
        m = k - n
        for p in range(k + 1):
            q = k - p
            c1 = 0
            for j in range(max(0, p - m), min(n, p) + 1):
                c1 += comb(n, j) * comb(m, p - j) * (-1) ** (m - p + j)
            if c1 == 0:
                continue
            phase = np.exp(1j * (0.5 * chi1 * p * (p - 1) + 0.5 * chi2 * q * (q - 1) + phi * p))
            for pt in range(k + 1):
                qt = k - pt
                c2 = 0
                for kk in range(max(0, pt - q), min(p, pt) + 1):
                    c2 += comb(p, kk) * comb(q, pt - kk) * (-1) ** (q - pt + kk)
                if c2 == 0:
                    continue
                out[pt, n] += c1 * phase * c2 * sqrt(factorial(pt) * factorial(qt))
        out[:, n] /= 2.0**k * sqrt(factorial(n) * factorial(m))
    return out


def apply_nmzi_closed(state: StateVector, p: NmziParams, modes: tuple[int, int]) -> StateVector:
    blocks = [nmzi_block(k, p.chi1, p.chi2, p.phi_b) for k in range(state.basis.photons + 1)]
    return StateVector(state.basis, apply_pair_blocks(state.amps, state.basis, modes, blocks))


def apply_nmzi_composed(state: StateVector, p: NmziParams, modes: tuple[int, int]) -> StateVector:
    """Element-by-element NMZI: DC, NS(chi1)+bias on the first arm, NS(chi2), DC."""
    i, j = modes
    s = apply_two_mode(state, dc_matrix(), modes)
    s = apply_ns(s, NsGate(p.chi1, i))
    s = apply_phase(s, p.phi_b, i)
    s = apply_ns(s, NsGate(p.chi2, j))
    return apply_two_mode(s, dc_matrix(), modes)


# ------------------------------------------------------------ descriptions


@dataclass(frozen=True)
class NmziMesh:
    """Brick-wall NMZI core of ``depth`` layers plus optional MZI corrections.

    ``block_phi`` overrides the shared bias per block (flattened in chi order);
    by default every NMZI carries ``phi_b``.
    """

    modes: int
    depth: int
    phi_b: float = 0.0
    corrections: bool = True
    block_phi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.modes < 2:
            raise ValueError("an NMZI mesh needs at least two modes")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.block_phi is not None:
            object.__setattr__(self, "block_phi", tuple(float(x) for x in self.block_phi))
            if len(self.block_phi) != self.n_blocks:
                raise ParameterCountError(
                    f"{len(self.block_phi)} block biases for {self.n_blocks} blocks"
                )

    @property
    def layers(self) -> list[list[tuple[int, int]]]:
        return [layer_pairs(self.modes, l) for l in range(1, self.depth + 1)]

    @property
    def n_blocks(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @property
    def n_chi(self) -> int:
        return 2 * self.n_blocks

    @property
    def qubits(self) -> int:
        return self.modes // 2

    @property
    def n_theta(self) -> int:
        return 4 * self.qubits if self.corrections else 0

    @property
    def n_params(self) -> int:
        return self.n_chi + self.n_theta

    def biases(self) -> list[float]:
        if self.block_phi is not None:
            return list(self.block_phi)
        return [self.phi_b] * self.n_blocks

    def split(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_params,):
            raise ParameterCountError(f"expected {self.n_params} parameters, got {x.size}")
        return x[: self.n_chi], x[self.n_chi :]

    def to_dict(self) -> dict:
        d = {
            "modes": self.modes,
            "depth": self.depth,
            "phi_b": self.phi_b,
            "layout": [[list(p) for p in layer] for layer in self.layers],
            "corrections": self.corrections,
        }
        if self.block_phi is not None:
            d["block_phi"] = list(self.block_phi)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NmziMesh":
        mesh = cls(
            modes=int(d["modes"]),
            depth=int(d["depth"]),
            phi_b=float(d.get("phi_b", 0.0)),
            corrections=bool(d.get("corrections", True)),
            block_phi=tuple(d["block_phi"]) if d.get("block_phi") is not None else None,
        )
        if "layout" in d and [[tuple(p) for p in l] for l in d["layout"]] != mesh.layers:
            raise ValueError("stored layout disagrees with the brick-wall rule")
        return mesh


@dataclass(frozen=True)
class LinOptQonn:
    """Universal interferometers alternating with static NS(pi) layers."""

    modes: int
    depth: int
    chi: float = field(default=np.pi)

    @property
    def per_interferometer(self) -> int:
        return self.modes * (self.modes - 1)

    @property
    def n_params(self) -> int:
        return (self.depth + 1) * self.per_interferometer

    def to_dict(self) -> dict:
        return {"modes": self.modes, "depth": self.depth, "chi": self.chi, "kind": "linear"}


# -------------------------------------------------------------- simulators


@lru_cache(maxsize=32)
def coupler_csr(basis: FockBasis):
    """Real sparse lifts of one DC on every aligned pair and on every offset pair."""
    return tuple(layer_operator(basis, dc_matrix(), layer_pairs(basis.modes, layer)) for layer in (2, 1))


@lru_cache(maxsize=32)
def coupler_layers(basis: FockBasis):
    """Coupler layers for the numpy path: dense on small spaces, complex CSR otherwise."""
    # small spaces: dense products beat sparse call overhead
    return tuple(op.toarray() if basis.dim <= DENSE_DIM else op.astype(complex) for op in coupler_csr(basis))


def _kerr(n: np.ndarray) -> np.ndarray:
    return 0.5 * n * (n - 1)


def _phase_mul(amps: np.ndarray, phase: np.ndarray) -> np.ndarray:
    f = np.exp(1j * phase)
    return amps * (f if amps.ndim == 1 else f[:, None])


class NmziSimulator:
    """Precompiled evaluation of a mesh on a fixed Fock space.

    Each NMZI layer is the coupler layer, a diagonal phase carrying all Kerr
    terms and biases of the layer, and the coupler layer again; the MZI
    corrections reuse the aligned coupler layer with per-qubit phases.
    Amplitude arrays may be (D,) or (D, S) for a batch of S inputs.
    """

    def __init__(self, mesh: NmziMesh, photons: int | None = None):
        self.mesh = mesh
        self.photons = mesh.qubits if photons is None else photons
        self.basis = build_basis(mesh.modes, self.photons)
        t = self.basis.states.astype(float)
        aligned, offset = coupler_layers(self.basis)
        biases = mesh.biases()
        self._layers = []
        b = 0
        for l, pairs in enumerate(mesh.layers, start=1):
            kerr = np.empty((self.basis.dim, 2 * len(pairs)))
            bias = np.zeros(self.basis.dim)
            for k, (i, j) in enumerate(pairs):
                kerr[:, 2 * k] = _kerr(t[:, i])
                kerr[:, 2 * k + 1] = _kerr(t[:, j])
                bias += biases[b] * t[:, i]
                b += 1
            self._layers.append((offset if l % 2 else aligned, kerr, bias))
        if mesh.modes % 2 == 0:
            self._first_rail = t[:, 0::2]
            self._qubit_coupler = aligned
        self.program = self._compile()

    def _compile(self) -> PhaseProgram:
        prog = PhaseProgram(self.basis.dim, coupler_csr(self.basis))
        mesh = self.mesh

        def corrections(start):
            for half in (0, 1):
                terms = [(self._first_rail[:, q], start + 2 * q + half) for q in range(self._first_rail.shape[1])]
                prog.add(terms, op=ALIGNED)

        if mesh.corrections:
            corrections(mesh.n_chi)
        pos = 0
        for l, (_, kerr, bias) in enumerate(self._layers, start=1):
            op = OFFSET if l % 2 else ALIGNED
            prog.add(op=op)
            prog.add([(kerr[:, c], pos + c) for c in range(kerr.shape[1])], const=bias, op=op)
            pos += kerr.shape[1]
        if mesh.corrections:
            corrections(mesh.n_chi + mesh.n_theta // 2)
        return prog

    def core_amps(self, amps: np.ndarray, chi: np.ndarray) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        if chi.shape != (self.mesh.n_chi,):
            raise ParameterCountError(f"expected {self.mesh.n_chi} nonlinearities, got {chi.size}")
        pos = 0
        for op, kerr, bias in self._layers:
            w = kerr.shape[1]
            amps = op @ amps
            amps = _phase_mul(amps, kerr @ chi[pos : pos + w] + bias)
            amps = op @ amps
            pos += w
        return amps

    def corrections_amps(self, amps: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Per-qubit MZIs: phase theta1 on the first rail, DC, theta2, DC."""
        theta = np.asarray(theta, dtype=float).reshape(-1, 2)
        amps = _phase_mul(amps, self._first_rail @ theta[:, 0])
        amps = self._qubit_coupler @ amps
        amps = _phase_mul(amps, self._first_rail @ theta[:, 1])
        return self._qubit_coupler @ amps

    def reference_amps(self, amps: np.ndarray, chi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Layer-by-layer numpy evaluation; cross-checks the compiled program."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.mesh.n_theta,):
            raise ParameterCountError(f"expected {self.mesh.n_theta} correction phases, got {theta.size}")
        if self.mesh.corrections:
            half = self.mesh.n_theta // 2
            amps = self.corrections_amps(amps, theta[:half])
        amps = self.core_amps(amps, chi)
        if self.mesh.corrections:
            amps = self.corrections_amps(amps, theta[half:])
        return amps

    def qonn_amps(self, amps: np.ndarray, chi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if chi.shape != (self.mesh.n_chi,):
            raise ParameterCountError(f"expected {self.mesh.n_chi} nonlinearities, got {chi.size}")
        if theta.shape != (self.mesh.n_theta,):
            raise ParameterCountError(f"expected {self.mesh.n_theta} correction phases, got {theta.size}")
        return self.program(amps, np.concatenate([chi, theta]))

    def __call__(self, amps: np.ndarray, x: np.ndarray) -> np.ndarray:
        chi, theta = self.mesh.split(x)
        return self.program(amps, np.concatenate([chi, theta]))

    def snapshots(self, amps: np.ndarray, chi: np.ndarray, theta: np.ndarray) -> list[np.ndarray]:
        """|c_t| of the state as it reaches the Kerr gates of every layer."""
        chi = np.asarray(chi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.mesh.corrections:
            amps = self.corrections_amps(amps, theta[: self.mesh.n_theta // 2])
        shots = []
        pos = 0
        for op, kerr, bias in self._layers:
            w = kerr.shape[1]
            amps = op @ amps
            shots.append(np.abs(amps))
            amps = op @ _phase_mul(amps, kerr @ chi[pos : pos + w] + bias)
            pos += w
        return shots


class LinOptSimulator:
    """Baseline QONN: Clements meshes (output phases pinned to 0) and NS(pi) layers."""

    def __init__(self, net: LinOptQonn, photons: int):
        self.net = net
        self.basis = build_basis(net.modes, photons)
        t = self.basis.states.astype(float)
        aligned, offset = coupler_layers(self.basis)
        self._columns = []
        for c, pairs in enumerate(clements_columns(net.modes)):
            first = t[:, [i for i, _ in pairs]] if pairs else np.zeros((self.basis.dim, 0))
            self._columns.append((aligned if c % 2 == 0 else offset, first))
        self._ns = net.chi * _kerr(t).sum(axis=1)
        self.program = self._compile()

    def _compile(self) -> PhaseProgram:
        prog = PhaseProgram(self.basis.dim, coupler_csr(self.basis))
        step = self.net.per_interferometer
        for l in range(self.net.depth + 1):
            if l:
                prog.add(const=self._ns)
            pos = l * step
            for c, (_, first) in enumerate(self._columns):
                w = first.shape[1]
                if w == 0:
                    continue
                op = ALIGNED if c % 2 == 0 else OFFSET
                for half in (0, 1):
                    prog.add([(first[:, k], pos + 2 * k + half) for k in range(w)], op=op)
                pos += 2 * w
        return prog

    def interferometer_amps(self, amps: np.ndarray, theta: np.ndarray) -> np.ndarray:
        pos = 0
        for op, first in self._columns:
            w = first.shape[1]
            if w == 0:
                continue
            th = theta[pos : pos + 2 * w].reshape(w, 2)
            amps = op @ _phase_mul(amps, first @ th[:, 0])
            amps = op @ _phase_mul(amps, first @ th[:, 1])
            pos += 2 * w
        return amps

    def __call__(self, amps: np.ndarray, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.net.n_params,):
            raise ParameterCountError(f"expected {self.net.n_params} phases, got {theta.size}")
        return self.program(amps, theta)

    def reference_amps(self, amps: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Interferometer-by-interferometer numpy evaluation."""
        theta = np.asarray(theta, dtype=float)
        step = self.net.per_interferometer
        for l in range(self.net.depth + 1):
            if l:
                amps = _phase_mul(amps, self._ns)
            amps = self.interferometer_amps(amps, theta[l * step : (l + 1) * step])
        return amps

    def snapshots(self, amps: np.ndarray, theta: np.ndarray) -> list[np.ndarray]:
        step = self.net.per_interferometer
        shots = []
        for l in range(self.net.depth + 1):
            if l:
                shots.append(np.abs(amps))
                amps = _phase_mul(amps, self._ns)
            amps = self.interferometer_amps(amps, theta[l * step : (l + 1) * step])
        return shots


@lru_cache(maxsize=64)
def nmzi_simulator(mesh: NmziMesh, photons: int) -> NmziSimulator:
    return NmziSimulator(mesh, photons)


@lru_cache(maxsize=64)
def linopt_simulator(net: LinOptQonn, photons: int) -> LinOptSimulator:
    return LinOptSimulator(net, photons)


def _check_state(state: StateVector, modes: int) -> None:
    if state.basis.modes != modes:
        raise ValueError(f"state has {state.basis.modes} modes, network has {modes}")


def apply_core(state: StateVector, mesh: NmziMesh, chi: Sequence[float]) -> StateVector:
    _check_state(state, mesh.modes)
    sim = nmzi_simulator(mesh, state.basis.photons)
    return StateVector(state.basis, sim.core_amps(state.amps, chi))


def apply_qonn(state: StateVector, mesh: NmziMesh, chi: Sequence[float], theta: Sequence[float]) -> StateVector:
    """Input MZI corrections, the NMZI core, output corrections."""
    _check_state(state, mesh.modes)
    if mesh.modes != 2 * state.basis.photons:
        raise ValueError("the QONN acts on dual-rail inputs, M = 2N")
    sim = nmzi_simulator(mesh, state.basis.photons)
    return StateVector(state.basis, sim.qonn_amps(state.amps, chi, theta))


def apply_lo_qonn(state: StateVector, net: LinOptQonn, theta: Sequence[float]) -> StateVector:
    _check_state(state, net.modes)
    sim = linopt_simulator(net, state.basis.photons)
    return StateVector(state.basis, sim(state.amps, theta))


def lo_interferometer_matrix(theta_block: Sequence[float], modes: int) -> np.ndarray:
    """MxM transfer matrix of one baseline interferometer (output phases 0)."""
    from .optics import clements_mesh

    return clements_mesh(np.concatenate([np.asarray(theta_block, float), np.zeros(modes)]), modes)


def record_layer_amplitudes(
    state: StateVector, mesh: NmziMesh, chi: Sequence[float], theta: Sequence[float]
) -> list[np.ndarray]:
    _check_state(state, mesh.modes)
    sim = nmzi_simulator(mesh, state.basis.photons)
    return sim.snapshots(state.amps, chi, theta)


def record_lo_layer_amplitudes(state: StateVector, net: LinOptQonn, theta: Sequence[float]) -> list[np.ndarray]:
    sim = linopt_simulator(net, state.basis.photons)
    return sim.snapshots(state.amps, np.asarray(theta, float))
