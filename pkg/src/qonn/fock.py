"""N-photon, M-mode Fock space: basis enumeration, state vectors, dual-rail codec."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIMENSION_CAP = 200_000
NORM_TOL = 1e-12
DEGENERATE_WEIGHT = 1e-14


class DimensionOverflowError(ValueError):
    """Requested Fock space exceeds the configured dimension cap."""


class BasisMismatchError(ValueError):
    pass


class DegenerateProjectionError(ValueError):
    """State has (numerically) no weight inside the dual-rail subspace."""


def fock_dimension(modes: int, photons: int) -> int:
    return comb(modes + photons - 1, photons)


def _occupations(modes: int, photons: int):
    # lexicographic descending: first mode holds as many photons as possible first
    if modes == 1:
        yield (photons,)
        return
    for first in range(photons, -1, -1):
        for rest in _occupations(modes - 1, photons - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class FockBasis:
    modes: int
    photons: int
    states: np.ndarray = field(repr=False)
    index: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FockBasis)
            and self.modes == other.modes
            and self.photons == other.photons
        )

    def __hash__(self) -> int:
        return hash((self.modes, self.photons))

    def lookup(self, occupation: Iterable[int]) -> int:
        return self.index[tuple(int(t) for t in occupation)]


@lru_cache(maxsize=64)
def _cached_basis(modes: int, photons: int) -> FockBasis:
    states = np.array(list(_occupations(modes, photons)), dtype=np.int64)
    states = states.reshape(-1, modes)
    states.setflags(write=False)
    index = {tuple(int(t) for t in s): i for i, s in enumerate(states)}
    return FockBasis(modes, photons, states, index)


def build_basis(modes: int, photons: int, cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Enumerate all occupation vectors of ``photons`` photons in ``modes`` modes.

    Ordering is lexicographic descending, so ``(N, 0, ..., 0)`` comes first and
    ``(0, ..., 0, N)`` last. Bases are cached and shared; they are immutable.
    """
    if modes < 1:
        raise ValueError(f"need at least one mode, got {modes}")
    if photons < 0:
        raise ValueError(f"photon number must be non-negative, got {photons}")
    dim = fock_dimension(modes, photons)
    if dim > cap:
        raise DimensionOverflowError(
            f"dim H(M={modes}, N={photons}) = {dim} exceeds cap {cap}"
        )
    return _cached_basis(modes, photons)


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: FockBasis
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise BasisMismatchError(
                f"amplitude array of shape {amps.shape} does not fit basis of dim {self.basis.dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_occupation(cls, basis: FockBasis, occupation: Sequence[int]) -> "StateVector":
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.lookup(occupation)] = 1.0
        return cls(basis, amps)

    @classmethod
    def from_dict(cls, basis: FockBasis, terms: dict) -> "StateVector":
        """Build from ``{occupation: amplitude}``; the result is normalized."""
        amps = np.zeros(basis.dim, dtype=complex)
        for occ, c in terms.items():
            amps[basis.lookup(occ)] += c
        return cls(basis, amps).normalized()

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amps / nrm)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return complex(self.amps[self.basis.lookup(occupation)])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def to_records(self) -> list[dict]:
        return [
            {"occupation": [int(t) for t in occ], "re": float(c.real), "im": float(c.imag)}
            for occ, c in zip(self.basis.states, self.amps)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_records(cls, records: list[dict]) -> "StateVector":
        if not records:
            raise ValueError("empty amplitude dump")
        occs = [tuple(r["occupation"]) for r in records]
        basis = build_basis(len(occs[0]), int(sum(occs[0])))
        amps = np.zeros(basis.dim, dtype=complex)
        for occ, r in zip(occs, records):
            amps[basis.lookup(occ)] = complex(r["re"], r["im"])
        return cls(basis, amps)

    @classmethod
    def from_json(cls, text: str) -> "StateVector":
        return cls.from_records(json.loads(text))


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product <a|b>."""
    if a.basis != b.basis:
        raise BasisMismatchError("states live in different Fock spaces")
    return complex(np.vdot(a.amps, b.amps))


# ---------------------------------------------------------------- dual rail


def _check_dualrail_basis(basis: FockBasis, qubits: int | None = None) -> int:
    if basis.modes != 2 * basis.photons:
        raise BasisMismatchError(
            f"dual-rail needs M = 2N, got M={basis.modes}, N={basis.photons}"
        )
    if qubits is not None and qubits != basis.photons:
        raise BasisMismatchError(f"{qubits} qubits do not fit a basis with N={basis.photons}")
    return basis.photons


def dualrail_occupation(bits: Sequence[int] | str) -> tuple[int, ...]:
    """Qubit q sits on modes (2q, 2q+1); bit 0 puts the photon in the first one."""
    occ = []
    for b in bits:
        b = int(b)
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        occ.extend((1, 0) if b == 0 else (0, 1))
    return tuple(occ)


def decode_dualrail(occupation: Sequence[int]) -> str:
    occ = tuple(int(t) for t in occupation)
    if len(occ) % 2:
        raise ValueError("odd number of modes")
    bits = []
    for q in range(len(occ) // 2):
        pair = occ[2 * q : 2 * q + 2]
        if pair == (1, 0):
            bits.append("0")
        elif pair == (0, 1):
            bits.append("1")
        else:
            raise ValueError(f"occupation {occ} is outside the dual-rail code space")
    return "".join(bits)


@lru_cache(maxsize=64)
def _dualrail_indices(basis: FockBasis) -> np.ndarray:
    n = basis.photons
    idx = np.array(
        [basis.lookup(dualrail_occupation(format(k, f"0{n}b") if n else "")) for k in range(2**n)],
        dtype=np.int64,
    )
    idx.setflags(write=False)
    return idx


def dualrail_indices(basis: FockBasis) -> np.ndarray:
    """Basis positions of the 2^N code words, qubit 1 being the most significant bit."""
    _check_dualrail_basis(basis)
    return _dualrail_indices(basis)


def encode_dualrail(bits: Sequence[int] | str, basis: FockBasis) -> StateVector:
    _check_dualrail_basis(basis, len(bits))
    return StateVector.from_occupation(basis, dualrail_occupation(bits))


def embed_qubit_state(qubit_amps: np.ndarray, basis: FockBasis) -> StateVector:
    """Place a 2^N qubit vector onto the dual-rail code words of ``basis``."""
    n = _check_dualrail_basis(basis)
    qubit_amps = np.asarray(qubit_amps, dtype=complex)
    if qubit_amps.shape != (2**n,):
        raise BasisMismatchError(f"expected {2**n} qubit amplitudes, got {qubit_amps.shape}")
    amps = np.zeros(basis.dim, dtype=complex)
    amps[dualrail_indices(basis)] = qubit_amps
    return StateVector(basis, amps)


def project_dualrail_amps(amps: np.ndarray, basis: FockBasis) -> tuple[np.ndarray, float]:
    sub = np.asarray(amps)[dualrail_indices(basis)]
    weight = float(np.vdot(sub, sub).real)
    if weight < DEGENERATE_WEIGHT:
        raise DegenerateProjectionError(f"dual-rail weight {weight:.3e} below {DEGENERATE_WEIGHT}")
    return sub / np.sqrt(weight), weight


def project_dualrail(state: StateVector) -> tuple[np.ndarray, float]:
    """Renormalized restriction to the code space and the weight it carried.

    Returns the 2^N qubit amplitude vector (big-endian qubit order) and the
    squared norm of the dual-rail component before renormalization.
    """
    return project_dualrail_amps(state.amps, state.basis)
