"""Benchmark tasks: state preparation, Bell-state discrimination, Heisenberg VQE."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .fock import (
    BasisMismatchError,
    DegenerateProjectionError,
    StateVector,
    build_basis,
    embed_qubit_state,
    encode_dualrail,
    overlap,
    project_dualrail_amps,
)
from .network import LinOptQonn, NmziMesh, linopt_simulator, nmzi_simulator
from .optimizer import BoundedProblem

Network = Union[NmziMesh, LinOptQonn]
MAX_SPINS = 10


# ---------------------------------------------------------- state targets


def target_ghz(qubits: int, alpha: float) -> StateVector:
    """cos(alpha) |10>^N + sin(alpha) |01>^N on 2N modes."""
    basis = build_basis(2 * qubits, qubits)
    amps = np.zeros(2**qubits, dtype=complex)
    amps[0] = np.cos(alpha)
    amps[-1] = np.sin(alpha)
    return embed_qubit_state(amps, basis)


def haar_qubit_amps(qubits: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(2**qubits) + 1j * rng.standard_normal(2**qubits)
    return z / np.linalg.norm(z)


def target_haar_random(qubits: int, seed: int) -> StateVector:
    """Uniformly random qubit state (normalized complex Gaussian), dual-rail embedded."""
    amps = haar_qubit_amps(qubits, np.random.default_rng(seed))
    return embed_qubit_state(amps, build_basis(2 * qubits, qubits))


def fidelity(out: StateVector, target: StateVector) -> float:
    return abs(overlap(out, target)) ** 2


def fidelity_cost(out: StateVector, target: StateVector) -> float:
    return 1.0 - fidelity(out, target)


# ------------------------------------------------------- parameter spaces


def parameter_bounds(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """chi in [0, pi]; correction and interferometer phases in [0, 2 pi]."""
    if isinstance(net, NmziMesh):
        lower = np.zeros(net.n_params)
        upper = np.concatenate([np.full(net.n_chi, np.pi), np.full(net.n_theta, 2 * np.pi)])
        return lower, upper
    return np.zeros(net.n_params), np.full(net.n_params, 2 * np.pi)


def network_simulator(net: Network, photons: int):
    if isinstance(net, NmziMesh):
        return nmzi_simulator(net, photons)
    return linopt_simulator(net, photons)


def _correction_slots(net: Network) -> tuple[int, int] | None:
    if isinstance(net, NmziMesh) and net.corrections:
        return (net.n_chi, net.n_params)
    return None


class _NetworkObjective:
    """Picklable cost function; the simulator is rebuilt lazily in each process."""

    def __init__(self, net: Network, photons: int):
        self.net = net
        self.photons = photons

    @cached_property
    def sim(self):
        return network_simulator(self.net, self.photons)

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("sim", None)
        return state


class PreparationObjective(_NetworkObjective):
    def __init__(self, net: Network, target: StateVector, initial: StateVector | None = None):
        photons = target.basis.photons
        super().__init__(net, photons)
        if initial is None:
            initial = encode_dualrail("0" * photons, target.basis)
        if initial.basis != target.basis:
            raise BasisMismatchError("initial and target states differ in Fock space")
        self.initial = np.array(initial.amps)
        self.target = np.array(target.amps)

    def __call__(self, x: np.ndarray) -> float:
        out = self.sim(self.initial, x)
        return 1.0 - abs(np.vdot(self.target, out)) ** 2


def preparation_problem(net: Network, target: StateVector, **kw) -> BoundedProblem:
    lower, upper = parameter_bounds(net)
    return BoundedProblem(
        lower, upper, PreparationObjective(net, target), name="prepare",
        correction_slots=_correction_slots(net), **kw,
    )


# ---------------------------------------------------------- discrimination


@dataclass(frozen=True)
class DiscriminationSet:
    labels: tuple[str, ...]
    inputs: tuple[StateVector, ...]
    targets: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.labels)

    def input_matrix(self) -> np.ndarray:
        return np.stack([s.amps for s in self.inputs], axis=1)

    def target_indices(self) -> np.ndarray:
        basis = self.inputs[0].basis
        return np.array([basis.lookup(t) for t in self.targets])


def discrimination_set(size: int = 4) -> DiscriminationSet:
    """Bell states (and optionally Theta+-) paired with their output Fock states."""
    if size not in (4, 6):
        raise ValueError("discrimination sets have 4 or 6 states")
    basis = build_basis(4, 2)
    r = 1 / np.sqrt(2)

    def pair(a, b, sign):
        return StateVector.from_dict(basis, {a: r, b: sign * r})

    entries = [
        ("Phi+", pair((1, 0, 1, 0), (0, 1, 0, 1), +1), (1, 0, 1, 0)),
        ("Phi-", pair((1, 0, 1, 0), (0, 1, 0, 1), -1), (1, 0, 0, 1)),
        ("Psi+", pair((1, 0, 0, 1), (0, 1, 1, 0), +1), (0, 1, 1, 0)),
        ("Psi-", pair((1, 0, 0, 1), (0, 1, 1, 0), -1), (0, 1, 0, 1)),
        ("Theta+", pair((0, 0, 1, 1), (1, 1, 0, 0), +1), (0, 0, 1, 1)),
        ("Theta-", pair((0, 0, 1, 1), (1, 1, 0, 0), -1), (1, 1, 0, 0)),
    ][:size]
    labels, inputs, targets = zip(*entries)
    return DiscriminationSet(labels, inputs, targets)


def discrimination_score(outputs: np.ndarray, target_idx: np.ndarray) -> float:
    """Mean probability that input j lands on its target Fock state (CF_disc)."""
    cols = np.arange(len(target_idx))
    return float(np.mean(np.abs(outputs[target_idx, cols]) ** 2))


class DiscriminationObjective(_NetworkObjective):
    def __init__(self, net: Network, dset: DiscriminationSet):
        super().__init__(net, 2)
        self.inputs = dset.input_matrix()
        self.target_idx = dset.target_indices()

    def __call__(self, x: np.ndarray) -> float:
        return 1.0 - discrimination_score(self.sim(self.inputs, x), self.target_idx)


def discrimination_cost(net: Network, x: Sequence[float], dset: DiscriminationSet) -> float:
    """1 - CF_disc for network ``net`` at parameters ``x``."""
    if net.modes != 4:
        raise ValueError("discrimination runs on four modes")
    return DiscriminationObjective(net, dset)(np.asarray(x, dtype=float))


def discrimination_problem(net: Network, dset: DiscriminationSet, **kw) -> BoundedProblem:
    lower, upper = parameter_bounds(net)
    return BoundedProblem(
        lower, upper, DiscriminationObjective(net, dset), name=f"discriminate-{dset.size}",
        correction_slots=_correction_slots(net), **kw,
    )


# ------------------------------------------------------------------ VQE

# default 5-spin fragment: chains (0,1,2) and (3,4), plus interchain bonds
INTRA_EDGES = ((0, 1), (1, 2), (3, 4))
INTER_EDGES = ((0, 3), (1, 3), (1, 4), (2, 4))

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class HeisenbergModel:
    spins: int
    edges: tuple[tuple[int, int, float], ...]
    fields: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(J)) for i, j, J in self.edges))
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        if len(self.fields) != self.spins:
            raise ValueError(f"{len(self.fields)} fields for {self.spins} spins")
        for i, j, _ in self.edges:
            if i == j:
                raise ValueError(f"self-loop on spin {i}")
            if not (0 <= i < self.spins and 0 <= j < self.spins):
                raise ValueError(f"edge ({i}, {j}) outside {self.spins} spins")

    def to_dict(self) -> dict:
        return {
            "spins": self.spins,
            "edges": [[i, j, J] for i, j, J in self.edges],
            "fields": list(self.fields),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "HeisenbergModel":
        return cls(int(d["spins"]), tuple(tuple(e) for e in d["edges"]), tuple(d["fields"]))

    @classmethod
    def from_json(cls, text: str) -> "HeisenbergModel":
        return cls.from_dict(json.loads(text))


def pauli_string(ops: dict[int, str], n: int) -> np.ndarray:
    """Kronecker product with spin 0 as the most significant factor."""
    return reduce(np.kron, [_PAULI[ops.get(k, "I")] for k in range(n)])


def build_hamiltonian(model: HeisenbergModel) -> np.ndarray:
    """H = -sum_<ij> J_ij (XX + YY + ZZ) - sum_i h_i X_i."""
    n = model.spins
    if n > MAX_SPINS:
        raise ValueError(f"{n} spins exceed the dense limit of {MAX_SPINS}")
    H = np.zeros((2**n, 2**n), dtype=complex)
    for i, j, J in model.edges:
        for p in "XYZ":
            H -= J * pauli_string({i: p, j: p}, n)
    for i, h in enumerate(model.fields):
        if h:
            H -= h * pauli_string({i: "X"}, n)
    return H


def exact_ground_energy(H: np.ndarray) -> float:
    if H.shape[0] > 2**MAX_SPINS:
        raise ValueError("matrix too large for dense diagonalization")
    return float(scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 0])[0])


def sample_lattice_model(
    seed: int,
    intra: Sequence[tuple[int, int]] = INTRA_EDGES,
    inter: Sequence[tuple[int, int]] = INTER_EDGES,
    spins: int = 5,
) -> HeisenbergModel:
    """J1 (intrachain), J2 (interchain) and each field h_i uniform on [0, 1]."""
    rng = np.random.default_rng(seed)
    j1, j2 = rng.random(2)
    fields = rng.random(spins)
    edges = [(i, j, j1) for i, j in intra] + [(i, j, j2) for i, j in inter]
    return HeisenbergModel(spins, tuple(edges), tuple(fields))


def expectation(qubit_amps: np.ndarray, H: np.ndarray) -> float:
    return float(np.vdot(qubit_amps, H @ qubit_amps).real)


class VqeObjective(_NetworkObjective):
    """Energy of the renormalized dual-rail part of the network output.

    Outputs with no code-space weight score the largest eigenvalue, the worst
    energy any normalized code state can have.
    """

    def __init__(self, net: Network, model: HeisenbergModel, initial: StateVector | None = None):
        super().__init__(net, model.spins)
        self.model = model
        self.H = build_hamiltonian(model)
        self.basis = build_basis(2 * model.spins, model.spins)
        if initial is None:
            initial = encode_dualrail("0" * model.spins, self.basis)
        self.initial = np.array(initial.amps)
        evals = scipy.linalg.eigvalsh(self.H)
        self.e_min, self.e_max = float(evals[0]), float(evals[-1])

    def energy(self, x: np.ndarray) -> float:
        out = self.sim(self.initial, x)
        psi, _ = project_dualrail_amps(out, self.basis)
        return expectation(psi, self.H)

    def __call__(self, x: np.ndarray) -> float:
        try:
            return self.energy(x)
        except DegenerateProjectionError:
            return self.e_max


def vqe_cost(net: Network, x: Sequence[float], model: HeisenbergModel) -> float:
    """E = <psi_dr|H|psi_dr>; raises DegenerateProjectionError on an empty code space."""
    if net.modes != 2 * model.spins:
        raise ValueError("VQE needs M = 2n modes")
    return VqeObjective(net, model).energy(np.asarray(x, dtype=float))


def vqe_problem(net: Network, model: HeisenbergModel, **kw) -> BoundedProblem:
    lower, upper = parameter_bounds(net)
    return BoundedProblem(
        lower, upper, VqeObjective(net, model), name="vqe",
        correction_slots=_correction_slots(net), **kw,
    )
