"""Quantum optical neural networks with programmable Kerr-type nonlinearities.

Fock-space simulation of meshes of nonlinear Mach-Zehnder interferometers,
a linear-optics programmed baseline, training tasks (state preparation,
Bell-state discrimination, VQE) and a derivative-free training pipeline.
"""

__version__ = "0.1.0"

from .fock import FockBasis, StateVector, build_basis, decode_dualrail, encode_dualrail, project_dualrail
from .network import LinOptQonn, NmziMesh, apply_core, apply_lo_qonn, apply_qonn, count_params, lo_depth
from .optimizer import BoundedProblem, TrainRecord, TrainResult, train

__all__ = [
    "FockBasis",
    "StateVector",
    "build_basis",
    "encode_dualrail",
    "decode_dualrail",
    "project_dualrail",
    "NmziMesh",
    "LinOptQonn",
    "apply_core",
    "apply_qonn",
    "apply_lo_qonn",
    "count_params",
    "lo_depth",
    "BoundedProblem",
    "TrainRecord",
    "TrainResult",
    "train",
]
