"""Reference-frame-independent QKD with reduced state sets.

Library layout:

* :mod:`rfiqkd.qubits`    -- Pauli algebra, basis states, binary entropy
* :mod:`rfiqkd.sdp`       -- interior-point solver over two-qubit states
* :mod:`rfiqkd.bounds`    -- protocol constraint systems, C bounds, key rates
* :mod:`rfiqkd.channel`   -- misalignment/detection models, simulated counts
* :mod:`rfiqkd.finitekey` -- decoy-state finite-key estimation chain
* :mod:`rfiqkd.keyrates`  -- end-to-end rate pipelines (single photon / WCS)
* :mod:`rfiqkd.optimize`  -- protocol-parameter optimization
* :mod:`rfiqkd.cli`       -- batch command-line front end
"""

from rfiqkd.qubits import binary_entropy, eigenstate, pauli, tensor
from rfiqkd.sdp import (
    ConicProblem,
    LinearObjective,
    QuadraticObjective,
    SolveReport,
    SolverError,
    solve_linear,
    solve_min_sum_squares,
)

__all__ = [
    "binary_entropy",
    "eigenstate",
    "pauli",
    "tensor",
    "ConicProblem",
    "LinearObjective",
    "QuadraticObjective",
    "SolveReport",
    "SolverError",
    "solve_linear",
    "solve_min_sum_squares",
]

__version__ = "0.1.0"
