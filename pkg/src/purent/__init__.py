"""Single-copy local-purity distillation figures of merit and geometric
entanglement bounds under Gibbs-preserving LOCC with degenerate Hamiltonians."""

from purent.linalg import (
    DimList,
    HermitianOp,
    PureState,
    basis_state,
    eigh,
    fidelity,
    identity,
    partial_trace,
    partial_transpose,
    real_embed,
    schmidt,
    tensor,
)

__version__ = "0.1.0"

__all__ = [
    "DimList",
    "HermitianOp",
    "PureState",
    "basis_state",
    "eigh",
    "fidelity",
    "identity",
    "partial_trace",
    "partial_transpose",
    "real_embed",
    "schmidt",
    "tensor",
    "__version__",
]
