"""Exact decomposition of ReLU networks into local linear models."""

__version__ = "0.1.0"

from .linalg import ShapeError, hadamard, kron, tucker_contract, tucker_matrix, unvec, vec
from .networks import (
    ActivationPattern,
    FeedforwardNetwork,
    GcnNetwork,
    MultiplicativeLayer,
    TensorNetwork,
    forward,
    pattern_of,
)
from .regions import enumerate_regions, membership, region_halfspaces
from .shap import masked_input, shap_bruteforce, shap_global, shap_local
from .surrogate import build_mrt, export_theory, mrt_eval, parse_theory
from .unwrap import (
    LocalLinearModel,
    decompose_multiplicative,
    unwrap,
    unwrap_feedforward,
    unwrap_gcn,
    unwrap_tensor,
)
