from .autograd import Var
from .gradcheck import finite_diff_gradient, max_relative_error
from .linalg import (
    DimensionError,
    NumericError,
    SvdResult,
    effective_rank,
    jacobi_svd,
    layer_norm,
    scaled_softmax,
    svd,
    truncate_rank,
    xavier_init,
)
from .params import Parameter, ParameterStore
from .rng import SeededRng

__all__ = [
    "DimensionError",
    "NumericError",
    "Parameter",
    "ParameterStore",
    "SeededRng",
    "SvdResult",
    "Var",
    "effective_rank",
    "finite_diff_gradient",
    "jacobi_svd",
    "layer_norm",
    "max_relative_error",
    "scaled_softmax",
    "svd",
    "truncate_rank",
    "xavier_init",
]
