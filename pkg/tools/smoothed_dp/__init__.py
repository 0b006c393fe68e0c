"""Differentiable dynamic programming with smoothed max operators."""

from .dag import Dag, ExpectedPath, dp_grad, dp_hessian_product, dp_value
from .dtw import dtw_grad, dtw_hessian_product, dtw_value, hard_dtw
from .errors import SmoothedDPError
from .models import Regularizer
from .smoothed_max import grad_max_omega, hess_vec, max_omega
from .viterbi import viterbi_grad, viterbi_hessian_product, viterbi_value

__all__ = [
    "Dag",
    "ExpectedPath",
    "Regularizer",
    "SmoothedDPError",
    "dp_grad",
    "dp_hessian_product",
    "dp_value",
    "dtw_grad",
    "dtw_hessian_product",
    "dtw_value",
    "grad_max_omega",
    "hard_dtw",
    "hess_vec",
    "max_omega",
    "viterbi_grad",
    "viterbi_hessian_product",
    "viterbi_value",
]
