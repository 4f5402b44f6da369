"""Baselines that BEETLE is compared against."""

from .gp import GpNumericalError, GpTransferModel, gp_fit, gp_transfer, pearson, se_kernel
from .nontransfer import non_transfer
from .sobol import SobolSampler, sobol_rows
from .linear import DegenerateRegressionError, LinearTransferModel, PairingError, fit_line, linear_fit, linear_transfer

__all__ = [
    "DegenerateRegressionError",
    "GpNumericalError",
    "GpTransferModel",
    "LinearTransferModel",
    "PairingError",
    "SobolSampler",
    "fit_line",
    "gp_fit",
    "gp_transfer",
    "non_transfer",
    "pearson",
    "se_kernel",
    "sobol_rows",
    "linear_fit",
    "linear_transfer",
]
