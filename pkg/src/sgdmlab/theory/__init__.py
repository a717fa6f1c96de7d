"""Coefficient sequences, pathwise identities, and Monte Carlo bound checks."""

from .coefficients import (
    CoefficientSet,
    c_sequence_multistage,
    c_sequence_nonconvex,
    choose_horizon,
    dev_coeffs_a,
    dev_coeffs_a_prime,
    multistage_dev_coeffs,
    multistage_weights_b,
    scvx_constants,
)
from .identities import (
    aux_z_fixed,
    aux_z_multistage,
    check_deviation_pathwise,
    ema_direct,
    lyapunov_values,
    reconstruct_x_from_z,
    z_increment_residuals,
)
from .montecarlo import (
    bound_theorem1,
    bound_theorem2,
    bound_theorem3,
    corollary_rate,
    mc_descent_check,
    mc_momentum_variance,
    mc_theorem1_check,
    mc_theorem2_check,
    mc_theorem3_check,
)
from .report import CheckResult, DiagnosticsReport

__all__ = [
    "CheckResult",
    "CoefficientSet",
    "DiagnosticsReport",
    "aux_z_fixed",
    "aux_z_multistage",
    "bound_theorem1",
    "bound_theorem2",
    "bound_theorem3",
    "c_sequence_multistage",
    "c_sequence_nonconvex",
    "check_deviation_pathwise",
    "choose_horizon",
    "corollary_rate",
    "dev_coeffs_a",
    "dev_coeffs_a_prime",
    "ema_direct",
    "lyapunov_values",
    "mc_descent_check",
    "mc_momentum_variance",
    "mc_theorem1_check",
    "mc_theorem2_check",
    "mc_theorem3_check",
    "multistage_dev_coeffs",
    "multistage_weights_b",
    "reconstruct_x_from_z",
    "scvx_constants",
    "z_increment_residuals",
]
