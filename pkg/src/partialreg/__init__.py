"""Non-rigid point-cloud registration with optimal partial transport."""

from .core import (ContractError, DeformationModel, IterationRecord, KernelSpec, PointCloud,
                   RegistrationReport, TransportPlan, apply_deformation)
from .kernels import gaussian_kernel, kernel_matrix, tps_kernel
from .pipelines import (Method, RegistrationConfig, register, register_balanced_baselines,
                        register_opt_rbf, register_opt_tps, register_sopt_rbf,
                        register_sopt_tps, register_tps_rpm_new)

__all__ = [
    "ContractError", "DeformationModel", "IterationRecord", "KernelSpec", "Method", "PointCloud",
    "RegistrationConfig", "RegistrationReport", "TransportPlan", "apply_deformation",
    "gaussian_kernel", "kernel_matrix", "register", "register_balanced_baselines",
    "register_opt_rbf", "register_opt_tps", "register_sopt_rbf", "register_sopt_tps",
    "register_tps_rpm_new", "tps_kernel",
]
