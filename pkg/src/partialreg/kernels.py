"""Gaussian and thin-plate-spline kernels and kernel-matrix assembly."""

from __future__ import annotations

import numpy as np

from .core import ContractError, KernelSpec, as_points


def sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, exact zero for coincident rows."""
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gaussian_kernel(x, c, sigma2: float) -> float:
    """``exp(-||c - x||^2 / sigma2)``."""
    if not sigma2 > 0:
        raise ContractError(f"sigma2 must be positive, got {sigma2}")
    d = np.asarray(c, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    return float(np.exp(-np.dot(d, d) / sigma2))


def _tps_radial(r2: np.ndarray, dim: int) -> np.ndarray:
    # r2 holds squared distances; value at r = 0 is the continuous limit 0
    out = np.zeros_like(r2)
    pos = r2 > 0
    if dim == 2:
        out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    elif dim == 3:
        out[pos] = np.sqrt(r2[pos])
    else:
        out[pos] = r2[pos] * np.log(r2[pos])
    return out


def tps_kernel(x, c, dim: int) -> float:
    """Thin-plate-spline radial function.

    ``r^2 ln r`` for ``dim == 2``, ``r`` for ``dim == 3`` and the regularised
    ``r^2 ln(r^2)`` for ``dim >= 4``; zero at ``x == c``.
    """
    if dim < 2:
        raise ContractError(f"tps kernel needs dim >= 2, got {dim}")
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != c.shape or x.shape[-1] != dim:
        raise ContractError("point dimension does not match kernel dim")
    d = x - c
    return float(_tps_radial(np.array([np.dot(d, d)]), dim)[0])


def kernel_matrix(X, C, spec: KernelSpec) -> np.ndarray:
    """Return ``Phi`` with ``Phi[n, k] = kernel(x^n, c^k)``, shape ``(N, K)``."""
    Xa = as_points(X, "X")
    Ca = as_points(C, "C")
    if Xa.shape[1] != Ca.shape[1]:
        raise ContractError(f"X has dimension {Xa.shape[1]} but C has {Ca.shape[1]}")
    r2 = sq_dists(Xa, Ca)
    if spec.kind == "gaussian":
        return np.exp(-r2 / spec.sigma2)
    if spec.dim != Xa.shape[1]:
        raise ContractError(f"tps kernel built for dim {spec.dim}, data has {Xa.shape[1]}")
    if spec.dim < 2:
        raise ContractError("tps kernel needs dim >= 2")
    return _tps_radial(r2, spec.dim)
