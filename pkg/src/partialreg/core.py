"""Domain types shared across the package and deformation-model evaluation.

Point sets are stored row-major: a cloud of N points in D dimensions is an
``(N, D)`` float64 array. Deformation models are evaluated in row form,

    Yhat = Phi @ alpha + X @ L + beta

where ``L = S @ R`` for rotation/scaling models (the row-vector transcription
of ``x -> R^T S x``) and ``L = B`` for general linear models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


class ContractError(ValueError):
    """Raised when inputs violate a documented precondition."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_points(X, name: str = "points") -> np.ndarray:
    """Return ``X`` (a PointCloud or array-like) as a float64 ``(N, D)`` array."""
    if isinstance(X, PointCloud):
        return X.points
    a = np.asarray(X, dtype=np.float64)
    if a.ndim != 2:
        raise ContractError(f"{name} must be a 2-D array, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered set of distinct points with optional noise labels.

    Parameters
    ----------
    points : array_like, shape (N, D)
    noise : array_like of bool, shape (N,), optional
        ``True`` marks an outlier point.
    truth_map : array_like of int, shape (N,), optional
        Ground-truth correspondence into another cloud; ``-1`` marks points
        without a partner. Non-negative entries must be unique.
    """

    points: np.ndarray
    noise: np.ndarray | None = None
    truth_map: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ContractError(f"points must have shape (N>=1, D>=1), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ContractError("points contain non-finite coordinates")
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] != pts.shape[0]:
            raise ContractError(
                f"point cloud has {pts.shape[0] - uniq.shape[0]} duplicate point(s); "
                "points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))

        if self.noise is not None:
            lab = np.array(self.noise, dtype=bool, copy=True).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise ContractError("noise labels length does not match point count")
            object.__setattr__(self, "noise", _frozen(lab))

        if self.truth_map is not None:
            tm = np.array(self.truth_map, dtype=np.int64, copy=True).reshape(-1)
            if tm.shape[0] != pts.shape[0]:
                raise ContractError("truth_map length does not match point count")
            mapped = tm[tm >= 0]
            if np.unique(mapped).shape[0] != mapped.shape[0]:
                raise ContractError("truth_map is not injective")
            if np.any(tm < -1):
                raise ContractError("truth_map entries must be >= -1")
            object.__setattr__(self, "truth_map", _frozen(tm))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    @property
    def clean_mask(self) -> np.ndarray:
        if self.noise is None:
            return np.ones(self.n, dtype=bool)
        return ~self.noise

    def check_truth_against(self, n_target: int) -> None:
        if self.truth_map is not None and np.any(self.truth_map >= n_target):
            raise ContractError("truth_map points outside the paired cloud")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its parameter: ``gaussian`` (``sigma2``) or ``tps`` (``dim``)."""

    kind: str
    sigma2: float | None = None
    dim: int | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ContractError(f"gaussian kernel needs sigma2 > 0, got {self.sigma2}")
            object.__setattr__(self, "sigma2", float(self.sigma2))
        elif self.kind == "tps":
            if self.dim is None or int(self.dim) < 1:
                raise ContractError(f"tps kernel needs dim >= 1, got {self.dim}")
            object.__setattr__(self, "dim", int(self.dim))
        else:
            raise ContractError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma2: float) -> "KernelSpec":
        return cls("gaussian", sigma2=sigma2)

    @classmethod
    def tps(cls, dim: int) -> "KernelSpec":
        return cls("tps", dim=dim)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma2": self.sigma2}
        return {"kind": "tps", "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], sigma2=d.get("sigma2"), dim=d.get("dim"))


@dataclass(frozen=True, eq=False)
class DeformationModel:
    """Kernel expansion plus a linear part and a translation.

    Exactly one of ``(R, S)`` or ``B`` describes the linear part. ``R`` must be
    a proper rotation and ``S`` diagonal with positive entries.
    """

    kernel: KernelSpec
    control: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    R: np.ndarray | None = None
    S: np.ndarray | None = None
    B: np.ndarray | None = None

    def __post_init__(self):
        C = np.array(self.control, dtype=np.float64, copy=True)
        alpha = np.array(self.alpha, dtype=np.float64, copy=True)
        beta = np.array(self.beta, dtype=np.float64, copy=True).reshape(-1)
        D = beta.shape[0]
        if C.ndim != 2 or C.shape[1] != D:
            raise ContractError(f"control must be (K, {D}), got {C.shape}")
        if alpha.shape != C.shape:
            raise ContractError(f"alpha shape {alpha.shape} does not match control {C.shape}")
        object.__setattr__(self, "control", _frozen(C))
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "beta", _frozen(beta))

        if self.B is not None:
            if self.R is not None or self.S is not None:
                raise ContractError("give either (R, S) or B, not both")
            B = np.array(self.B, dtype=np.float64, copy=True)
            if B.shape != (D, D):
                raise ContractError(f"B must be ({D}, {D})")
            object.__setattr__(self, "B", _frozen(B))
            return

        R = np.eye(D) if self.R is None else np.array(self.R, dtype=np.float64, copy=True)
        S = np.eye(D) if self.S is None else np.array(self.S, dtype=np.float64, copy=True)
        if R.shape != (D, D) or S.shape != (D, D):
            raise ContractError(f"R and S must be ({D}, {D})")
        if not np.allclose(R.T @ R, np.eye(D), atol=1e-8) or abs(np.linalg.det(R) - 1.0) > 1e-8:
            raise ContractError("R is not a proper rotation")
        if np.any(S != np.diag(np.diag(S))) or np.any(np.diag(S) <= 0):
            raise ContractError("S must be diagonal with positive entries")
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "S", _frozen(S))

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    @property
    def linear_kind(self) -> str:
        return "general" if self.B is not None else "rotation_scaling"

    @property
    def linear(self) -> np.ndarray:
        """Row-form linear map ``L`` with ``Yhat = X @ L + ...``."""
        if self.B is not None:
            return self.B
        return self.S @ self.R

    @classmethod
    def identity(cls, kernel: KernelSpec, control, general: bool = False) -> "DeformationModel":
        C = np.asarray(control, dtype=np.float64)
        D = C.shape[1]
        if general:
            return cls(kernel, C, np.zeros_like(C), np.zeros(D), B=np.eye(D))
        return cls(kernel, C, np.zeros_like(C), np.zeros(D), R=np.eye(D), S=np.eye(D))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "kernel": self.kernel.to_dict(),
            "linear_kind": self.linear_kind,
            "control": self.control.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }
        if self.B is not None:
            d["B"] = self.B.tolist()
        else:
            d["R"] = self.R.tolist()
            d["S"] = self.S.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DeformationModel":
        kernel = KernelSpec.from_dict(d["kernel"])
        D = len(d["beta"])
        # empty arrays lose their trailing dimension in JSON
        control = np.asarray(d["control"], dtype=np.float64).reshape(-1, D)
        alpha = np.asarray(d["alpha"], dtype=np.float64).reshape(-1, D)
        if d.get("linear_kind") == "general" or "B" in d:
            return cls(kernel, control, alpha, d["beta"], B=d["B"])
        return cls(kernel, control, alpha, d["beta"], R=d["R"], S=d["S"])


def apply_deformation(model: DeformationModel, X, phi: np.ndarray | None = None) -> np.ndarray:
    """Evaluate ``model`` at every row of ``X``.

    ``phi`` may carry a precomputed kernel matrix ``kernel_matrix(X, model.control)``.
    """
    from .kernels import kernel_matrix

    Xa = as_points(X, "X")
    if Xa.shape[1] != model.dim:
        raise ContractError(f"X has dimension {Xa.shape[1]}, model has {model.dim}")
    out = Xa @ model.linear + model.beta
    if np.any(model.alpha):
        if phi is None:
            phi = kernel_matrix(Xa, model.control, model.kernel)
        phi = np.asarray(phi)
        if phi.shape != (Xa.shape[0], model.control.shape[0]):
            raise ContractError("precomputed kernel matrix has the wrong shape")
        out = out + phi @ model.alpha
    return out


@dataclass(eq=False)
class TransportPlan:
    """Sparse non-negative coupling between ``n_source`` and ``n_target`` points.

    Entries are stored in coordinate form. Every source and target carries
    unit mass, so row and column sums never exceed one.
    """

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    n_source: int
    n_target: int
    meta: dict = field(default_factory=dict)

    MARGINAL_TOL = 1e-9

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        self.cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        self.mass = np.asarray(self.mass, dtype=np.float64).reshape(-1)
        if not (self.rows.shape == self.cols.shape == self.mass.shape):
            raise ContractError("rows, cols and mass must have equal length")
        if self.mass.size and np.any(self.mass <= 0):
            raise ContractError("plan entries must be strictly positive")
        if self.rows.size and (self.rows.min() < 0 or self.rows.max() >= self.n_source
                               or self.cols.min() < 0 or self.cols.max() >= self.n_target):
            raise ContractError("plan index out of range")
        tol = 1.0 + self.MARGINAL_TOL
        if np.any(self.row_mass() > tol) or np.any(self.col_mass() > tol):
            raise ContractError("plan marginals exceed unit mass")

    @classmethod
    def from_dense(cls, gamma: np.ndarray, meta: dict | None = None) -> "TransportPlan":
        gamma = np.asarray(gamma, dtype=np.float64)
        r, c = np.nonzero(gamma > 0)
        return cls(r, c, gamma[r, c], gamma.shape[0], gamma.shape[1], meta=meta or {})

    @classmethod
    def from_pairs(cls, src, tgt, n_source: int, n_target: int) -> "TransportPlan":
        src = np.asarray(src, dtype=np.int64)
        return cls(src, tgt, np.ones(src.shape[0]), n_source, n_target)

    def to_dense(self) -> np.ndarray:
        g = np.zeros((self.n_source, self.n_target))
        np.add.at(g, (self.rows, self.cols), self.mass)
        return g

    def row_mass(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.mass, minlength=self.n_source)

    def col_mass(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.mass, minlength=self.n_target)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def cost(self, cost: np.ndarray) -> float:
        return float(np.dot(np.asarray(cost)[self.rows, self.cols], self.mass))

    def is_partial_bijection(self, atol: float = 1e-9) -> bool:
        if not np.allclose(self.mass, 1.0, atol=atol):
            return False
        return (np.unique(self.rows).size == self.rows.size
                and np.unique(self.cols).size == self.cols.size)

    def as_map(self) -> dict[int, int]:
        """Return the plan as ``{source: target}``; requires a partial bijection."""
        if not self.is_partial_bijection():
            raise ContractError("plan is not a partial bijection")
        return {int(r): int(c) for r, c in zip(self.rows, self.cols)}


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    matched: int
    lam: float | None
    wall_time: float
    displacement: float
    nonrigid: bool


@dataclass
class RegistrationReport:
    """Outcome of one registration run."""

    method: str
    model: DeformationModel
    per_iter: list[IterationRecord]
    converged_at: int | None
    final_error: float | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.per_iter)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "model": self.model.to_dict(),
            "per_iter": [vars(r) for r in self.per_iter],
            "converged_at": self.converged_at,
            "final_error": self.final_error,
            "flags": list(self.flags),
        }
