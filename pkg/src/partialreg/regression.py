"""Parameter updates for a fixed correspondence.

* scaled Procrustes: rotation ``R``, diagonal scaling ``S`` and translation
  ``beta`` minimising ``||X S R + 1 beta^T - Y'||^2``;
* ridge regression of the RBF coefficients ``alpha``;
* thin-plate-spline regression through the QR null-space parametrisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .core import ContractError

RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Matched rows ``(x^n, yhat^n)`` for ``n`` in ``indices``."""

    X_sub: np.ndarray
    Yhat_sub: np.ndarray
    Phi_sub: np.ndarray | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X_sub, dtype=np.float64)
        Y = np.asarray(self.Yhat_sub, dtype=np.float64)
        if X.ndim != 2 or X.shape != Y.shape or X.shape[0] < 1:
            raise ContractError(f"X_sub {X.shape} and Yhat_sub {Y.shape} must match, N_sub >= 1")
        if self.Phi_sub is not None and np.shape(self.Phi_sub)[0] != X.shape[0]:
            raise ContractError("Phi_sub row count differs from X_sub")
        object.__setattr__(self, "X_sub", X)
        object.__setattr__(self, "Yhat_sub", Y)

    @classmethod
    def from_indices(cls, X, Yhat, Phi, indices) -> "CorrespondenceSet":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(X[idx], Yhat[idx], None if Phi is None else Phi[idx], idx)


def _oriented_svd(H):
    U, s, Vt = np.linalg.svd(H)
    # make the largest-magnitude entry of each left singular vector positive
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, s, Vt * signs[:, None]


def fit_rotation(Xc_scaled, Yc) -> tuple[np.ndarray, bool]:
    """Rotation minimising ``||Xc_scaled @ R - Yc||_F`` over ``SO(D)``.

    Returns ``(R, degenerate)``; ``degenerate`` is set when the cross-covariance
    has rank below ``D - 1`` and the optimum is not unique.
    """
    A = np.asarray(Xc_scaled, dtype=np.float64)
    B = np.asarray(Yc, dtype=np.float64)
    if A.shape != B.shape:
        raise ContractError(f"shape mismatch {A.shape} vs {B.shape}")
    D = A.shape[1]
    H = A.T @ B
    U, s, Vt = _oriented_svd(H)
    d = 1.0 if np.linalg.det(U @ Vt) > 0 else -1.0
    corr = np.ones(D)
    corr[-1] = d
    R = (U * corr) @ Vt
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > RANK_RTOL * top)) if top > 0 else 0
    return R, rank < D - 1


def fit_scaling(Xc, Yc, R, uniform: bool = False,
                uniform_rule: str = "cov") -> tuple[np.ndarray, list[int]]:
    """Diagonal scaling for fixed ``R``.

    Per axis ``s_d = sum_i x_c[i, d] (y_c^i R^T)[d] / sum_i x_c[i, d]^2``.
    With ``uniform`` the result is ``s I`` where ``s`` is the mean of the
    per-axis values (``uniform_rule="mean"``) or the root ratio of total
    variances (``"cov"``).

    Returns ``(S, flagged_axes)``. Axes with a vanishing denominator are
    fixed to 1 and non-positive estimates are floored at ``1e-8``; both are
    flagged.
    """
    Xc = np.asarray(Xc, dtype=np.float64)
    Yc = np.asarray(Yc, dtype=np.float64)
    D = Xc.shape[1]
    flagged: list[int] = []
    if uniform and uniform_rule == "cov":
        vx = float((Xc ** 2).sum())
        if vx <= 0:
            return np.eye(D), list(range(D))
        return np.sqrt(float((Yc ** 2).sum()) / vx) * np.eye(D), []
    if uniform and uniform_rule != "mean":
        raise ContractError(f"unknown uniform_rule {uniform_rule!r}")

    den = (Xc ** 2).sum(axis=0)
    num = (Xc * (Yc @ R.T)).sum(axis=0)
    s = np.ones(D)
    scale = den.max() if den.size else 0.0
    for d in range(D):
        if den[d] <= RANK_RTOL * scale or den[d] == 0:
            flagged.append(d)
            continue
        s[d] = num[d] / den[d]
        if s[d] <= 0:
            s[d] = 1e-8
            flagged.append(d)
    if uniform:
        s[:] = s.mean()
    return np.diag(s), flagged


def fit_translation(Yhat_prime, X_sub, S, R) -> np.ndarray:
    """``beta = mean_n (yhat'^n - R^T S x^n)``."""
    Yp = np.asarray(Yhat_prime, dtype=np.float64)
    X = np.asarray(X_sub, dtype=np.float64)
    return (Yp - X @ S @ R).mean(axis=0)


@dataclass
class RigidFit:
    R: np.ndarray
    S: np.ndarray
    beta: np.ndarray
    n_inner: int
    degenerate: bool = False
    flagged_axes: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)


def fit_rigid(corr: CorrespondenceSet, alpha=None, scaling: str = "per_axis",
              S0=None, uniform_rule: str = "cov", max_inner: int = 50,
              tol: float = 1e-10) -> RigidFit:
    """Rotation, scaling and translation for the residual ``Yhat_sub - Phi_sub alpha``.

    ``scaling`` is ``"fixed"`` (``S = I``), ``"uniform"`` or ``"per_axis"``.
    Per-axis scaling alternates rotation and scaling updates, starting from
    ``S0`` (identity by default), until the Frobenius change of ``(R, S)``
    drops below ``tol`` or ``max_inner`` rounds have run.
    """
    X = corr.X_sub
    Yp = corr.Yhat_sub
    if alpha is not None and corr.Phi_sub is not None and np.any(alpha):
        Yp = Yp - corr.Phi_sub @ alpha
    Xc = X - X.mean(axis=0)
    Yc = Yp - Yp.mean(axis=0)
    D = X.shape[1]

    if scaling == "fixed":
        S = np.eye(D)
        R, degenerate = fit_rotation(Xc, Yc)
        fit = RigidFit(R, S, None, 1, degenerate)
    elif scaling == "uniform":
        R, degenerate = fit_rotation(Xc, Yc)
        S, flagged = fit_scaling(Xc, Yc, R, uniform=True, uniform_rule=uniform_rule)
        fit = RigidFit(R, S, None, 1, degenerate, flagged)
    elif scaling == "per_axis":
        S = np.eye(D) if S0 is None else np.asarray(S0, dtype=np.float64)
        R = np.eye(D)
        objective = []
        degenerate = False
        flagged: list[int] = []
        k = 0
        for k in range(1, max_inner + 1):
            R_new, degenerate = fit_rotation(Xc @ S, Yc)
            S_new, flagged = fit_scaling(Xc, Yc, R_new)
            change = np.linalg.norm(R_new - R) + np.linalg.norm(S_new - S)
            R, S = R_new, S_new
            objective.append(float(((Xc @ S @ R - Yc) ** 2).sum()))
            if change < tol:
                break
        fit = RigidFit(R, S, None, k, degenerate, flagged, objective)
    else:
        raise ContractError(f"unknown scaling mode {scaling!r}")
    fit.beta = fit_translation(Yp, X, fit.S, fit.R)
    return fit


def fit_rbf_alpha(Phi_sub, Yhat_dprime, epsilon: float) -> np.ndarray:
    """Ridge solution ``(Phi^T Phi + eps I)^-1 Phi^T Y''`` via a Cholesky solve.

    When there are fewer rows than control points the equivalent
    ``Phi^T (Phi Phi^T + eps I)^-1 Y''`` form is used.
    """
    if not epsilon > 0:
        raise ContractError(f"epsilon must be positive for RBF ridge regression, got {epsilon}")
    Phi = np.asarray(Phi_sub, dtype=np.float64)
    Y = np.asarray(Yhat_dprime, dtype=np.float64)
    n, K = Phi.shape
    if n >= K:
        G = Phi.T @ Phi
        G[np.diag_indices_from(G)] += epsilon
        return cho_solve(cho_factor(G), Phi.T @ Y)
    G = Phi @ Phi.T
    G[np.diag_indices_from(G)] += epsilon
    return Phi.T @ cho_solve(cho_factor(G), Y)


def fit_tps(X, Yhat, Phi, epsilon: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Thin-plate-spline regression with control points ``X``.

    Solves ``Yhat = (Phi + eps I) alpha + Xbar Bbar`` subject to
    ``Xbar^T alpha = 0`` with ``Xbar = [1, X]``, using the QR factorisation
    ``Xbar = [Q1 Q2] [Rq; 0]``:

        alpha = Q2 (Q2^T (Phi + eps I) Q2)^-1 Q2^T Yhat
        Bbar  = Rq^-1 Q1^T (Yhat - (Phi + eps I) alpha)

    Returns ``alpha`` (N, D) and ``Bbar`` (D+1, D) whose first row is the
    translation and whose remaining rows form the row-form linear map ``B``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Yhat, dtype=np.float64)
    Phi = np.asarray(Phi, dtype=np.float64)
    if epsilon < 0:
        raise ContractError(f"epsilon must be >= 0, got {epsilon}")
    N, D = X.shape
    if Y.shape[0] != N or Phi.shape != (N, N):
        raise ContractError("fit_tps needs Yhat with N rows and a square N x N kernel matrix")
    if N < D + 1:
        raise ContractError(f"fit_tps needs at least D + 1 = {D + 1} points, got {N}")
    Xbar = np.hstack([np.ones((N, 1)), X])
    Q, Rfull = np.linalg.qr(Xbar, mode="complete")
    Rq = Rfull[:D + 1]
    diag = np.abs(np.diag(Rq))
    if diag.min() <= RANK_RTOL * diag.max():
        raise ContractError("source points are affinely degenerate (collinear or coplanar); "
                            "[1, X] does not have full column rank")
    Q1, Q2 = Q[:, :D + 1], Q[:, D + 1:]
    A = Phi.copy()
    A[np.diag_indices_from(A)] += epsilon
    if Q2.shape[1]:
        inner = Q2.T @ A @ Q2
        alpha = Q2 @ np.linalg.solve(inner, Q2.T @ Y)
    else:
        alpha = np.zeros_like(Y)
    Bbar = solve_triangular(Rq, Q1.T @ (Y - A @ alpha))
    return alpha, Bbar
