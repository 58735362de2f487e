"""Exact solvers for balanced OT and mass-constrained partial OT.

Unit point masses make both problems integral: after integer scaling the
balanced problem and the reservoir extension of the partial problem are
transportation problems whose optimal vertices are (replicated) assignments.
Square instances are handed to ``scipy.optimize.linear_sum_assignment``;
unequal balanced instances are expanded by replication when that stays
small and otherwise solved as a sparse LP with HiGHS.
"""

from __future__ import annotations

from math import gcd

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from ..core import ContractError, TransportPlan

# largest replicated assignment size before switching to the LP backend
_MAX_EXPANDED = 2500


def _check_cost(cost) -> np.ndarray:
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] < 1 or C.shape[1] < 1:
        raise ContractError(f"cost must be a non-empty 2-D matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ContractError("cost matrix has non-finite entries")
    if np.any(C < 0):
        raise ContractError("cost matrix has negative entries")
    return C


def sq_euclidean_cost(A, B) -> np.ndarray:
    """Squared Euclidean cost matrix between the rows of ``A`` and ``B``."""
    from ..kernels import sq_dists

    return sq_dists(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64))


def solve_transport_lp(cost, a, b) -> np.ndarray:
    """Dense optimal plan of the transportation problem with marginals ``a``, ``b``.

    Solved with the HiGHS dual simplex so the result is a vertex.
    """
    C = np.asarray(cost, dtype=np.float64)
    n, m = C.shape
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    rows_op = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols_op = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A_eq = sparse.vstack([rows_op, cols_op]).tocsr()
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    x = res.x.reshape(n, m)
    x[x < 1e-12] = 0.0
    return x


def certify_optimality(cost, gamma, eps: float | None = None,
                       max_sweeps: int | None = None) -> tuple[bool, float]:
    """Check a transportation plan for ``eps``-complementary slackness.

    Dual potentials are built by Bellman-Ford relaxation on the residual
    graph (forward arcs ``i -> j`` at cost ``c_ij``, backward arcs ``j -> i``
    at ``-c_ij`` on the support). The plan is optimal iff the relaxation
    settles, i.e. there is no negative residual cycle.

    Returns
    -------
    ok : bool
    violation : float
        Largest negative reduced cost (0 when all reduced costs are >= -eps).
    """
    C = np.asarray(cost, dtype=np.float64)
    G = np.asarray(gamma, dtype=np.float64)
    n, m = C.shape
    if eps is None:
        eps = 1e-9 * max(float(C.max()), 1.0)
    support = G > 0
    back = np.where(support, -C, np.inf)
    du = np.zeros(n)
    dv = np.zeros(m)
    sweeps = max_sweeps or (n + m + 2)
    for _ in range(sweeps):
        new_dv = np.minimum(dv, (du[:, None] + C).min(axis=0))
        new_du = np.minimum(du, (new_dv[None, :] + back).min(axis=1))
        changed = np.any(new_dv < dv - eps) or np.any(new_du < du - eps)
        du, dv = new_du, new_dv
        if not changed:
            break
    reduced = C + du[:, None] - dv[None, :]
    worst = float(min(reduced.min(), 0.0))
    on_support = np.abs(reduced[support]).max() if support.any() else 0.0
    ok = worst >= -eps * (n + m) and on_support <= eps * (n + m)
    return bool(ok), -worst


def solve_balanced_ot(cost, certify: bool = False) -> tuple[TransportPlan, float]:
    """Exact balanced OT between uniform clouds of sizes ``N`` and ``M``.

    Total mass is ``min(N, M)``: every row carries ``min(N, M) / N`` and every
    column ``min(N, M) / M``, so for ``N == M`` the optimum is a permutation.
    """
    C = _check_cost(cost)
    n, m = C.shape
    total = min(n, m)
    if n == m:
        r, c = linear_sum_assignment(C)
        gamma = np.zeros_like(C)
        gamma[r, c] = 1.0
    else:
        g = gcd(n, m)
        rep_s, rep_t = m // g, n // g
        units = n * rep_s
        if units <= _MAX_EXPANDED:
            big = np.repeat(np.repeat(C, rep_s, axis=0), rep_t, axis=1)
            r, c = linear_sum_assignment(big)
            counts = np.zeros_like(C)
            np.add.at(counts, (r // rep_s, c // rep_t), 1.0)
            gamma = counts * (total / units)
        else:
            gamma = solve_transport_lp(C, np.full(n, total / n), np.full(m, total / m))
    meta = {"solver": "assignment" if n == m else "transport"}
    if certify:
        ok, viol = certify_optimality(C, gamma)
        meta.update(certified=ok, violation=viol)
        if not ok:
            raise RuntimeError(f"balanced OT optimality certificate failed ({viol:.3g})")
    plan = TransportPlan.from_dense(gamma, meta=meta)
    return plan, plan.cost(C)


def _integer_zeta(zeta, n: int, m: int) -> int:
    z = float(zeta)
    if not z.is_integer():
        raise ContractError(
            f"exact primal-OPT needs an integer mass, got zeta={zeta}; "
            "round it or use sinkhorn_entropic_primal_opt for fractional mass")
    z = int(z)
    if z < 0 or z > min(n, m):
        raise ContractError(f"zeta={z} outside [0, min(N, M)] = [0, {min(n, m)}]")
    return z


def reservoir_extension(cost, zeta, lam: float | None = None, delta: float = 1.0):
    """Extended balanced problem whose restriction solves primal-OPT.

    Returns the ``(N+1, M+1)`` cost and the marginals
    ``a = (1_N, M - zeta)``, ``b = (1_M, N - zeta)``.
    """
    C = _check_cost(cost)
    n, m = C.shape
    if lam is None:
        lam = float(C.max()) + 1.0
    ext = np.empty((n + 1, m + 1))
    ext[:n, :m] = C
    ext[:n, m] = lam
    ext[n, :m] = lam
    ext[n, m] = 2.0 * lam + delta
    a = np.concatenate([np.ones(n), [m - zeta]])
    b = np.concatenate([np.ones(m), [n - zeta]])
    return ext, a, b


def solve_primal_opt(cost, zeta, certify: bool = False,
                     delta: float = 1.0) -> tuple[TransportPlan, float]:
    """Exact partial OT moving exactly ``zeta`` units of mass.

    The reservoir extension is solved as an assignment with the source
    reservoir replicated ``M - zeta`` times and the target reservoir
    ``N - zeta`` times; the real block of the solution is returned.
    """
    C = _check_cost(cost)
    n, m = C.shape
    z = _integer_zeta(zeta, n, m)
    if z == 0:
        return TransportPlan([], [], [], n, m, meta={"solver": "assignment"}), 0.0
    lam = float(C.max()) + 1.0
    size = n + m - z
    big = np.empty((size, size))
    big[:n, :m] = C
    big[:n, m:] = lam
    big[n:, :m] = lam
    big[n:, m:] = 2.0 * lam + delta
    r, c = linear_sum_assignment(big)
    real = (r < n) & (c < m)
    plan = TransportPlan.from_pairs(r[real], c[real], n, m)
    transport_cost = plan.cost(C)
    plan.meta.update(solver="assignment", reservoir_lambda=lam, delta=delta,
                     extended_cost=transport_cost + lam * (n + m - 2 * z))
    if certify:
        ext, a, b = reservoir_extension(C, z, lam, delta)
        g = np.zeros_like(ext)
        g[:n, :m] = plan.to_dense()
        g[:n, m] = 1.0 - g[:n, :m].sum(axis=1)
        g[n, :m] = 1.0 - g[:n, :m].sum(axis=0)
        g[n, m] = a[n] - g[n, :m].sum()
        ok, viol = certify_optimality(ext, g)
        plan.meta.update(certified=ok, violation=viol)
        if not ok:
            raise RuntimeError(f"primal-OPT optimality certificate failed ({viol:.3g})")
    return plan, transport_cost
