"""Entropy-regularised partial transport via log-domain Sinkhorn on a
reservoir-extended balanced problem."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import logsumexp

from ..core import ContractError, TransportPlan
from .exact import _check_cost


class SinkhornConvergenceWarning(RuntimeWarning):
    pass


def _dual_value(f, g, C, a, b, xi):
    return float(f @ a + g @ b - xi * np.exp((f[:, None] + g[None, :] - C) / xi).sum())


def _sweeps(f, g, C, log_a, log_b, xi, n_sweeps, tol, a, dual=None, check_every=5):
    residual = np.inf
    done = 0
    for done in range(1, n_sweeps + 1):
        f = xi * (log_a - logsumexp((g[None, :] - C) / xi, axis=1))
        g = xi * (log_b - logsumexp((f[:, None] - C) / xi, axis=0))
        if dual is None and done % check_every and done != n_sweeps:
            continue
        P = np.exp((f[:, None] + g[None, :] - C) / xi)
        residual = float(np.abs(P.sum(axis=1) - a).sum())
        if dual is not None:
            dual.append(float(f @ a + g @ np.exp(log_b) - xi * P.sum()))
        if residual <= tol:
            break
    return f, g, residual, done


def _newton_polish(f, g, C, a, b, xi, steps, tol, dual=None):
    # damped Newton ascent on the smooth dual; the Hessian is singular along
    # the constant shift (f + t, g - t), hence the least-squares solve
    n = a.size
    value = _dual_value(f, g, C, a, b, xi)
    residual = np.inf
    for _ in range(steps):
        P = np.exp((f[:, None] + g[None, :] - C) / xi)
        ga = a - P.sum(axis=1)
        gb = b - P.sum(axis=0)
        residual = float(np.abs(ga).sum())
        if residual <= tol and np.abs(gb).sum() <= tol:
            break
        H = np.block([[np.diag(P.sum(axis=1)), P], [P.T, np.diag(P.sum(axis=0))]]) / xi
        d = np.linalg.lstsq(H, np.concatenate([ga, gb]), rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            f_new, g_new = f + t * d[:n], g + t * d[n:]
            v = _dual_value(f_new, g_new, C, a, b, xi)
            if v >= value:
                break
            t *= 0.5
        else:
            break
        f, g, value = f_new, g_new, v
        if dual is not None:
            dual.append(v)
    # one closing column update keeps the plan's column marginals exact
    g = xi * (np.log(b) - logsumexp((f[:, None] - C) / xi, axis=0))
    P = np.exp((f[:, None] + g[None, :] - C) / xi)
    residual = float(np.abs(P.sum(axis=1) - a).sum())
    return f, g, residual


# Newton polishing is dense; skip it on larger problems
_NEWTON_MAX_SIZE = 1500


def sinkhorn_log(cost, a, b, xi: float, max_iter: int = 10_000, tol: float = 1e-9,
                 track_dual: bool = False, anneal: bool = True, init=None):
    """Balanced entropic OT ``min <C, P> + xi * sum P (log P - 1)`` in the log domain.

    With ``anneal`` the regularisation starts at ``max(C)`` and is divided by
    four per stage (warm-started duals) until it reaches ``xi``. If plain
    sweeps at the target ``xi`` stall, the dual is finished with damped
    Newton steps. Zero-mass rows or columns are dropped.

    Returns the dense plan and a dict with ``converged``, ``n_iter`` (sweeps
    plus Newton steps), ``residual`` (L1 row-marginal error; columns are exact)
    and, with ``track_dual``, ``dual``: the dual objective after every update
    at the target ``xi``, which is non-decreasing. ``info["potentials"]`` holds
    the final dual pair ``(f, g)`` (zero on dropped rows/columns); passing it
    back as ``init`` warm-starts a related problem and skips the annealing.
    """
    C = np.asarray(cost, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not xi > 0:
        raise ContractError(f"xi must be positive, got {xi}")
    if max_iter < 1:
        raise ContractError("max_iter must be positive")
    rows = a > 0
    cols = b > 0
    Cr = C[np.ix_(rows, cols)]
    ar, br = a[rows], b[cols]
    log_a, log_b = np.log(ar), np.log(br)
    f = np.zeros(ar.size)
    g = np.zeros(br.size)
    used = 0
    if init is not None:
        f0, g0 = (np.asarray(v, dtype=np.float64) for v in init)
        if f0.shape != a.shape or g0.shape != b.shape:
            raise ContractError("init potentials do not match the marginals")
        f, g = f0[rows].copy(), g0[cols].copy()
        anneal = False

    if anneal:
        stage_xi = float(Cr.max())
        while stage_xi > 4 * xi and used < max_iter // 2:
            f, g, _, k = _sweeps(f, g, Cr, log_a, log_b, stage_xi,
                                 min(200, max_iter // 2 - used), 1e-6, ar)
            used += k
            stage_xi /= 4

    dual = [] if track_dual else None
    budget = max_iter - used
    sweep_budget = budget if Cr.size > _NEWTON_MAX_SIZE ** 2 // 4 else max(1, min(budget, 2000))
    f, g, residual, k = _sweeps(f, g, Cr, log_a, log_b, xi, sweep_budget, tol, ar, dual)
    used += k
    if residual > tol and sum(Cr.shape) <= _NEWTON_MAX_SIZE and used < max_iter:
        steps = min(100, max_iter - used)
        f, g, residual = _newton_polish(f, g, Cr, ar, br, xi, steps, tol, dual)
        used += steps
    if residual > tol and used < max_iter:
        f, g, residual, k = _sweeps(f, g, Cr, log_a, log_b, xi, max_iter - used, tol, ar, dual)
        used += k
    P = np.exp((f[:, None] + g[None, :] - Cr) / xi)

    full = np.zeros_like(C)
    full[np.ix_(rows, cols)] = P
    fo, go = np.zeros(a.size), np.zeros(b.size)
    fo[rows], go[cols] = f, g
    info = {"converged": residual <= tol, "n_iter": used, "residual": residual,
            "potentials": (fo, go)}
    if track_dual:
        info["dual"] = dual
    return full, info


def _restrict(full: np.ndarray, n: int, m: int) -> np.ndarray:
    gamma = full[:n, :m].copy()
    # shave the unconverged residual so unit marginals hold exactly
    rs = gamma.sum(axis=1)
    over = rs > 1.0
    gamma[over] /= rs[over, None]
    cs = gamma.sum(axis=0)
    over = cs > 1.0
    gamma[:, over] /= cs[over]
    return gamma


def _finish(full, info, C, name):
    n, m = C.shape
    gamma = _restrict(full, n, m)
    if not info["converged"]:
        warnings.warn(f"{name} stopped after {info['n_iter']} sweeps with marginal "
                      f"residual {info['residual']:.3g}", SinkhornConvergenceWarning,
                      stacklevel=3)
    meta = dict(info, solver="sinkhorn")
    meta.pop("dual", None)
    if "dual" in info:
        meta["dual"] = info["dual"]
    plan = TransportPlan.from_dense(gamma, meta=meta)
    return plan, gamma


def sinkhorn_entropic_primal_opt(cost, zeta: float, xi: float, max_iter: int = 10_000,
                                 tol: float = 1e-9, delta: float | None = None,
                                 track_dual: bool = False, lam: float | None = None,
                                 init=None) -> tuple[TransportPlan, float]:
    """Entropic partial OT with transported mass ``zeta``.

    Reservoir masses are ``M - zeta`` and ``N - zeta``; real-to-reservoir cost
    is ``lam`` (default ``max(C) + 1``) and reservoir-to-reservoir cost
    ``2 lam + delta``. ``init`` takes ``plan.meta["potentials"]`` from an
    earlier call of the same size. Returns the real block and its transport
    cost ``sum C * gamma``.
    """
    C = _check_cost(cost)
    n, m = C.shape
    zeta = float(zeta)
    if not 0 < zeta <= min(n, m):
        raise ContractError(f"zeta must lie in (0, {min(n, m)}], got {zeta}")
    if lam is None:
        lam = float(C.max()) + 1.0
    elif not lam > C.max():
        raise ContractError("lam must exceed every real cost")
    if delta is None:
        delta = lam
    ext = np.empty((n + 1, m + 1))
    ext[:n, :m] = C
    ext[:n, m] = lam
    ext[n, :m] = lam
    ext[n, m] = 2.0 * lam + delta
    a = np.concatenate([np.ones(n), [m - zeta]])
    b = np.concatenate([np.ones(m), [n - zeta]])
    full, info = sinkhorn_log(ext, a, b, xi, max_iter, tol, track_dual, init=init)
    plan, gamma = _finish(full, info, C, "sinkhorn_entropic_primal_opt")
    return plan, float((C * gamma).sum())


def sinkhorn_entropic_opt_penalized(cost, lam: float, xi: float, max_iter: int = 10_000,
                                    tol: float = 1e-9,
                                    track_dual: bool = False) -> tuple[TransportPlan, float]:
    """Entropic OPT with destruction/creation price ``lam`` per unit mass.

    Solved on the extension with reservoir masses ``M`` and ``N``, real-to-
    reservoir cost ``lam`` and free reservoir-to-reservoir transport. Returns
    the real block and its penalised cost ``sum C * gamma + lam (N + M - 2|gamma|)``.
    """
    C = _check_cost(cost)
    n, m = C.shape
    if lam < 0:
        raise ContractError(f"lam must be >= 0, got {lam}")
    ext = np.zeros((n + 1, m + 1))
    ext[:n, :m] = C
    ext[:n, m] = lam
    ext[n, :m] = lam
    a = np.concatenate([np.ones(n), [float(m)]])
    b = np.concatenate([np.ones(m), [float(n)]])
    full, info = sinkhorn_log(ext, a, b, xi, max_iter, tol, track_dual)
    plan, gamma = _finish(full, info, C, "sinkhorn_entropic_opt_penalized")
    value = float((C * gamma).sum() + lam * (n + m - 2.0 * gamma.sum()))
    return plan, value
