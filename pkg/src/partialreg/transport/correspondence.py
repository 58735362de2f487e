"""Correspondence-update primitives: barycentric projection and sliced steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ContractError, TransportPlan, as_points
from .opt1d import solve_opt_1d

LAMBDA_MIN = 1e-8
LAMBDA_MAX = 1e8


def barycentric_update(plan: TransportPlan, Y) -> tuple[np.ndarray, np.ndarray]:
    """Conditional target barycenter of every source row that carries mass.

    Returns
    -------
    values : ndarray, shape (len(domain), D)
        New positions for the rows in ``domain``.
    domain : ndarray of int
        Ascending source indices with positive row mass.
    """
    Ya = as_points(Y, "Y")
    if Ya.shape[0] != plan.n_target:
        raise ContractError(f"plan has {plan.n_target} targets, Y has {Ya.shape[0]} points")
    row_mass = plan.row_mass()
    domain = np.flatnonzero(row_mass > 0)
    weighted = np.zeros((plan.n_source, Ya.shape[1]))
    np.add.at(weighted, plan.rows, plan.mass[:, None] * Ya[plan.cols])
    values = weighted[domain] / row_mass[domain, None]
    return values, domain


@dataclass(frozen=True, eq=False)
class SliceDirectionSet:
    directions: np.ndarray
    seed: int

    def __len__(self):
        return self.directions.shape[0]

    def __iter__(self):
        return iter(self.directions)


def sample_directions(t: int, dim: int, seed=None) -> SliceDirectionSet:
    """``t`` i.i.d. uniform directions on the unit sphere (normalised Gaussians).

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if t < 1:
        raise ContractError(f"need at least one direction, got t={t}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.standard_normal((t, dim))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
    v /= norms[:, None]
    return SliceDirectionSet(v, seed if isinstance(seed, (int, np.integer)) else -1)


def sliced_step(Yhat, Y, theta, lam: float, Y_proj=None):
    """Move matched points of ``Yhat`` along ``theta`` onto their 1-D partners.

    Both clouds are projected onto ``theta``, the 1-D OPT problem is solved on
    the sorted projections and each matched ``yhat^n`` is shifted by
    ``theta * (<theta, y^L(n)> - <theta, yhat^n>)``.

    ``Y_proj`` optionally supplies the precomputed ``(Y @ theta, argsort)``.

    Returns
    -------
    Yhat_new : ndarray
    domain : ndarray of int
        Matched source indices (ascending).
    matched : int
    """
    out, domain, matched, _ = _slice(Yhat, Y, theta, lam, Y_proj)
    return out, domain, matched


def _slice(Yhat, Y, theta, lam, Y_proj=None):
    # sliced_step that also returns the 1-D OPT cost
    Yh = np.asarray(Yhat, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-10:
        raise ContractError("theta must be a unit vector")
    p = Yh @ theta
    if Y_proj is None:
        q = as_points(Y, "Y") @ theta
        iq = np.argsort(q, kind="stable")
    else:
        q, iq = Y_proj
    ip = np.argsort(p, kind="stable")
    si, sj, cost = solve_opt_1d(p[ip], q[iq], lam)
    src = ip[si]
    tgt = iq[sj]
    out = Yh.copy()
    out[src] += np.outer(q[tgt] - p[src], theta)
    return out, np.sort(src), int(src.size), cost


def adapt_lambda(lam: float, matched: int, zeta: int, factor: float = 1.05,
                 lam_min: float = LAMBDA_MIN, lam_max: float = LAMBDA_MAX) -> float:
    """Raise ``lam`` when fewer than ``zeta`` points matched, otherwise lower it."""
    if not lam > 0:
        raise ContractError(f"lam must be positive, got {lam}")
    new = lam * factor if matched < zeta else lam / factor
    return float(min(max(new, lam_min), lam_max))


def _quantile_barycenters(q_sorted: np.ndarray, n: int) -> np.ndarray:
    # mean of the target quantile function over each source cell [i/n, (i+1)/n)
    m = q_sorted.size
    csum = np.concatenate([[0.0], np.cumsum(q_sorted)])
    k = np.arange(n + 1) * m
    whole, part = k // n, (k % n) / n
    tail = np.where(whole < m, q_sorted[np.minimum(whole, m - 1)], 0.0)
    G = (csum[whole] + part * tail) / m
    return n * np.diff(G)


def sliced_balanced_step(Yhat, Y, theta, Y_proj=None):
    """Balanced 1-D transport between uniform measures along ``theta``.

    Every source point carries mass ``1/N`` and every target point ``1/M``;
    each ``yhat^n`` moves along ``theta`` to the barycenter of the target
    mass it receives under the monotone coupling. For ``N = M`` this is the
    sorted one-to-one matching.

    Returns ``(Yhat_new, domain, matched, cost)`` where ``domain`` is every
    source index and ``cost`` is the coupling cost scaled to total mass
    ``min(N, M)``.
    """
    Yh = np.asarray(Yhat, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-10:
        raise ContractError("theta must be a unit vector")
    if Y_proj is None:
        q = as_points(Y, "Y") @ theta
        iq = np.argsort(q, kind="stable")
    else:
        q, iq = Y_proj
    qs = q[iq]
    p = Yh @ theta
    ip = np.argsort(p, kind="stable")
    n, m = p.size, qs.size
    bary = np.empty(n)
    bary[ip] = _quantile_barycenters(qs, n)
    out = Yh + np.outer(bary - p, theta)
    cost = (p @ p) / n - 2.0 * (p @ bary) / n + (qs @ qs) / m
    return out, np.arange(n), n, float(max(cost, 0.0) * min(n, m))
