"""Exact one-dimensional optimal partial transport with linear mass penalty.

For sorted inputs and the squared-difference cost some optimal plan is a
monotone partial bijection, so the problem reduces to an edit-distance style
dynamic program over prefixes: each step either matches ``a[i]`` with
``b[j]`` or leaves one of them unmatched at price ``lam``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..core import ContractError


@njit(cache=True)
def _dp(a, b, lam):
    n = a.shape[0]
    m = b.shape[0]
    # move codes: 0 match, 1 drop a[i-1], 2 drop b[j-1]
    move = np.empty((n + 1, m + 1), dtype=np.int8)
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    prev[0] = 0.0
    for j in range(1, m + 1):
        prev[j] = j * lam
        move[0, j] = 2
    for i in range(1, n + 1):
        cur[0] = i * lam
        move[i, 0] = 1
        ai = a[i - 1]
        for j in range(1, m + 1):
            d = ai - b[j - 1]
            best = prev[j - 1] + d * d
            mv = 0
            v = prev[j] + lam
            if v < best:
                best = v
                mv = 1
            v = cur[j - 1] + lam
            if v < best:
                best = v
                mv = 2
            cur[j] = best
            move[i, j] = mv
        for j in range(m + 1):
            prev[j] = cur[j]
    total = prev[m]

    src = np.empty(min(n, m), dtype=np.int64)
    tgt = np.empty(min(n, m), dtype=np.int64)
    k = 0
    i = n
    j = m
    while i > 0 or j > 0:
        mv = move[i, j]
        if mv == 0:
            src[k] = i - 1
            tgt[k] = j - 1
            k += 1
            i -= 1
            j -= 1
        elif mv == 1:
            i -= 1
        else:
            j -= 1
    return total, src[:k][::-1].copy(), tgt[:k][::-1].copy()


def solve_opt_1d(a, b, lam: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve 1-D OPT between ascending samples ``a`` and ``b``.

    Minimises ``sum (a_n - b_L(n))^2 + lam * (N + M - 2 |Dom L|)`` over
    partial bijections ``L``.

    Returns
    -------
    src, tgt : ndarray of int
        Matched indices, ``a[src[k]] <-> b[tgt[k]]``, both strictly increasing.
    cost : float
    """
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    if lam < 0 or not np.isfinite(lam):
        raise ContractError(f"lam must be finite and >= 0, got {lam}")
    if np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise ContractError("solve_opt_1d needs ascending inputs")
    if a.size == 0 or b.size == 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64),
                float(lam * (a.size + b.size)))
    cost, src, tgt = _dp(a, b, float(lam))
    return src, tgt, float(cost)
