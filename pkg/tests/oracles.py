"""Independent brute-force references used by the tests."""

from itertools import combinations, permutations

import numpy as np


def partial_bijections(n, m, size):
    """All injective maps from a ``size``-subset of range(n) into range(m)."""
    for src in combinations(range(n), size):
        for tgt in permutations(range(m), size):
            yield src, tgt


def brute_primal_opt(C, zeta):
    n, m = C.shape
    best = np.inf
    for src, tgt in partial_bijections(n, m, zeta):
        best = min(best, float(C[list(src), list(tgt)].sum()) if zeta else 0.0)
    return best


def brute_opt_1d(a, b, lam):
    """Minimum over monotone partial bijections (enumerated, not DP)."""
    n, m = len(a), len(b)
    best = lam * (n + m)
    for k in range(1, min(n, m) + 1):
        for src in combinations(range(n), k):
            for tgt in combinations(range(m), k):
                c = sum((a[i] - b[j]) ** 2 for i, j in zip(src, tgt))
                best = min(best, c + lam * (n + m - 2 * k))
    return best


def brute_opt_1d_any(a, b, lam):
    """Minimum over all (not necessarily monotone) partial bijections."""
    n, m = len(a), len(b)
    C = (np.asarray(a)[:, None] - np.asarray(b)[None, :]) ** 2
    best = lam * (n + m)
    for k in range(1, min(n, m) + 1):
        best = min(best, brute_primal_opt(C, k) + lam * (n + m - 2 * k))
    return best


def brute_permutation_cost(C):
    n = C.shape[0]
    return min(float(C[np.arange(n), list(p)].sum()) for p in permutations(range(n)))


def rotation_grid_2d(Xc, Yc, steps=200_000):
    """Best rotation angle over a dense grid (row form ``Xc @ R``)."""
    th = np.linspace(-np.pi, np.pi, steps, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    # ||Xc R - Yc||^2 = const - 2 tr(R^T Xc^T Yc), R = [[c, s], [-s, c]] for row vectors
    H = Xc.T @ Yc
    score = c * (H[0, 0] + H[1, 1]) + s * (H[0, 1] - H[1, 0])
    k = int(np.argmax(score))
    return np.array([[c[k], s[k]], [-s[k], c[k]]])


def random_rotation(rng, dim):
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q
