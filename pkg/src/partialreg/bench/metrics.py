"""Registration error against a known clean correspondence."""

from __future__ import annotations

import numpy as np

from ..core import ContractError, DeformationModel, apply_deformation, as_points


def cloud_sigma(Y0) -> float:
    """Scalar ``s`` with ``mean((Y0 - mean(Y0))^2) = s^2`` over all coordinates."""
    Y0 = as_points(Y0, "Y0")
    s = float(np.sqrt(np.sum((Y0 - Y0.mean(axis=0)) ** 2) / Y0.size))
    if not s > 0:
        raise ContractError("clean target has zero variance")
    return s


def registration_error(model: DeformationModel, X0, Y0, Lstar) -> float:
    """Root of ``(1/|Y0|) sum_n ||(y^{L*(n)} - f(x^n)) / sigma(Y0)||^2``.

    Parameters
    ----------
    model : DeformationModel
    X0 : array (n0, D)
        Clean source points.
    Y0 : array (zeta, D)
        Clean target points.
    Lstar : int array (n0,)
        Index into ``Y0`` of the true partner of each row of ``X0``.
    """
    X0 = as_points(X0, "X0")
    Y0 = as_points(Y0, "Y0")
    L = np.asarray(Lstar, dtype=np.int64)
    if L.shape != (X0.shape[0],) or L.min(initial=0) < 0 or L.max(initial=-1) >= Y0.shape[0]:
        raise ContractError("Lstar must assign a valid Y0 index to every clean source point")
    sigma = cloud_sigma(Y0)
    resid = (Y0[L] - apply_deformation(model, X0)) / sigma
    return float(np.sqrt(np.sum(resid ** 2) / Y0.shape[0]))


def scenario_error(model: DeformationModel, scenario) -> float:
    """:func:`registration_error` on the clean parts of a :class:`Scenario`."""
    return truth_error(model, scenario.source, scenario.target)


def truth_error(model: DeformationModel, src, tgt) -> float:
    """:func:`registration_error` from labelled clouds (``src.truth_map`` set)."""
    if src.truth_map is None:
        raise ContractError("source cloud carries no truth map")
    clean_src = np.flatnonzero(src.clean_mask)
    clean_tgt = np.flatnonzero(tgt.clean_mask)
    lookup = -np.ones(tgt.n, np.int64)
    lookup[clean_tgt] = np.arange(clean_tgt.size)
    L = lookup[src.truth_map[clean_src]]
    return registration_error(model, src.points[clean_src], tgt.points[clean_tgt], L)
