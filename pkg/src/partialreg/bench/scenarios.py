"""Synthetic registration scenarios: base shapes, ground-truth deformations
and uniform outlier noise.

All randomness flows through ``numpy.random.default_rng`` (PCG64), seeded
with plain integers, so a scenario is reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ContractError, DeformationModel, KernelSpec, PointCloud, apply_deformation


def fish_2d(n: int = 91) -> np.ndarray:
    """Closed outline of a stylised fish: an asymmetric body with a forked tail."""
    # piecewise-linear outline through hand-placed vertices, resampled uniformly
    verts = np.array([
        [1.00, 0.00], [0.85, 0.22], [0.55, 0.40], [0.15, 0.45], [-0.25, 0.36],
        [-0.55, 0.18], [-0.80, 0.48], [-0.95, 0.55], [-0.82, 0.05], [-0.95, -0.50],
        [-0.78, -0.42], [-0.55, -0.15], [-0.20, -0.30], [0.20, -0.34], [0.60, -0.26],
        [0.88, -0.12], [1.00, 0.00]])
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], n, endpoint=False)
    pts = np.column_stack([np.interp(t, s, verts[:, 0]), np.interp(t, s, verts[:, 1])])
    # an eye so the shape is not a pure curve
    return np.vstack([pts, [[0.62, 0.12]]])[:n] if n > 4 else pts


def blob_3d(n: int = 200, seed: int = 0) -> np.ndarray:
    """Points on a lumpy, asymmetric closed surface inside ``[-0.8, 0.8]^3``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x, y, z = v.T
    r = 1.0 + 0.25 * x + 0.15 * y * z + 0.2 * np.maximum(z, 0) ** 3 - 0.1 * x * y
    pts = v * r[:, None] * np.array([0.75, 0.5, 0.35])
    # a tail lobe breaks the remaining near-symmetries
    lobe = pts[:, 0] > 0.45
    pts[lobe, 2] += 0.3 * (pts[lobe, 0] - 0.45)
    return pts


BASES = {"fish2d": fish_2d, "blob3d": blob_3d}


def bounding_diameter(*clouds) -> float:
    P = np.vstack([np.asarray(c, dtype=np.float64) for c in clouds])
    return float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))


def rotation_from_angles(angles) -> np.ndarray:
    """Column-form rotation from per-axis angles (``D = 2``: one angle; ``D = 3``: x, y, z)."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if angles.size == 1:
        c, s = np.cos(angles[0]), np.sin(angles[0])
        return np.array([[c, -s], [s, c]])
    if angles.size != 3:
        raise ContractError("rotation_from_angles supports 2-D (1 angle) or 3-D (3 angles)")
    ax, ay, az = angles
    Rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
    Ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
    Rz = np.array([[np.cos(az), -np.sin(az), 0], [np.sin(az), np.cos(az), 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass
class ScenarioSpec:
    """Recipe for a synthetic pair.

    ``deform`` is ``"rigid"``, ``"tps_random"`` or ``"none"``. Rigid angles are
    drawn per axis from ``[-angle_range, angle_range]`` and translations from
    ``[-translation_bound, translation_bound]``. ``support`` is the noise box
    ``(low, high)``; ``None`` means ``[-1, 1]^3`` in 3-D and ``[-2, 2]^2`` in 2-D.
    """

    base: str | np.ndarray = "blob3d"
    n_points: int | None = None
    deform: str = "rigid"
    angle_range: float = np.pi / 3
    translation_bound: float = 1.0
    coefficient_scale: float = 0.05
    eta: float = 0.0
    support: tuple | None = None
    noise_on: str = "target"
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ContractError("eta must be non-negative")
        if self.deform not in ("rigid", "tps_random", "none"):
            raise ContractError(f"unknown deformation {self.deform!r}")
        if self.noise_on not in ("source", "target", "both"):
            raise ContractError(f"noise_on must be source, target or both, got {self.noise_on!r}")


@dataclass
class Scenario:
    """Source/target pair with ground truth.

    ``source.truth_map`` sends each clean source point to its target index.
    """

    source: PointCloud
    target: PointCloud
    truth: DeformationModel
    spec: ScenarioSpec | None = None
    extra: dict = field(default_factory=dict)

    @property
    def zeta(self) -> int:
        return int(self.target.clean_mask.sum())

    @property
    def clean_source(self) -> np.ndarray:
        return self.source.points[self.source.clean_mask]

    @property
    def clean_target(self) -> np.ndarray:
        return self.target.points[self.target.clean_mask]


def default_support(dim: int) -> tuple[np.ndarray, np.ndarray]:
    h = 1.0 if dim == 3 else 2.0
    return -h * np.ones(dim), h * np.ones(dim)


def add_uniform_noise(cloud: PointCloud, eta: float, support=None, seed=None) -> PointCloud:
    """Append ``floor(eta * N)`` points drawn uniformly from the box ``support``.

    Appended points are labelled as noise and unmapped in ``truth_map``.
    """
    if eta < 0:
        raise ContractError("eta must be non-negative")
    k = int(np.floor(eta * cloud.n + 1e-9))
    if k == 0:
        return cloud
    lo, hi = default_support(cloud.dim) if support is None else support
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (cloud.dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (cloud.dim,))
    if np.any(hi <= lo):
        raise ContractError("noise support box is degenerate")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    extra = lo + (hi - lo) * rng.random((k, cloud.dim))
    labels = np.concatenate([np.zeros(cloud.n, bool) if cloud.noise is None else cloud.noise,
                             np.ones(k, bool)])
    truth = None
    if cloud.truth_map is not None:
        truth = np.concatenate([cloud.truth_map, -np.ones(k, np.int64)])
    return PointCloud(np.vstack([cloud.points, extra]), noise=labels, truth_map=truth)


def _base_points(spec: ScenarioSpec) -> np.ndarray:
    if isinstance(spec.base, str):
        if spec.base not in BASES:
            raise ContractError(f"unknown base generator {spec.base!r}")
        gen = BASES[spec.base]
        if spec.base == "blob3d":
            return gen(spec.n_points or 200, seed=spec.seed)
        return gen(spec.n_points or 91)
    return np.asarray(spec.base, dtype=np.float64)


def _random_tps_warp(X: np.ndarray, scale: float, rng) -> DeformationModel:
    D = X.shape[1]
    lo, hi = X.min(axis=0), X.max(axis=0)
    if D == 3:
        corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], float)
    elif D == 2:
        corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1],
                            [0.5, 0], [0.5, 1], [0, 0.5], [1, 0.5]], float)
    else:
        raise ContractError("tps_random warps are defined for 2-D and 3-D clouds")
    C = lo + corners * (hi - lo)
    diam = bounding_diameter(X)
    alpha = rng.standard_normal((C.shape[0], D))
    # keep only the bending part: alpha orthogonal to [1, C]
    Cbar = np.hstack([np.ones((C.shape[0], 1)), C])
    Q, _ = np.linalg.qr(Cbar, mode="complete")
    Q2 = Q[:, D + 1:]
    alpha = Q2 @ (Q2.T @ alpha)
    kernel = KernelSpec.tps(D)
    model = DeformationModel(kernel, C, alpha, np.zeros(D), R=np.eye(D), S=np.eye(D))
    disp = np.abs(apply_deformation(model, X) - X).max()
    if disp > 0:
        alpha = alpha * (scale * diam / disp)
    return DeformationModel(kernel, C, alpha, np.zeros(D), R=np.eye(D), S=np.eye(D))


def make_scenario(spec: ScenarioSpec) -> Scenario:
    """Build a source/target pair from ``spec`` (any deformation kind)."""
    rng = np.random.default_rng(spec.seed)
    X0 = _base_points(spec)
    D = X0.shape[1]
    if spec.deform == "rigid":
        n_ang = 1 if D == 2 else 3
        angles = rng.uniform(-spec.angle_range, spec.angle_range, n_ang)
        beta = rng.uniform(-spec.translation_bound, spec.translation_bound, D)
        Q = rotation_from_angles(angles)
        truth = DeformationModel(KernelSpec.gaussian(1.0), np.zeros((0, D)), np.zeros((0, D)),
                                 beta, R=Q.T, S=np.eye(D))
        extra = {"angles": angles.tolist()}
    elif spec.deform == "tps_random":
        truth = _random_tps_warp(X0, spec.coefficient_scale, rng)
        extra = {}
    else:
        truth = DeformationModel.identity(KernelSpec.gaussian(1.0), np.zeros((0, D)))
        extra = {}
    Y0 = apply_deformation(truth, X0)
    n0 = X0.shape[0]
    source = PointCloud(X0, noise=np.zeros(n0, bool), truth_map=np.arange(n0))
    target = PointCloud(Y0, noise=np.zeros(n0, bool))
    support = spec.support
    if spec.noise_on in ("source", "both"):
        source = add_uniform_noise(source, spec.eta, support, rng)
    if spec.noise_on in ("target", "both"):
        target = add_uniform_noise(target, spec.eta, support, rng)
    return Scenario(source, target, truth, spec, extra)


def make_rigid_scenario(base, spec: ScenarioSpec) -> Scenario:
    """Rigid scenario on an explicit base cloud (or generator name)."""
    if spec.deform != "rigid":
        raise ContractError("make_rigid_scenario needs deform='rigid'")
    if isinstance(base, PointCloud):
        base = base.points
    spec = ScenarioSpec(**{**vars(spec), "base": base})
    return make_scenario(spec)
