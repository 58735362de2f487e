import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialreg.bench import (CloudFormatError, ScenarioSpec, add_uniform_noise, blob_3d,
                              cloud_sigma, fish_2d, load_cloud, make_rigid_scenario,
                              make_scenario, read_truth, registration_error,
                              rotation_from_angles, save_cloud, scenario_error, write_truth)
from partialreg.core import (ContractError, DeformationModel, KernelSpec, PointCloud,
                             apply_deformation)


def test_base_shapes_are_valid_clouds():
    assert PointCloud(fish_2d()).n == 91
    b = blob_3d(300)
    assert PointCloud(b).n == 300 and np.abs(b).max() < 1.0


def test_noise_examples():
    cloud = PointCloud(blob_3d(1000), truth_map=np.arange(1000))
    assert add_uniform_noise(cloud, 0.0, seed=0) is cloud
    noisy = add_uniform_noise(cloud, 0.10, seed=0)
    assert noisy.n == 1100 and noisy.noise[1000:].all() and not noisy.noise[:1000].any()
    assert np.abs(noisy.points[1000:]).max() <= 1.0
    np.testing.assert_array_equal(noisy.truth_map[:1000], np.arange(1000))
    assert (noisy.truth_map[1000:] == -1).all()
    again = add_uniform_noise(cloud, 0.10, seed=0)
    np.testing.assert_array_equal(noisy.points, again.points)
    box = (np.array([2.0, 2.0, 2.0]), np.array([3.0, 4.0, 5.0]))
    pts = add_uniform_noise(cloud, 0.05, box, seed=1).points[1000:]
    assert np.all(pts >= box[0]) and np.all(pts <= box[1])
    with pytest.raises(ContractError):
        add_uniform_noise(cloud, -0.1)
    with pytest.raises(ContractError):
        add_uniform_noise(cloud, 0.1, (np.zeros(3), np.zeros(3)))


def test_rigid_scenario_examples():
    spec = ScenarioSpec(angle_range=0.0, translation_bound=0.0)
    sc = make_rigid_scenario(fish_2d(30), spec)
    np.testing.assert_allclose(sc.target.points, sc.source.points, atol=1e-15)
    for seed in range(5):
        sc = make_scenario(ScenarioSpec(base="blob3d", n_points=50, seed=seed, eta=0.1))
        assert scenario_error(sc.truth, sc) < 1e-12
        R = sc.truth.R
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)
        assert np.all(np.abs(sc.extra["angles"]) <= np.pi / 3)
        assert np.all(np.abs(sc.truth.beta) <= 1.0)
    with pytest.raises(ContractError):
        make_rigid_scenario(fish_2d(), ScenarioSpec(deform="none"))


def test_scenarios_reproducible():
    spec = ScenarioSpec(base="fish2d", deform="tps_random", eta=0.2, seed=13)
    a, b = make_scenario(spec), make_scenario(spec)
    np.testing.assert_array_equal(a.target.points, b.target.points)
    np.testing.assert_array_equal(a.truth.alpha, b.truth.alpha)


def test_tps_random_warp_scale():
    X = fish_2d()
    sc = make_scenario(ScenarioSpec(base=X, deform="tps_random", coefficient_scale=0.05, seed=2))
    diam = np.linalg.norm(X.max(axis=0) - X.min(axis=0))
    disp = np.abs(sc.target.points - X).max()
    assert disp == pytest.approx(0.05 * diam)
    assert sc.truth.control.shape == (8, 2)


def test_rotation_from_angles():
    np.testing.assert_allclose(rotation_from_angles([0.0, 0.0, 0.0]), np.eye(3))
    R = rotation_from_angles([np.pi / 2])
    np.testing.assert_allclose(R @ [1.0, 0.0], [0.0, 1.0], atol=1e-15)


def test_error_examples():
    rng = np.random.default_rng(0)
    X0 = rng.standard_normal((20, 2))
    m = DeformationModel.identity(KernelSpec.gaussian(1.0), np.zeros((0, 2)))
    Y0 = apply_deformation(m, X0)
    L = np.arange(20)
    assert registration_error(m, X0, Y0, L) == 0.0
    # a constant offset of sigma * u with |u| = 1 gives error 1
    u = np.array([0.6, 0.8])
    shifted = DeformationModel(m.kernel, m.control, m.alpha, -cloud_sigma(Y0) * u)
    assert registration_error(shifted, X0, Y0, L) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        registration_error(m, X0, np.ones((20, 2)), L)
    with pytest.raises(ContractError):
        registration_error(m, X0, Y0, L[:-1])


def test_sigma_standardises_coordinates():
    Y = np.random.default_rng(1).standard_normal((30, 3)) * 4 + 2
    s = cloud_sigma(Y)
    assert np.mean(((Y - Y.mean(axis=0)) / s) ** 2) == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000))
def test_error_ignores_noise_relabelling(seed):
    sc = make_scenario(ScenarioSpec(base=fish_2d(30), deform="tps_random", eta=0.3, seed=seed))
    model = DeformationModel.identity(KernelSpec.gaussian(1.0), np.zeros((0, 2)))
    base = scenario_error(model, sc)
    rng = np.random.default_rng(seed)
    n0 = 30
    perm = n0 + rng.permutation(sc.target.n - n0)
    order = np.concatenate([np.arange(n0), perm])
    tgt = PointCloud(sc.target.points[order], noise=sc.target.noise[order])
    moved = type(sc)(sc.source, tgt, sc.truth)
    assert scenario_error(model, moved) == pytest.approx(base, rel=1e-15)


def test_cloud_roundtrip(tmp_path):
    pts = np.random.default_rng(2).standard_normal((10, 3)) * 1e3
    for name, header in (("a.xyz", False), ("a.csv", True), ("b.csv", False)):
        save_cloud(PointCloud(pts), tmp_path / name, header=header)
        back = load_cloud(tmp_path / name, header=header)
        np.testing.assert_array_equal(back.points, pts)


def test_single_point_file(tmp_path):
    (tmp_path / "p.xyz").write_text("0 0 0\n")
    pc = load_cloud(tmp_path / "p.xyz")
    assert (pc.n, pc.dim) == (1, 3)


def test_csv_header_requires_flag(tmp_path):
    (tmp_path / "h.csv").write_text("x,y\n1,2\n3,4\n")
    assert load_cloud(tmp_path / "h.csv", header=True).n == 2
    with pytest.raises(CloudFormatError, match="line 1"):
        load_cloud(tmp_path / "h.csv")


@pytest.mark.parametrize("text,line", [("1 2\n3\n", 2), ("1 2\n\n3 q\n", 3),
                                       ("1 2\n3 nan\n", 2)])
def test_malformed_rows_name_line(tmp_path, text, line):
    (tmp_path / "bad.xyz").write_text(text)
    with pytest.raises(CloudFormatError, match=f"line {line}"):
        load_cloud(tmp_path / "bad.xyz")


def test_duplicate_points_rejected(tmp_path):
    (tmp_path / "d.xyz").write_text("1 2\n1 2\n")
    with pytest.raises(ContractError):
        load_cloud(tmp_path / "d.xyz")


def test_truth_sidecar_roundtrip(tmp_path):
    sc = make_scenario(ScenarioSpec(base="fish2d", eta=0.2, seed=3, noise_on="both"))
    save_cloud(sc.source, tmp_path / "s.xyz")
    save_cloud(sc.target, tmp_path / "t.xyz")
    doc = write_truth(tmp_path / "truth.json", sc.source, sc.target, "s.xyz", "t.xyz", sc.truth)
    src, tgt, back = read_truth(tmp_path / "truth.json")
    assert back == doc and back["zeta"] == sc.zeta
    np.testing.assert_array_equal(src.truth_map, sc.source.truth_map)
    np.testing.assert_array_equal(tgt.noise, sc.target.noise)
    model = DeformationModel.from_dict(back["deformation"])
    np.testing.assert_allclose(apply_deformation(model, src.points), apply_deformation(sc.truth, src.points))
