import numpy as np
import pytest

from partialreg import (ContractError, KernelSpec, Method, RegistrationConfig, apply_deformation,
                        register, register_balanced_baselines, register_opt_rbf,
                        register_opt_tps, register_sopt_rbf, register_sopt_tps,
                        register_tps_rpm_new)
from partialreg.bench import ScenarioSpec, fish_2d, make_scenario, scenario_error
from partialreg.pipelines import default_lambda0

FISH = fish_2d(40)
FAST = dict(T=40, rigid_iters=5, projections=20)


def _identity_scenario():
    return make_scenario(ScenarioSpec(base=FISH, deform="none"))


@pytest.mark.parametrize("method", [m for m in Method if m is not Method.TPS_RPM_NEW])
def test_identity_instance(method):
    sc = _identity_scenario()
    rep = register(FISH, FISH, RegistrationConfig(method=method, zeta=40, **FAST))
    assert scenario_error(rep.model, sc) < 1e-6
    assert rep.converged_at is not None and rep.converged_at <= 10


def test_identity_instance_entropic():
    sc = _identity_scenario()
    rep = register(FISH, FISH, RegistrationConfig(method="tps-rpm-new", zeta=40, xi=3e-4,
                                                  **FAST))
    assert scenario_error(rep.model, sc) < 1e-4


@pytest.mark.parametrize("method", ["opt-rbf", "opt-tps", "sopt-rbf", "sopt-tps"])
def test_rigid_instance(method):
    sc = make_scenario(ScenarioSpec(base="blob3d", n_points=80, seed=3))
    rep = register(sc.source.points, sc.target.points,
                   RegistrationConfig(method=method, zeta=sc.zeta, projections=50))
    assert scenario_error(rep.model, sc) < 1e-2


def test_affine_instance_tps_recovers_map():
    rng = np.random.default_rng(0)
    B0 = np.eye(2) + 0.2 * rng.standard_normal((2, 2))
    Y = FISH @ B0 + [0.3, -0.1]
    rep = register(FISH, Y, RegistrationConfig(method="opt-tps", zeta=40, epsilon=0.0,
                                               scaling_mode="per_axis"))
    assert np.abs(apply_deformation(rep.model, FISH) - Y).max() < 1e-6


def test_partial_methods_ignore_target_outliers():
    sc = make_scenario(ScenarioSpec(base="fish2d", deform="tps_random", eta=0.2, seed=1))
    X, Y = sc.source.points, sc.target.points
    err = {m: scenario_error(register(X, Y, RegistrationConfig(method=m, zeta=sc.zeta)).model, sc)
           for m in ("opt-tps", "ot-tps")}
    assert err["opt-tps"] < 0.1 < err["ot-tps"]


def test_matched_size_equals_zeta_for_exact_partial():
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", eta=0.25, seed=2,
                                    noise_on="both"))
    rep = register(sc.source.points, sc.target.points,
                   RegistrationConfig(method="opt-rbf", zeta=sc.zeta, T=30))
    assert all(r.matched == sc.zeta for r in rep.per_iter)


@pytest.mark.parametrize("method", ["opt-rbf", "sopt-rbf", "opt-tps"])
def test_fixed_scaling_is_exactly_identity(method):
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", seed=4))
    cfg = RegistrationConfig(method=method, zeta=40, T=3, rigid_iters=3, **{"projections": 10})
    rep = register(sc.source.points, 1.3 * sc.target.points, cfg)
    assert np.array_equal(rep.model.S, np.eye(2))


def test_scaling_modes_differ():
    Y = 1.5 * FISH
    for mode in ("uniform", "per_axis"):
        rep = register(FISH, Y, RegistrationConfig(method="opt-rbf", zeta=40, scaling_mode=mode))
        np.testing.assert_allclose(np.diag(rep.model.S), 1.5, atol=1e-8)


def test_rigid_schedule_blocks_nonrigid_updates():
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", seed=5,
                                    coefficient_scale=0.1))
    cfg = RegistrationConfig(method="opt-rbf", zeta=40, T=12, rigid_iters=12)
    rep = register(sc.source.points, sc.target.points, cfg)
    assert not any(r.nonrigid for r in rep.per_iter)
    assert not np.any(rep.model.alpha)
    cfg = RegistrationConfig(method="opt-rbf", zeta=40, T=60, rigid_iters=8)
    rep = register(sc.source.points, sc.target.points, cfg)
    first = next(r.iteration for r in rep.per_iter if r.nonrigid)
    assert first > 8 and np.any(rep.model.alpha)


def test_sliced_methods_enter_nonrigid_phase():
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", seed=6, eta=0.1))
    rep = register(sc.source.points, sc.target.points,
                   RegistrationConfig(method="sopt-tps", zeta=sc.zeta, T=30, rigid_iters=5,
                                      projections=20))
    flags = [r.nonrigid for r in rep.per_iter]
    assert not any(flags[:5]) and flags[-1]
    assert rep.model.linear_kind == "general"


@pytest.mark.parametrize("method", ["sopt-rbf", "sot-tps", "tps-rpm-new", "opt-tps"])
def test_determinism(method):
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", seed=7, eta=0.1))
    cfg = RegistrationConfig(method=method, zeta=sc.zeta, seed=11, T=25, rigid_iters=5,
                             projections=15)
    a = register(sc.source.points, sc.target.points, cfg)
    b = register(sc.source.points, sc.target.points, cfg)
    for key in ("alpha", "beta", "linear"):
        assert np.array_equal(getattr(a.model, key), getattr(b.model, key))
    assert [r.cost for r in a.per_iter] == [r.cost for r in b.per_iter]


def test_sliced_lambda_adapts_and_is_reported():
    sc = make_scenario(ScenarioSpec(base=FISH, deform="none", eta=0.5, seed=8))
    X, Y = sc.source.points, sc.target.points
    rep = register(X, Y, RegistrationConfig(method="sopt-rbf", zeta=40, T=5, rigid_iters=2,
                                            projections=10))
    lams = [r.lam for r in rep.per_iter]
    assert all(l is not None and l > 0 for l in lams)
    assert len(set(lams)) > 1
    assert default_lambda0(X, Y) > 0


def test_degenerate_subset_is_skipped_and_flagged():
    rep = register(FISH, FISH + 0.1, RegistrationConfig(method="opt-rbf", zeta=2, T=3, rigid_iters=1))
    assert rep.flags and "skipped" in rep.flags[0]
    np.testing.assert_array_equal(rep.model.beta, 0.0)


def test_balanced_identity_plan_is_permutation():
    rep = register(FISH, FISH[::-1], RegistrationConfig(method="ot-rbf", T=10, rigid_iters=2))
    assert all(r.matched == 40 for r in rep.per_iter)
    assert rep.per_iter[-1].cost == pytest.approx(0.0, abs=1e-20)


def test_restricted_spline_fit_option():
    sc = make_scenario(ScenarioSpec(base=FISH, deform="tps_random", seed=9, eta=0.2,
                                    noise_on="source"))
    cfg = RegistrationConfig(method="opt-tps", zeta=sc.zeta, restrict_spline_to_matched=True)
    rep = register(sc.source.points, sc.target.points, cfg)
    assert scenario_error(rep.model, sc) < 0.1
    # rows outside the matched set carry no spline coefficient
    assert np.count_nonzero(np.abs(rep.model.alpha).sum(axis=1)) <= sc.zeta


def test_custom_control_points():
    cfg = RegistrationConfig(method="opt-rbf", zeta=40, n_control=10,
                             kernel=KernelSpec.gaussian(0.2))
    rep = register(FISH, FISH, cfg)
    assert rep.model.control.shape == (10, 2)
    cfg = RegistrationConfig(method="opt-rbf", zeta=40, control=FISH[:3])
    assert register(FISH, FISH, cfg).model.control.shape == (3, 2)


@pytest.mark.parametrize("kwargs", [dict(T=0), dict(rigid_iters=200), dict(epsilon=-1.0),
                                    dict(method="opt-rbf", epsilon=0.0), dict(xi=0.0),
                                    dict(method="bogus"), dict(scaling_mode="weird"),
                                    dict(lambda0=-1.0), dict(projections=0)])
def test_config_validation(kwargs):
    with pytest.raises(ContractError):
        RegistrationConfig(**kwargs)


def test_zeta_validation():
    for z in (None, 0, 41, 2.5):
        with pytest.raises(ContractError):
            register(FISH, FISH, RegistrationConfig(method="opt-rbf", zeta=z))
    with pytest.raises(ContractError):
        register(FISH, FISH[:, :1], RegistrationConfig(method="ot-rbf"))


def test_named_entry_points_dispatch():
    cfg = RegistrationConfig(method="opt-rbf", zeta=40, T=2, rigid_iters=1)
    register_opt_rbf(FISH, FISH, cfg)
    for fn in (register_opt_tps, register_sopt_rbf, register_sopt_tps,
               register_balanced_baselines, register_tps_rpm_new):
        with pytest.raises(ContractError):
            fn(FISH, FISH, cfg)


def test_report_records():
    rep = register(FISH, FISH + 0.05, RegistrationConfig(method="opt-tps", zeta=40))
    d = rep.to_dict()
    assert d["method"] == "opt-tps" and len(d["per_iter"]) == rep.n_iter <= 100
    assert all(0 <= r.matched <= 40 and r.wall_time >= 0 for r in rep.per_iter)
