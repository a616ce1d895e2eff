import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import canned, canned_run, random_state, small_scenario
from damageplast import (
    ConfigurationError,
    StateFields,
    TimeGrid,
    TimeProfile,
    cleavage_reduction_check,
    condition_suite,
    diss_along,
    dissipation_distance,
    energy_balance_check,
    run_evolution,
    stability_check,
)
from damageplast import constitutive as cst
from damageplast.energetics import (
    CompetitorSpec,
    default_competitors,
    energy_constants,
    identity_material,
    invariant_violations,
    verify_trajectory,
)
from damageplast.solver import Trajectory, TrajectoryStep
from damageplast.tensor import SubspaceS

SC = small_scenario(2, n=2)


def _z(rng, chi_hi=None):
    f = random_state(SC, rng)
    if chi_hi is not None:
        f.chi = chi_hi * rng.uniform(0.0, 1.0, chi_hi.shape)
    return f.chi, f.d


def test_distance_identity():
    chi, d = _z(np.random.default_rng(0))
    assert dissipation_distance((chi, d), (chi, d), SC) == 0.0


def test_distance_healing_is_infinite():
    rng = np.random.default_rng(1)
    chi, d = _z(rng)
    chi2 = chi.copy()
    chi2[3] = min(1.0, chi2[3] + 1e-9)
    assert dissipation_distance((chi, d), (chi2, d), SC) == math.inf


def test_distance_single_step_value():
    disc = SC.disc
    mat = SC.material
    N = disc.mesh.n_nodes
    chi1 = np.full(N, 0.8)
    chi2 = chi1 - 0.1
    d1 = np.zeros((N, 3))
    d2 = np.tile([0.2, -0.2, 0.1], (N, 1))
    nd = math.sqrt(0.04 + 0.04 + 2 * 0.01)
    expected = (mat.nu_diss * 0.1 + mat.mu_diss * nd) * SC.mesh.volume
    assert dissipation_distance((chi1, d1), (chi2, d2), SC) == pytest.approx(expected, rel=1e-13)


def test_distance_rejects_nonconforming():
    with pytest.raises(ValueError):
        dissipation_distance((np.ones(3), np.zeros((3, 3))), (np.ones(3), np.zeros((3, 3))), SC)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_triangle_and_indiscernibles(seed):
    rng = np.random.default_rng(seed)
    z1 = _z(rng)
    z2 = (z1[0] * rng.uniform(0.5, 1.0, z1[0].shape), SC.disc.project_d(z1[1] + 0.2 * rng.standard_normal(z1[1].shape)))
    z3 = (z2[0] * rng.uniform(0.5, 1.0, z2[0].shape), SC.disc.project_d(z2[1] + 0.2 * rng.standard_normal(z2[1].shape)))
    if rng.uniform() < 0.3:
        z2 = (np.minimum(1.0, z2[0] + 0.1), z2[1])  # infinite legs are allowed
    d12 = dissipation_distance(z1, z2, SC)
    d23 = dissipation_distance(z2, z3, SC)
    d13 = dissipation_distance(z1, z3, SC)
    assert d13 <= d12 + d23 + 1e-12
    assert d12 >= 0 and d23 >= 0
    assert (d12 == 0) == (np.array_equal(z1[0], z2[0]) and np.array_equal(z1[1], z2[1]))


def _toy_trajectory(sc, seed=3, n=4):
    rng = np.random.default_rng(seed)
    disc = sc.disc
    f = random_state(sc, rng)
    traj = Trajectory()
    for k in range(n):
        traj.steps.append(TrajectoryStep(k / (n - 1), f.copy(), disc.energy(0.0, f), 0, 0, 0, 0, 0, 0))
        f = f.copy()
        f.chi = f.chi * rng.uniform(0.7, 1.0, f.chi.shape)
        f.d = disc.project_d(f.d + 0.3 * rng.standard_normal(f.d.shape))
    return traj


def test_diss_along_partitions():
    sc = SC
    traj = _toy_trajectory(sc)
    n = len(traj)
    full = diss_along(traj, 0, n - 1, sc)
    # every partition of the stored steps gives at most the step sum, which is attained
    best = 0.0
    for r in range(0, n - 1):
        for inner in itertools.combinations(range(1, n - 1), r):
            pts = (0,) + inner + (n - 1,)
            s = sum(dissipation_distance(traj[a].fields, traj[b].fields, sc) for a, b in zip(pts, pts[1:]))
            assert s <= full + 1e-12
            best = max(best, s)
    assert best == pytest.approx(full, rel=1e-14)
    # concatenation
    for b in range(n):
        assert diss_along(traj, 0, b, sc) + diss_along(traj, b, n - 1, sc) == pytest.approx(full, rel=1e-14)
    assert diss_along(traj, 2, 2, sc) == 0.0
    with pytest.raises(IndexError):
        diss_along(traj, 2, 1, sc)
    with pytest.raises(IndexError):
        diss_along(traj, 0, n, sc)


def test_stability_margin_zero_at_self_and_inf_for_healing():
    sc = SC
    f = random_state(sc, np.random.default_rng(4))
    f.u = sc.disc.solve_u(0.5, f.chi, f.d)
    rep = stability_check(0.5, f, sc, [CompetitorSpec("elastic-rebalance", 1)])
    assert abs(rep.min_margin) <= 1e-14 * (1 + abs(rep.energy))
    disc = sc.disc
    g = f.copy()
    g.chi = np.minimum(1.0, g.chi + 0.01)
    margin = disc.energy(0.5, g).total + float(disc.dissipation(f.chi, f.d, g.chi, g.d)) - rep.energy
    assert margin == math.inf


def test_competitors_are_feasible():
    from damageplast.energetics import generate_competitors

    sc = small_scenario(2, n=3, material=canned("bar1d").material.with_(k_set=cst.ConvexSetK.ball(0.4)))
    f = random_state(sc, np.random.default_rng(5), d_scale=0.1)
    f.d = sc.disc.project_d(f.d)
    for spec in default_competitors(sc.verification):
        u, chi, d = generate_competitors(0.3, f, sc, spec)
        assert len(chi) == spec.count
        assert np.all(chi >= 0) and np.all(chi <= f.chi[None, :])
        norms = np.sqrt(np.sum(d * d * sc.disc.weights, axis=-1))
        assert np.all(norms <= 0.4 * (1 + 1e-12))


def test_default_competitor_count():
    specs = default_competitors(canned("bar1d").verification)
    assert sum(s.count for s in specs) >= 1000
    assert {s.kind for s in specs} == {
        "uniform-damage-drop",
        "recovery",
        "random-perturbation",
        "d-perturbation",
        "elastic-rebalance",
    }
    with pytest.raises(ConfigurationError):
        CompetitorSpec("bogus", 1)
    with pytest.raises(ConfigurationError):
        CompetitorSpec("recovery", -1)


def test_balance_constant_trajectory():
    sc = small_scenario(
        1,
        dirichlet_mode="stretch",
        dirichlet_value=(0.1,),
        dirichlet_profile=TimeProfile("constant"),
    )
    traj = run_evolution(sc)
    rep = energy_balance_check(traj, sc)
    assert np.max(np.abs(rep.balance_gap)) <= 1e-12
    assert rep.upper_ok


def test_balance_report_relations():
    sc, traj = canned_run("bar1d")
    rep = energy_balance_check(traj, sc)
    assert len(rep.times) == len(traj)
    assert rep.balance_gap[0] == 0.0
    # the left-point gap is an upper bound, the right-point gap a lower bound
    assert np.all(rep.upper_gap <= rep.eps_bal)
    assert np.all(rep.lower_gap >= -rep.eps_bal)
    assert np.all(rep.upper_gap <= rep.balance_gap + 1e-14)
    assert np.all(rep.balance_gap <= rep.lower_gap + 1e-14)
    assert rep.dissipation[-1] == pytest.approx(diss_along(traj, 0, len(traj) - 1, sc), rel=1e-14)


def test_balance_gap_on_refinement():
    sc = canned("bar1d")
    ups, bs = [], []
    for n in (40, 80):
        rep = energy_balance_check(run_evolution(sc.with_(time=TimeGrid(sc.time.T, n))), sc)
        ups.append(abs(rep.upper_gap[-1]))
        bs.append(abs(rep.balance_gap[-1]))
    assert 1.7 <= ups[0] / ups[1] <= 2.3
    # the trapezoid gap converges faster than the one-sided estimates
    assert bs[0] / bs[1] >= 3.0


def test_condition_suite_passes():
    for name in ("bar1d", "plate2d"):
        rep = condition_suite(canned(name), samples=200, seed=1)
        failing = [k for k, (ok, _) in rep.checks.items() if not ok]
        assert rep.passed, failing
    with pytest.raises(ConfigurationError):
        condition_suite(canned("bar1d"), samples=0)


def test_energy_constants_positive():
    c = energy_constants(canned("plate2d"))
    assert c.K1 > 0 and c.K2 >= c.K1
    assert c.c0 > 0 and c.c1 > 0
    assert c.sublevel_bound(1.0) > c.sublevel_bound(0.0)


def test_cleavage_examples():
    mat = identity_material()
    assert mat.lame_lambda == 0.0
    e = np.array([1.0, 1.0, 0.0])  # identity in 2D
    # chi = 0.5, D = e
    xi = 0.5 * e
    dens = 0.5 * cst.degradation(0.5, mat) * cst.base_energy_arr(e - xi, mat)
    assert float(dens) == pytest.approx(0.25, rel=1e-15)
    rep = cleavage_reduction_check(e, chi_sample=0.0)
    assert rep.passed
    # chi = 1: the density does not see D
    for D in (np.zeros(3), np.array([0.3, -1.0, 2.0])):
        assert float(0.5 * cst.degradation(1.0, mat) * cst.base_energy_arr(e - 0.0 * D, mat)) == pytest.approx(1.0)


def test_cleavage_random_samples():
    rng = np.random.default_rng(9)
    for m in (1, 3, 6):
        rep = cleavage_reduction_check(rng.standard_normal((100 if m < 6 else 10, m)), seed=2, grid_points=41 if m < 6 else 9)
        assert rep.passed, rep


def test_cleavage_rejects_other_configurations():
    with pytest.raises(ConfigurationError):
        cleavage_reduction_check(np.ones(3), material=identity_material(subspace=SubspaceS.DEVIATORIC))
    with pytest.raises(ConfigurationError):
        cleavage_reduction_check(np.ones(3), material=identity_material(k_set=cst.ConvexSetK.ball(1.0)))
    with pytest.raises(ConfigurationError):
        cleavage_reduction_check(np.ones(3), material=cst.MaterialParams())


def test_planted_healing_is_reported():
    sc, traj = canned_run("tiny_bar")
    bad = Trajectory(list(traj.steps))
    st3 = bad.steps[3]
    f = st3.fields.copy()
    f.chi[0] = bad.steps[2].fields.chi[0] + 0.01
    bad.steps[3] = TrajectoryStep(st3.t, f, sc.disc.energy(st3.t, f), *([0.0] * 5), 0)
    found = invariant_violations(bad, sc)
    assert any("step 3" in v and "healing" in v for v in found)
    assert not invariant_violations(traj, sc)


def test_verify_canned_tiny_run():
    sc, traj = canned_run("tiny_bar")
    rep = verify_trajectory(traj, sc, conditions=True, samples=100)
    assert rep.passed, rep.findings
    assert len(rep.stability) == len(traj)
    assert rep.dissipation_total == pytest.approx(traj[-1].diss_cum, rel=1e-13)
    assert any("stability" in line for line in rep.summary_lines())
