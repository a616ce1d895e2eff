import numpy as np
import pytest

from conftest import canned, canned_run, soft_material
from damageplast import (
    InitialState,
    Loading,
    MeshSpec,
    OracleSizeError,
    Scenario,
    TimeGrid,
    TimeProfile,
    oracle_minimize,
)
from damageplast.oracle import _cell_lower_bound, _d_basis, incremental_objective, oracle_size
from damageplast.solver import initial_state
from damageplast.tensor import SubspaceS


def _bar(n_el=1, subspace=SubspaceS.FULL, **init):
    return Scenario(
        mesh_spec=MeshSpec(1, (1.0,), (n_el,), ("left",)),
        material=soft_material(subspace=subspace),
        loading=Loading(traction=(1.0,), force_profile=TimeProfile("linear-ramp", 0.0, 1.0)),
        time=TimeGrid(1.0, 3),
        initial=InitialState(**init),
    ).validated()


def test_zero_load_returns_previous():
    sc = Scenario(
        mesh_spec=MeshSpec(1, (1.0,), (1,), ("left",)),
        material=soft_material(plastic_gradient_weight=0.0),
        time=TimeGrid(1.0, 2),
        initial=InitialState(chi=1.0, d=(1.0,)),
    ).validated()
    prev = initial_state(sc)
    res = oracle_minimize(0.5, prev, sc, quantization=11)
    assert np.array_equal(res.fields.chi, prev.chi)
    assert np.allclose(res.fields.d, prev.d, atol=1e-15)
    assert res.objective == pytest.approx(sc.disc.energy(0.5, prev).total, abs=1e-15)


def test_refinement_is_nested():
    sc = _bar(2, SubspaceS.DEVIATORIC)
    assert oracle_size(sc) == (3, 0)
    prev = initial_state(sc)
    t = 1.0
    coarse = oracle_minimize(t, prev, sc, 11)
    fine = oracle_minimize(t, prev, sc, 21)
    assert fine.objective <= coarse.objective
    assert fine.n_candidates == 21**3


def test_refinement_full_subspace():
    sc = _bar(1)
    prev = initial_state(sc)
    coarse = oracle_minimize(1.0, prev, sc, 11)
    fine = oracle_minimize(1.0, prev, sc, 21)
    assert fine.objective <= coarse.objective
    assert coarse.quantization_gap >= 0


def test_deterministic():
    sc, traj = canned_run("tiny_bar")
    a = oracle_minimize(traj[2].t, traj[1].fields, sc, 7)
    b = oracle_minimize(traj[2].t, traj[1].fields, sc, 7)
    assert a.objective == b.objective
    assert np.array_equal(a.fields.chi, b.fields.chi)


def test_size_guards():
    with pytest.raises(OracleSizeError, match="nodal unknowns"):
        sc = canned("plate2d")
        oracle_minimize(0.1, initial_state(sc), sc)
    sc = canned("tiny_bar")
    prev = initial_state(sc)
    with pytest.raises(OracleSizeError, match="quantization"):
        oracle_minimize(0.1, prev, sc, 22)
    with pytest.raises(OracleSizeError, match="candidates"):
        oracle_minimize(0.1, prev, sc, 21)


def test_feasible_outcome_within_box():
    sc, traj = canned_run("tiny_bar")
    res = oracle_minimize(traj[3].t, traj[2].fields, sc, 9)
    assert np.all(res.fields.chi <= traj[2].fields.chi)
    assert np.all(res.fields.chi >= 0)
    assert res.objective == pytest.approx(incremental_objective(traj[3].t, res.fields, traj[2].fields, sc), rel=1e-10)


def test_d_basis_orthonormal():
    for dim in (1, 2):
        for sub in SubspaceS:
            E = _d_basis(dim, sub)
            w = np.ones(E.shape[1])
            w[dim:] = 2.0
            G = (E * w) @ E.T
            assert np.allclose(G, np.eye(len(E)), atol=1e-14)
    assert len(_d_basis(2, SubspaceS.DEVIATORIC)) == 2


def test_cell_lower_bound_brackets_quadratic():
    x = np.linspace(-1.0, 1.0, 5)
    grid = (x[:, None] - 0.13) ** 2 + (x[None, :] + 0.31) ** 2
    lb = _cell_lower_bound(grid)
    assert lb <= 0.0 <= grid.min()


def test_am_step_inside_oracle_bracket():
    from damageplast.solver import incremental_step

    sc = _bar(2, SubspaceS.DEVIATORIC)
    prev = initial_state(sc)
    for t in (0.5, 1.0):
        q, _ = incremental_step(t, prev, sc)
        am = incremental_objective(t, q, prev, sc)
        res = oracle_minimize(t, prev, sc, 21)
        assert am <= res.objective + 1e-6
        assert am >= res.objective - max(1e-6, res.quantization_gap)
