from pathlib import Path

import numpy as np
import pytest

from damageplast import (
    Loading,
    MaterialParams,
    MeshSpec,
    Scenario,
    TimeGrid,
    TimeProfile,
    run_evolution,
)
from damageplast.fem import energy_gradient_blocks
from damageplast.scenario_io import parse_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
CANNED = ("tiny_bar", "bar1d", "simplified", "plate2d", "activation")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def canned(name):
    return parse_scenario(SCENARIO_DIR / f"{name}.cfg")


_RUNS = {}


def canned_run(name):
    """Trajectories of the canned scenarios, computed once per session."""
    if name not in _RUNS:
        sc = canned(name)
        _RUNS[name] = (sc, run_evolution(sc))
    return _RUNS[name]


def soft_material(**kw):
    base = dict(
        w=0.05,
        alpha=0.01,
        beta=0.01,
        w1_variant="inhibit",
        nu_diss=0.05,
        mu_diss=0.3,
        k_min=0.1,
        plastic_well_weight=0.1,
        plastic_gradient_weight=0.01,
    )
    base.update(kw)
    return MaterialParams(**base)


def small_scenario(dim=1, n=4, n_steps=5, material=None, **loading):
    if dim == 1:
        ms = MeshSpec(1, (1.0,), (n,), ("left", "right"))
    else:
        ms = MeshSpec(2, (1.0, 1.0), (n, n), ("left",))
    ld = loading or dict(
        dirichlet_mode="stretch",
        dirichlet_value=(0.5,) + (0.0,) * (dim - 1),
        dirichlet_profile=TimeProfile("linear-ramp", 0.0, 1.0),
        body_force=(0.0,) * (dim - 1) + (-0.2,),
        force_profile=TimeProfile("constant"),
    )
    return Scenario(
        mesh_spec=ms,
        material=material or soft_material(),
        loading=Loading(**ld),
        time=TimeGrid(1.0, n_steps),
    ).validated()


def random_state(sc, rng, chi_lo=0.05, u_scale=0.1, d_scale=0.3):
    """Strictly feasible random fields (chi inside (0, 1), D projected)."""
    from damageplast.fem import StateFields

    disc = sc.disc
    N = disc.mesh.n_nodes
    u = u_scale * rng.standard_normal((N, disc.dim))
    u[disc.fixed] = 0.0
    chi = rng.uniform(chi_lo, 0.95, N)
    d = disc.project_d(d_scale * rng.standard_normal((N, disc.m)))
    return StateFields(u, chi, d)


def fd_gradient_errors(sc, seed, h=1e-6):
    """Relative errors of the (u, chi, D) gradient blocks against central differences."""
    rng = np.random.default_rng(seed)
    disc = sc.disc
    f = random_state(sc, rng)
    t = rng.uniform(0, sc.time.T)
    gu, gc, gd = energy_gradient_blocks(t, f, sc)

    def E(u, chi, d):
        return float(sum(disc.energy_parts(t, u, chi, d)))

    errs = []
    for block, g in (("u", gu), ("chi", gc), ("d", gd)):
        x = getattr(f, block)
        num = np.zeros_like(x)
        for i in np.ndindex(x.shape):
            if block == "u" and disc.fixed[i]:
                continue
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            args = {"u": f.u, "chi": f.chi, "d": f.d}
            fp = E(**{**args, block: xp})
            fm = E(**{**args, block: xm})
            num[i] = (fp - fm) / (2 * h)
        errs.append(np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-12))
    return errs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
