"""A-posteriori checks of discrete trajectories against the energetic formulation.

* dissipation distance and its accumulation along a trajectory;
* global stability, sampled with five competitor families;
* the two-sided energy balance;
* the structural conditions on energy and dissipation, with computable
  constants (:func:`energy_constants`);
* the pointwise cleavage reduction of the elastic density.

Stability cannot be decided by finite computation, so it is sampled. A
negative margin is a finding about the trajectory and comes with the
offending competitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constitutive as cst
from .exceptions import ConfigurationError
from .fem import StateFields, check_fields
from .scenario import VerificationConfig
from .tensor import SubspaceS, frob_inner_arr, frob_norm_arr

COMPETITOR_KINDS = (
    "uniform-damage-drop",
    "recovery",
    "random-perturbation",
    "d-perturbation",
    "elastic-rebalance",
)


# --- dissipation -----------------------------------------------------------


def _z(z):
    if isinstance(z, StateFields):
        return z.chi, z.d
    chi, d = z
    return np.asarray(chi, dtype=float), np.asarray(d, dtype=float)


def dissipation_distance(z1, z2, scenario):
    """``R(z2 - z1)`` with lumped quadrature; ``inf`` if damage would heal."""
    chi1, d1 = _z(z1)
    chi2, d2 = _z(z2)
    disc = scenario.disc
    N, m = disc.mesh.n_nodes, disc.m
    if chi1.shape != (N,) or chi2.shape != (N,) or d1.shape != (N, m) or d2.shape != (N, m):
        raise ValueError("internal variables do not conform to the mesh")
    return float(disc.dissipation(chi1, d1, chi2, d2))


def diss_along(trajectory, s_index, t_index, scenario):
    """Dissipation accumulated between two stored steps (sum of step distances)."""
    n = len(trajectory)
    if not (0 <= s_index <= t_index < n):
        raise IndexError(f"need 0 <= s <= t < {n}, got s={s_index}, t={t_index}")
    return float(
        sum(
            dissipation_distance(trajectory[k - 1].fields, trajectory[k].fields, scenario)
            for k in range(s_index + 1, t_index + 1)
        )
    )


# --- stability sampling ------------------------------------------------------


@dataclass(frozen=True)
class CompetitorSpec:
    """A family of competitors.

    ``delta`` bounds the damage drop (uniform drop and recovery);
    ``scale`` is the perturbation size (random and plastic perturbations).
    """

    kind: str
    count: int = 1
    delta: float = 0.5
    scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in COMPETITOR_KINDS:
            raise ConfigurationError(f"competitor kind must be one of {COMPETITOR_KINDS}")
        if self.count < 0 or self.delta < 0 or self.scale < 0:
            raise ConfigurationError("competitor count, delta and scale must be >= 0")


def default_competitors(vcfg=None):
    vcfg = vcfg or VerificationConfig()
    s = vcfg.seed
    return [
        CompetitorSpec("uniform-damage-drop", vcfg.n_drop, delta=vcfg.max_drop, seed=s),
        CompetitorSpec("recovery", vcfg.n_recovery, delta=vcfg.max_drop, seed=s + 1),
        CompetitorSpec("random-perturbation", vcfg.n_random, scale=vcfg.random_scale, seed=s + 2),
        CompetitorSpec("d-perturbation", vcfg.n_dperturb, scale=vcfg.d_scale, seed=s + 3),
        CompetitorSpec("elastic-rebalance", vcfg.n_rebalance, seed=s + 4),
    ]


def _bumps(rng, nodes, n):
    """``n`` random Gaussian bumps in [0, 1] over the nodes."""
    lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    centers = rng.uniform(lo, hi, size=(n, nodes.shape[1]))
    radii = rng.uniform(0.1, 1.0, size=n) * diam
    r2 = ((nodes[None, :, :] - centers[:, None, :]) ** 2).sum(axis=-1)
    return np.exp(-r2 / radii[:, None] ** 2)


def generate_competitors(t, fields, scenario, spec):
    """Competitor states ``(u, chi, d)`` as batched arrays for one family."""
    disc = scenario.disc
    rng = np.random.default_rng(spec.seed)
    n = spec.count
    N = disc.mesh.n_nodes
    chi, d, u = fields.chi, fields.d, fields.u
    if n == 0:
        return np.zeros((0,) + u.shape), np.zeros((0, N)), np.zeros((0,) + d.shape)
    resolve = True
    if spec.kind == "uniform-damage-drop":
        deltas = spec.delta * np.arange(1, n + 1) / n
        chi_b = np.maximum(chi[None, :] - deltas[:, None], 0.0)
        d_b = np.broadcast_to(d, (n,) + d.shape).copy()
    elif spec.kind == "recovery":
        amp = rng.uniform(0.0, spec.delta, size=n)
        target = np.clip(chi[None, :] - amp[:, None] * _bumps(rng, disc.mesh.nodes, n), 0.0, 1.0)
        dk = rng.uniform(0.0, 0.5, size=n) * amp
        chi_b = np.minimum(chi[None, :], np.maximum(0.0, target - dk[:, None]))
        d_b = np.broadcast_to(d, (n,) + d.shape).copy()
    elif spec.kind == "random-perturbation":
        resolve = False
        du = spec.scale * rng.standard_normal((n,) + u.shape)
        du[:, disc.fixed] = 0.0
        u_b = u[None] + du
        chi_b = np.clip(chi[None, :] - spec.scale * rng.uniform(size=(n, N)), 0.0, chi[None, :])
        dd = spec.scale * rng.standard_normal((n,) + d.shape)
        d_b = disc.project_d(d[None] + dd)
    elif spec.kind == "d-perturbation":
        mask = _bumps(rng, disc.mesh.nodes, n)
        dd = spec.scale * rng.standard_normal((n,) + d.shape) * mask[..., None]
        d_b = disc.project_d(d[None] + dd)
        chi_b = np.broadcast_to(chi, (n, N)).copy()
    else:  # elastic-rebalance
        chi_b = np.broadcast_to(chi, (n, N)).copy()
        d_b = np.broadcast_to(d, (n,) + d.shape).copy()
    if resolve:
        u_b = disc.solve_u_many(t, chi_b, d_b, rtol=scenario.solver.cg_rtol)
    return u_b, chi_b, d_b


@dataclass
class StabilityReport:
    t: float
    energy: float
    min_margin: float
    eps_stab: float
    n_competitors: int
    n_infinite: int
    per_kind: dict
    worst_kind: str | None = None
    worst_index: int | None = None
    worst_competitor: StateFields | None = None

    @property
    def violated(self):
        return self.min_margin < -self.eps_stab


def stability_check(t, fields, scenario, specs=None):
    """Sampled stability margins ``E(t, q~) + R(q~ - q) - E(t, q)``."""
    check_fields(fields, scenario)
    disc = scenario.disc
    vcfg = scenario.verification
    specs = default_competitors(vcfg) if specs is None else specs
    E0 = disc.energy(t, fields).total
    eps = vcfg.eps_stab_rel * (1.0 + abs(E0))
    worst = (math.inf, None, None, None)
    per_kind = {}
    total = n_inf = 0
    for spec in specs:
        u_b, chi_b, d_b = generate_competitors(t, fields, scenario, spec)
        if len(chi_b) == 0:
            continue
        E_b = disc.energy_batch(t, u_b, chi_b, d_b)
        R_b = disc.dissipation(fields.chi, fields.d, chi_b, d_b)
        margin = E_b + R_b - E0
        total += len(margin)
        n_inf += int(np.sum(~np.isfinite(margin)))
        j = int(np.argmin(margin))
        per_kind[spec.kind] = min(per_kind.get(spec.kind, math.inf), float(margin[j]))
        if margin[j] < worst[0]:
            worst = (float(margin[j]), spec.kind, j, StateFields(u_b[j], chi_b[j], d_b[j]))
    return StabilityReport(t, E0, worst[0], eps, total, n_inf, per_kind, *worst[1:])


# --- energy balance ------------------------------------------------------------


@dataclass
class BalanceReport:
    """Per stored step ``k``.

    ``balance_gap``: ``E_k + Diss_k - E_0 - P_k`` with the power integral
    ``P_k`` by the trapezoidal rule at stored states.
    ``upper_gap``: the same with the power integrated exactly along the
    left-continuous piecewise-constant interpolant, i.e.
    ``sum_j E(t_j, q_{j-1}) - E(t_{j-1}, q_{j-1})``; step minimality makes it
    nonpositive.
    ``lower_gap``: power integrated along the right-continuous interpolant;
    nonnegative whenever every stored state is stable.
    """

    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    power_integral: np.ndarray
    balance_gap: np.ndarray
    upper_gap: np.ndarray
    lower_gap: np.ndarray
    eps_bal: np.ndarray

    @property
    def upper_ok(self):
        return bool(np.all(self.upper_gap <= self.eps_bal))

    @property
    def first_upper_violation(self):
        bad = np.flatnonzero(self.upper_gap > self.eps_bal)
        return int(bad[0]) if len(bad) else None


def energy_balance_check(trajectory, scenario):
    disc = scenario.disc
    steps = trajectory.steps
    ts = np.array([s.t for s in steps])
    E = np.array([disc.energy(s.t, s.fields).total for s in steps])
    inc = np.array(
        [0.0]
        + [
            dissipation_distance(steps[k - 1].fields, steps[k].fields, scenario)
            for k in range(1, len(steps))
        ]
    )
    diss = np.cumsum(inc)
    P = np.array([disc.power(s.t, s.fields) for s in steps])
    trap = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (P[1:] + P[:-1]))])
    left = np.concatenate(
        [
            [0.0],
            np.cumsum(
                [
                    disc.energy(steps[k].t, steps[k - 1].fields).total - E[k - 1]
                    for k in range(1, len(steps))
                ]
            ),
        ]
    )
    right = np.concatenate(
        [
            [0.0],
            np.cumsum(
                [
                    E[k] - disc.energy(steps[k - 1].t, steps[k].fields).total
                    for k in range(1, len(steps))
                ]
            ),
        ]
    )
    base = E + diss - E[0]
    eps = scenario.verification.eps_bal_rel * (1.0 + np.abs(E))
    return BalanceReport(ts, E, diss, trap, base - trap, base - left, base - right, eps)


# --- constants of the structural conditions -------------------------------------


@dataclass(frozen=True)
class EnergyConstants:
    """Constants of the discrete coercivity and power-control estimates.

    Norms: ``|e|`` is the L2 norm of element strains, ``|D|`` the L2 norm
    of barycentric plastic strains, ``|chi|`` the lumped L2 norm. ``F`` and
    ``dF`` are sup-in-time dual norms of the load and its rate with respect
    to ``|e(u)|``; ``CD``, ``dCD`` the sup-in-time norms of ``e_D`` and its
    rate.
    """

    K1: float
    K2: float
    F: float
    dF: float
    CD: float
    dCD: float
    volume: float
    well_weight: float
    radius: float | None
    T: float

    def C_plastic(self, k):
        """``C(k)`` with ``k |D|^2 <= G(D) + C(k)`` (``inf`` if no bound is available)."""
        out = math.inf
        if self.well_weight > 0:
            out = (k + k * k / (4.0 * self.well_weight)) * self.volume
        if self.radius is not None:
            out = min(out, k * self.radius**2 * self.volume)
        return out

    @property
    def C_W(self):
        return self.K1 * self.CD**2 + 2.0 * self.F**2 / self.K1

    # W - <F,u> >= cW |e(u)|^2 - tcW |D|^2 - C_W
    @property
    def c_W(self):
        return self.K1 / 8.0

    @property
    def tc_W(self):
        return self.K1

    @property
    def c1(self):
        return 2.0

    @property
    def c0(self):
        rest = (
            self.C_W
            + self.C_plastic(self.K1)
            + 0.5 * self.K2 * self.dCD**2
            + 2.0 * (self.F + self.dF) ** 2 / self.K1
        )
        return 0.5 * rest

    def c_E(self, E):
        """Time-Lipschitz constant on the sublevel ``{energy <= E}``."""
        c1, T = self.c1, self.T
        fac = max(1.0, (1.0 - math.exp(-c1 * T)) / T)
        return fac * math.exp(c1 * T) * (E + self.c0)

    def sublevel_bound(self, E):
        """Bound on ``|e(u)| + |chi| + |D|`` over ``{energy <= E}``."""
        if self.well_weight > 0 or self.radius is None:
            A = E + self.C_W + self.C_plastic(self.K1 + 1.0)
            if not math.isfinite(A):
                return math.inf
            d_bound = math.sqrt(max(A, 0.0))
        else:
            A = E + self.C_W + self.K1 * self.radius**2 * self.volume
            d_bound = self.radius * math.sqrt(self.volume)
        return math.sqrt(max(8.0 * A / self.K1, 0.0)) + math.sqrt(self.volume) + d_bound


def _strain_gram(disc):
    """``A`` with ``u^T A u = |e(u)|^2`` on the free dofs."""
    WB = disc.weights[None, :, None] * disc.B
    ke = np.einsum("e,eca,ecb->eab", disc.vol, disc.B, WB)
    A = np.zeros((disc.ndof, disc.ndof))
    np.add.at(A, (disc.rows, disc.cols), ke.ravel())
    f = disc.free
    return A[np.ix_(f, f)]


def _sup_times(scenario):
    ld = scenario.effective_loading
    T = scenario.time.T
    pts = {0.0, T}
    for p in (ld.dirichlet_profile, ld.force_profile):
        pts.update(b for b in p.breakpoints() if 0.0 <= b <= T)
    return sorted(pts)


def energy_constants(scenario):
    disc = scenario.disc
    mat = scenario.material
    K1, K2 = mat.stiffness_bounds(disc.dim)
    A = _strain_gram(disc)
    f = disc.free
    ld = scenario.effective_loading

    def dual(v):
        v = v.ravel()[f]
        return float(math.sqrt(max(v @ np.linalg.solve(A, v), 0.0)))

    def l2(e):
        return float(math.sqrt(np.sum(disc.vol * frob_inner_arr(e, e))))

    ts = _sup_times(scenario)
    pF = max(abs(float(ld.force_profile.value(t))) for t in ts)
    pdF = max(abs(float(ld.force_profile.rate(t))) for t in ts)
    pD = max(abs(float(ld.dirichlet_profile.value(t))) for t in ts)
    pdD = max(abs(float(ld.dirichlet_profile.rate(t))) for t in ts)
    fF, eD = dual(disc.force_mode), l2(disc.e_mode)
    return EnergyConstants(
        K1=K1,
        K2=K2,
        F=pF * fF,
        dF=pdF * fF,
        CD=pD * eD,
        dCD=pdD * eD,
        volume=disc.mesh.volume,
        well_weight=mat.plastic_well_weight,
        radius=mat.k_set.radius,
        T=scenario.time.T,
    )


# --- condition suite -------------------------------------------------------------


def random_feasible_states(scenario, n, rng, u_scale=0.5, d_scale=0.5):
    """Random feasible ``(u, chi, d)`` batches."""
    disc = scenario.disc
    N = disc.mesh.n_nodes
    u = u_scale * rng.standard_normal((n, N, disc.dim))
    u[:, disc.fixed] = 0.0
    chi = rng.uniform(size=(n, N))
    chi[rng.uniform(size=(n, N)) < 0.1] = 0.0
    chi[rng.uniform(size=(n, N)) < 0.1] = 1.0
    d = disc.project_d(d_scale * rng.standard_normal((n, N, disc.m)))
    return u, chi, d


@dataclass
class ConditionReport:
    n_samples: int
    constants: EnergyConstants
    checks: dict = field(default_factory=dict)  # name -> (passed, worst measured value)

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())


def condition_suite(scenario, samples=1000, seed=0):
    """Sample the structural inequalities with the constants of :func:`energy_constants`.

    Each check records ``(passed, worst)``, where ``worst`` is the largest
    measured ratio of left- to right-hand side (or the largest violation for
    the exact identities).
    """
    if samples < 1:
        raise ConfigurationError("condition_suite needs at least one sample")
    disc = scenario.disc
    mat = scenario.material
    rng = np.random.default_rng(seed)
    const = energy_constants(scenario)
    T = scenario.time.T
    n = samples
    u, chi, d = random_feasible_states(scenario, n, rng)
    t = rng.uniform(0.0, T, size=n)
    s = rng.uniform(0.0, T, size=n)
    checks = {}

    # inelastic strain never exceeds the plastic strain
    chibar, dbar = disc.bary(chi, d)
    xi = cst.eval_xi(chibar, dbar)
    over = frob_norm_arr(xi) - frob_norm_arr(dbar)
    checks["xi_growth"] = (bool(np.all(over <= 0.0)), float(over.max()))

    # stiffness bounds on random strains
    K1, K2 = mat.stiffness_bounds(disc.dim)
    e = rng.standard_normal((n, disc.m))
    cs = rng.uniform(size=n)
    quad = cst.degradation(cs, mat) * cst.base_energy_arr(e, mat)
    nrm2 = frob_inner_arr(e, e)
    lo = K1 * nrm2 - quad
    hi = quad - K2 * nrm2
    tol = 1e-12 * (1.0 + np.abs(quad))
    checks["stiffness_bounds"] = (
        bool(np.all(lo <= tol) and np.all(hi <= tol)),
        float(max(lo.max(), hi.max())),
    )

    # coupling term is nonnegative
    Hv = cst.eval_H(chi, d, mat)
    checks["H_nonnegative"] = (bool(np.all(Hv >= 0.0)), float(-np.min(Hv)))

    E = np.empty(n)
    P = np.empty(n)
    Es = np.empty(n)
    W = np.empty(n)
    for i in range(n):
        parts = disc.energy_parts(t[i], u[i], chi[i], d[i])
        E[i] = float(sum(parts))
        W[i] = float(parts[0])
        P[i] = disc.power(t[i], StateFields(u[i], chi[i], d[i]))
        Es[i] = float(sum(disc.energy_parts(s[i], u[i], chi[i], d[i])))

    # power control
    rhs = const.c1 * (const.c0 + E)
    ratio = np.abs(P) / np.maximum(rhs, 1e-300)
    checks["power_control"] = (bool(np.all(np.abs(P) <= rhs * (1 + 1e-12))), float(ratio.max()))

    # lower bound of the stored elastic energy minus work
    strain = disc.strain(u)
    eu2 = np.einsum("e,ne->n", disc.vol, frob_inner_arr(strain, strain))
    d2 = np.einsum("e,ne->n", disc.vol, frob_inner_arr(dbar, dbar))
    lower = const.c_W * eu2 - const.tc_W * d2 - const.C_W
    checks["W_lower_bound"] = (bool(np.all(W >= lower - 1e-12 * (1 + np.abs(W)))), float(np.max(lower - W)))

    # sublevel norm bound
    chi2 = chi**2 @ disc.lumped
    norms = np.sqrt(eu2) + np.sqrt(chi2) + np.sqrt(d2)
    bounds = np.array([const.sublevel_bound(Ei) for Ei in E])
    checks["sublevel_bound"] = (bool(np.all(norms <= bounds)), float(np.max(norms / bounds)))

    # time Lipschitz estimate on the sublevel of each sample
    cE = np.array([const.c_E(max(Ei, Esi)) for Ei, Esi in zip(E, Es)])
    lip = np.abs(E - Es) - cE * np.abs(t - s)
    checks["time_lipschitz"] = (
        bool(np.all(lip <= 1e-12 * (1 + np.abs(E)))),
        float(np.max(np.abs(E - Es) / np.maximum(cE * np.abs(t - s), 1e-300))),
    )

    # dissipation: quasi-distance properties on random triples
    chi1 = chi
    chi2_ = chi1 * rng.uniform(size=chi1.shape)
    chi3 = chi2_ * rng.uniform(size=chi1.shape)
    d1, d2_, d3 = d, disc.project_d(d + 0.3 * rng.standard_normal(d.shape)), disc.project_d(
        d + 0.3 * rng.standard_normal(d.shape)
    )
    D12 = disc.dissipation(chi1, d1, chi2_, d2_)
    D23 = disc.dissipation(chi2_, d2_, chi3, d3)
    D13 = disc.dissipation(chi1, d1, chi3, d3)
    tri = D13 - D12 - D23
    checks["dissipation_triangle"] = (bool(np.all(tri <= 1e-12)), float(tri.max()))
    D11 = disc.dissipation(chi1, d1, chi1, d1)
    distinct = np.any(chi1 != chi2_, axis=1) | np.any(d1 != d2_, axis=(1, 2))
    checks["dissipation_identity"] = (
        bool(np.all(D11 == 0.0) and np.all(D12[distinct] > 0.0)),
        float(np.max(D11)),
    )
    up = disc.dissipation(chi3, d3, chi1, d1)
    heal = np.any(chi1 > chi3, axis=1)
    finite_heal = int(np.sum(np.isfinite(up[heal])))
    checks["dissipation_unidirectional"] = (finite_heal == 0, float(finite_heal))

    # lower semicontinuity along converging sequences z_j -> z
    seq_ok, worst = True, 0.0
    for i in range(min(n, 50)):
        lim = float(disc.dissipation(chi1[i], d1[i], chi2_[i], d2_[i]))
        vals = []
        for j in range(1, 10):
            h = 10.0**-j
            a = np.clip(chi1[i] + h * rng.uniform(-1, 1, chi1.shape[1]), 0.0, 1.0)
            b = np.minimum(a, np.clip(chi2_[i] + h * rng.uniform(-1, 1, chi1.shape[1]), 0.0, 1.0))
            vals.append(float(disc.dissipation(a, d1[i], b, disc.project_d(d2_[i] + h))))
        liminf = min(vals[-3:])
        seq_ok &= lim <= liminf + 1e-6 * (1.0 + lim) or math.isinf(liminf)
        worst = max(worst, lim - liminf)
    checks["dissipation_lsc"] = (bool(seq_ok), float(worst))

    # continuity of the inelastic strain along converging sequences
    cont_ok, worst = True, 0.0
    for i in range(min(n, 50)):
        cb, db = chibar[i], dbar[i]
        for j in range(1, 8):
            h = 2.0**-j
            cj = np.clip(cb + h * rng.uniform(-1, 1, cb.shape), 0.0, 1.0)
            dj = db + h * rng.standard_normal(db.shape)
            diff = cst.eval_xi(cj, dj) - cst.eval_xi(cb, db)
            lhs = math.sqrt(np.sum(disc.vol * frob_inner_arr(diff, diff)))
            rd = dj - db
            rc = (cb - cj)[:, None] * db
            bound = math.sqrt(np.sum(disc.vol * frob_inner_arr(rd, rd))) + math.sqrt(
                np.sum(disc.vol * frob_inner_arr(rc, rc))
            )
            cont_ok &= lhs <= bound * (1 + 1e-12) + 1e-15
            worst = max(worst, lhs / max(bound, 1e-300))
    checks["xi_continuity"] = (bool(cont_ok), float(worst))
    return ConditionReport(n, const, checks)


# --- cleavage reduction ------------------------------------------------------------


@dataclass
class CleavageReport:
    n_samples: int
    max_rel_err_minimizer: float
    max_rel_err_density: float
    max_grid_gap: float
    grid_spacing: float
    tolerance: float = 1e-6

    @property
    def passed(self):
        return (
            self.max_rel_err_minimizer <= self.tolerance
            and self.max_rel_err_density <= self.tolerance
            and self.max_grid_gap <= self.grid_spacing
        )


def identity_material(**changes):
    """Material with identity stiffness (``lame_lambda=0``, ``lame_mu=1/2``, ``k_min=1``)."""
    base = cst.MaterialParams(lame_lambda=0.0, lame_mu=0.5, k_min=1.0)
    return base.with_(**changes) if changes else base


def cleavage_reduction_check(strain_sample, chi_sample=None, material=None, grid_points=41, seed=0):
    """Pointwise reduction of the elastic density for fully damaged material.

    At ``chi=0`` the elastic density ``1/2 (e - D) : K(0) : (e - D)`` is
    minimized over ``D`` in closed form (a linear solve in component
    space), which must return ``D = e`` for the full strain space. With
    identity stiffness, inserting ``D = e`` at damage ``chi`` must give
    ``1/2 chi^2 |e|^2``. A dense grid search over ``D`` confirms the
    minimizer to within the grid spacing.
    """
    mat = material or identity_material()
    if mat.subspace is not SubspaceS.FULL:
        raise ConfigurationError("the cleavage reduction needs the full strain space S")
    if mat.k_set.radius is not None:
        raise ConfigurationError("the cleavage reduction needs K equal to all of S")
    if not (mat.lame_lambda == 0.0 and mat.lame_mu == 0.5 and mat.k_min == 1.0):
        raise ConfigurationError("the cleavage reduction is stated for identity stiffness")
    e = np.atleast_2d(np.asarray(strain_sample, dtype=float))
    n, m = e.shape
    dim = {1: 1, 3: 2, 6: 3}[m]
    rng = np.random.default_rng(seed)
    chi = rng.uniform(size=n) if chi_sample is None else np.broadcast_to(chi_sample, (n,))

    # closed form at chi = 0: normal equations of the quadratic form, built by polarization
    Q = _quadratic_form_matrix(lambda x: cst.degradation(0.0, mat) * cst.base_energy_arr(x, mat), m)
    D_star = np.linalg.solve(Q, Q @ e.T).T
    scale = np.maximum(frob_norm_arr(e), 1e-300)
    err_min = float(np.max(frob_norm_arr(D_star - e) / scale))

    def density(c, D):
        xi = (1.0 - c)[..., None] * D
        eps = e - xi if D.ndim == e.ndim else e[:, None, :] - xi
        return 0.5 * cst.degradation(c, mat) * cst.base_energy_arr(eps, mat)

    red = density(chi, D_star)
    exact = 0.5 * chi**2 * frob_inner_arr(e, e)
    err_den = float(np.max(np.abs(red - exact) / np.maximum(np.abs(exact), 1e-300)))
    err_den = 0.0 if np.all(exact == 0) and np.all(red == 0) else err_den

    # grid search over D at chi = 0, one axis per component
    R = float(np.max(np.abs(e))) * 1.25 + 1e-12
    ax = np.linspace(-R, R, grid_points)
    h = ax[1] - ax[0]
    grids = np.stack(np.meshgrid(*([ax] * m), indexing="ij"), axis=-1).reshape(-1, m)
    gap = 0.0
    for i in range(n):
        vals = 0.5 * cst.base_energy_arr(e[i][None, :] - grids, mat)
        best = grids[np.argmin(vals)]
        gap = max(gap, float(np.max(np.abs(best - e[i]))))
    return CleavageReport(n, err_min, err_den, gap, float(h))


def _quadratic_form_matrix(f, m):
    """Symmetric ``Q`` with ``f(x) = x^T Q x`` for a quadratic form ``f``."""
    eye = np.eye(m)
    Q = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            Q[i, j] = 0.25 * (f(eye[i] + eye[j]) - f(eye[i] - eye[j]))
    return Q


# --- full trajectory report ----------------------------------------------------------


@dataclass
class VerificationReport:
    stability: list
    balance: BalanceReport
    invariant_violations: list
    conditions: ConditionReport | None = None

    @property
    def dissipation_total(self):
        return float(self.balance.dissipation[-1])

    @property
    def power_integral(self):
        return float(self.balance.power_integral[-1])

    @property
    def stability_violations(self):
        return [k for k, r in enumerate(self.stability) if r.violated]

    @property
    def findings(self):
        """Human-readable list of everything that failed."""
        out = list(self.invariant_violations)
        for k in self.stability_violations:
            r = self.stability[k]
            out.append(
                f"step {k} (t={r.t:.6g}): stability margin {r.min_margin:.3e} below "
                f"-{r.eps_stab:.1e} for a {r.worst_kind} competitor"
            )
        k = self.balance.first_upper_violation
        if k is not None:
            out.append(
                f"step {k} (t={self.balance.times[k]:.6g}): upper energy gap "
                f"{self.balance.upper_gap[k]:.3e} exceeds {self.balance.eps_bal[k]:.1e}"
            )
        if self.conditions is not None:
            out += [f"condition {n} failed (worst {v:.3e})" for n, (ok, v) in self.conditions.checks.items() if not ok]
        return out

    @property
    def passed(self):
        return not self.findings

    def summary_lines(self):
        b = self.balance
        lines = [
            f"steps: {len(b.times)}",
            f"worst stability margin: {min(r.min_margin for r in self.stability):.6e}"
            if self.stability
            else "worst stability margin: n/a",
            f"balance gap at T (trapezoidal power): {b.balance_gap[-1]:.6e}",
            f"upper gap max: {b.upper_gap.max():.6e}   lower gap min: {b.lower_gap.min():.6e}",
            f"dissipation total: {self.dissipation_total:.6e}   power integral: {self.power_integral:.6e}",
        ]
        lines += [f"FINDING: {f}" for f in self.findings]
        return lines


def invariant_violations(trajectory, scenario):
    """Unidirectionality and feasibility of the internal variables at every stored step."""
    out = []
    mat = scenario.material
    prev = None
    for k, s in enumerate(trajectory.steps):
        chi, d = s.fields.chi, s.fields.d
        if np.any(chi < 0.0) or np.any(chi > 1.0) or not np.all(np.isfinite(chi)):
            out.append(f"step {k} (t={s.t:.6g}): damage outside [0, 1]")
        if not np.all(cst.in_admissible_set(d, mat)):
            out.append(f"step {k} (t={s.t:.6g}): plastic strain outside K and S")
        if prev is not None:
            up = np.flatnonzero(chi > prev)
            if len(up):
                out.append(f"step {k} (t={s.t:.6g}): damage increased (healing) at nodes {up.tolist()}")
        prev = chi
    return out


def verify_trajectory(trajectory, scenario, specs=None, conditions=False, samples=1000):
    inv = invariant_violations(trajectory, scenario)
    stab = [] if inv else [stability_check(s.t, s.fields, scenario, specs) for s in trajectory.steps]
    bal = energy_balance_check(trajectory, scenario)
    cond = condition_suite(scenario, samples, scenario.verification.seed) if conditions else None
    return VerificationReport(stab, bal, inv, cond)
