"""Time-incremental minimization by alternating minimization (AM).

Each time step minimizes ``E(t_k, q) + R(z - z_{k-1})`` over ``q = (u, chi, D)``
by sweeps of

1. an exact elastic solve in ``u``,
2. proximal-gradient iterations in ``chi``,
3. proximal-gradient iterations in ``D``.

The proximal steps use the lumped-mass metric, so the nonsmooth terms
decouple node by node: for the damage, a one-sided soft threshold followed
by clamping to ``[0, chi_prev]``; for the plastic strain, shrinkage toward
``D_prev`` followed by projection onto ``K`` (in ``S``). Steps are accepted
only under the usual sufficient-decrease test, so the objective never
increases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, DomainError, SolverError
from .fem import EnergyBreakdown, StateFields, check_fields
from .scenario import SolverConfig
from .tensor import frob_inner_arr, frob_norm_arr

logger = logging.getLogger(__name__)

# relative slack for the sweep-monotonicity assertion
_MONO_TOL = 1e-13
# extra sweeps granted when the objective is flat but not yet stationary;
# a sweep only counts against this budget if the residual did not shrink
# below _RES_PROGRESS times its previous value
_EXTRA_SWEEPS = 3
_RES_PROGRESS = 0.9
# inner block iterations stop once the prox-gradient mapping is this fraction
# of the stationarity tolerance
_INNER_FRACTION = 0.1
# decreases below this (relative) are round-off; sufficient-decrease tests
# tolerate it so that the step size does not collapse near convergence
_ROUND = 1e-15
# a block never starts with a step below this fraction of prox_step_init
_TAU_FLOOR = 1e-6
_TAU_CAP = 1e3
_MAX_BACKTRACK = 60


@dataclass
class StepDiagnostics:
    objective: float
    reference_objective: float
    sweeps: int
    stationarity: float
    converged: bool
    stalled: bool = False
    message: str = ""


@dataclass
class TrajectoryStep:
    t: float
    fields: StateFields
    energy: EnergyBreakdown
    diss_increment: float
    diss_cum: float
    power: float
    power_integral: float
    sweeps: int
    stationarity: float
    converged: bool = True


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)
    complete: bool = True
    error: str | None = None

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, k):
        return self.steps[k]

    @property
    def times(self):
        return np.array([s.t for s in self.steps])

    @property
    def energies(self):
        return np.array([s.energy.total for s in self.steps])

    @property
    def stalled_steps(self):
        return [k for k, s in enumerate(self.steps) if not s.converged]


def _objective(disc, t, u, chi, d, chi_p, d_p):
    W, J, G, H = disc.energy_parts(t, u, chi, d)
    return float(W + J + G + H) + float(disc.dissipation(chi_p, d_p, chi, d))


def _prox_gradient(x, smooth, grad, prox, nonsmooth, pair, mass, tau, cfg, tol):
    """Proximal-gradient iterations on one block with backtracking.

    ``pair(a, b)`` sums the nodal pairing of a gradient-like and a step-like
    array; ``mass`` is the nodal metric. A step is accepted when the
    composite sufficient-decrease test holds. Once the predicted change drops
    to round-off level that test is no longer decidable, and a step is then
    accepted only if the local Lipschitz estimate from the gradient change
    certifies ``tau * L <= 1``.
    """
    tau = max(tau, _TAU_FLOOR * cfg.prox_step_init)
    f0, h0, g = smooth(x), nonsmooth(x), grad(x)
    for _ in range(cfg.prox_max_iters):
        accepted = False
        for _ in range(_MAX_BACKTRACK):
            new = prox(x, g, tau)
            s = new - x
            if not np.any(s):
                return x, tau
            quad = 0.5 / tau * pair(s * mass, s)
            model = f0 + pair(g, s) + quad
            f1 = smooth(new)
            h1 = nonsmooth(new)
            slack = _ROUND * (1.0 + abs(f0) + abs(h0))
            if quad > 1e3 * slack:
                accepted = f1 <= model + slack and f1 + h1 <= f0 + h0 + slack
                g1 = grad(new) if accepted else None
            else:
                g1 = grad(new)
                y = g1 - g
                L = np.sqrt(pair(y / mass, y) / pair(s * mass, s))
                accepted = tau * L <= 1.0
            if accepted:
                break
            tau *= cfg.backtrack_factor
        if not accepted:
            break
        gmap = np.max(np.sqrt((s * s).reshape(len(s), -1).sum(axis=1))) / tau
        # Barzilai-Borwein guess for the next trial step
        sy = pair(g1 - g, s)
        tau = pair(s * mass, s) / sy if sy > 0 else tau / cfg.backtrack_factor
        tau = min(tau, _TAU_CAP * cfg.prox_step_init)
        x, f0, h0, g = new, f1, h1, g1
        if gmap <= tol:
            break
    return x, tau


def _chi_block(disc, t, u, chi, d, chi_p, d_p, tau, cfg, tol):
    nu = disc.material.nu_diss
    mass = disc.lumped

    def prox(x, g, tau):
        return np.clip(x - tau * g / mass + tau * nu, 0.0, chi_p)

    return _prox_gradient(
        chi,
        lambda c: _smooth(disc, t, u, c, d),
        lambda c: disc.gradients(t, u, c, d)[1],
        prox,
        lambda c: float(disc.dissipation(chi_p, d_p, c, d)),
        lambda a, b: float(np.sum(a * b)),
        mass,
        tau,
        cfg,
        tol,
    )


def _d_block(disc, t, u, chi, d, chi_p, d_p, tau, cfg, tol):
    mu = disc.material.mu_diss
    mass = disc.lumped[:, None]

    def prox(x, g, tau):
        diff = x - tau * g / mass - d_p
        nrm = frob_norm_arr(diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(nrm > 0, np.maximum(0.0, 1.0 - tau * mu / nrm), 0.0)
        moved = fac > 0
        new = d_p.copy()
        if np.any(moved):
            new[moved] = disc.project_d(d_p[moved] + fac[moved, None] * diff[moved])
        return new

    def grad(x):
        return disc.project_gradient_d(disc.gradients(t, u, chi, x, frobenius=True)[2])

    return _prox_gradient(
        d,
        lambda x: _smooth(disc, t, u, chi, x),
        grad,
        prox,
        lambda x: float(disc.dissipation(chi_p, d_p, chi, x)),
        lambda a, b: float(np.sum(frob_inner_arr(a, b))),
        mass,
        tau,
        cfg,
        tol,
    )


def _smooth(disc, t, u, chi, d):
    W, J, G, H = disc.energy_parts(t, u, chi, d)
    return float(W + J + G + H)


def inclusion_residual(disc, t, fields, previous):
    """Largest nodal violation of the discrete first-order inclusion.

    For every node, the distance (per unit lumped mass) between minus the
    smooth gradient and the subdifferential of the nonsmooth terms
    (dissipation at the computed increment plus the constraint indicators).
    """
    return float(max(v.max() for v in residual_parts(disc, t, fields, previous).values()))


def residual_parts(disc, t, fields, previous):
    """Nodal inclusion residuals per unknown block: ``{"u", "chi", "d"}``."""
    mat = disc.material
    gu, gchi, gF = disc.gradients(t, fields.u, fields.chi, fields.d, frobenius=True)
    mass = disc.lumped
    r_u = np.linalg.norm(gu, axis=1) / mass

    nu = mat.nu_diss
    v = -gchi / mass
    chi, dchi = fields.chi, fields.chi - previous.chi
    r_chi = np.where(
        dchi < 0,
        np.where(chi > 0, np.abs(v + nu), np.maximum(0.0, v + nu)),
        np.where(chi > 0, np.maximum(0.0, -nu - v), 0.0),
    )

    mu = mat.mu_diss
    V = -disc.project_gradient_d(gF) / mass[:, None]
    dD = fields.d - previous.d
    ndD = frob_norm_arr(dD)
    moved = ndD > 0
    n = np.zeros_like(dD)
    n[moved] = dD[moved] / ndD[moved, None]
    rho = mat.k_set.radius
    nD = frob_norm_arr(fields.d)
    on_bdry = np.zeros(len(nD), dtype=bool) if rho is None else nD >= rho * (1 - 1e-12)
    Dhat = np.zeros_like(dD)
    Dhat[on_bdry] = fields.d[on_bdry] / nD[on_bdry, None]

    Wv = np.where(moved[:, None], V - mu * n, V)
    lam = np.where(on_bdry, np.maximum(0.0, frob_inner_arr(Wv, Dhat)), 0.0)
    rem = frob_norm_arr(Wv - lam[:, None] * Dhat)
    r_d = np.where(moved, rem, np.maximum(0.0, rem - mu))
    return {"u": r_u, "chi": r_chi, "d": r_d}


def incremental_step(t, previous, scenario, config=None):
    """One time-incremental AM minimization; returns ``(fields, StepDiagnostics)``."""
    cfg = config or scenario.solver
    disc = scenario.disc
    check_fields(previous, scenario)
    chi_p, d_p = previous.chi.copy(), previous.d.copy()
    chi, d = chi_p.copy(), d_p.copy()
    u = disc.solve_u(t, chi, d, rtol=cfg.cg_rtol)
    obj = _objective(disc, t, u, chi, d, chi_p, d_p)
    ref = obj
    res = inclusion_residual(disc, t, StateFields(u, chi, d), previous)
    tau_c = tau_d = cfg.prox_step_init
    extra = 0
    converged = res <= cfg.stationarity_tol
    stalled = False
    message = ""
    sweeps = 0
    for sweeps in range(1, 0 if converged else cfg.am_max_sweeps + 1):
        # inner accuracy follows the outer residual, never below the target
        tol = _INNER_FRACTION * max(cfg.stationarity_tol, 0.1 * res)
        chi, tau_c = _chi_block(disc, t, u, chi, d, chi_p, d_p, tau_c, cfg, tol)
        d, tau_d = _d_block(disc, t, u, chi, d, chi_p, d_p, tau_d, cfg, tol)
        u = disc.solve_u(t, chi, d, rtol=cfg.cg_rtol)
        new = _objective(disc, t, u, chi, d, chi_p, d_p)
        if new > obj + _MONO_TOL * (1.0 + abs(obj)):
            raise SolverError(f"AM objective increased from {obj!r} to {new!r} in sweep {sweeps}")
        decrease, obj = obj - new, min(obj, new)
        res_prev, res = res, inclusion_residual(disc, t, StateFields(u, chi, d), previous)
        if res <= cfg.stationarity_tol:
            converged = True
            break
        flat = decrease <= cfg.am_tol * (1.0 + abs(obj))
        progressing = not res > _RES_PROGRESS * res_prev
        if not flat or progressing:
            extra = 0
        else:
            extra += 1
            if extra > _EXTRA_SWEEPS:
                stalled = True
                message = f"stalled: flat objective with stationarity residual {res:.3e}"
                break
    else:
        if not converged:
            stalled = True
            message = f"sweep limit reached with stationarity residual {res:.3e}"
    if stalled:
        logger.warning("t=%.6g: %s", t, message)
    fields = StateFields(u, chi, d)
    return fields, StepDiagnostics(obj, ref, sweeps, res, converged, stalled, message)


def initial_state(scenario):
    mesh = scenario.mesh
    init = scenario.initial
    f = StateFields.uniform(mesh, init.chi, init.d or None)
    f.u = scenario.disc.solve_u(0.0, f.chi, f.d, rtol=scenario.solver.cg_rtol)
    return f


def run_evolution(scenario, config=None, initial=None):
    """Evolve over the scenario's time grid; errors stop the run but keep the partial path."""
    cfg = config or scenario.solver
    disc = scenario.disc
    times = scenario.time.times
    q = initial.copy() if initial is not None else initial_state(scenario)
    check_fields(q, scenario)
    P = disc.power(times[0], q)
    traj = Trajectory()
    traj.steps.append(
        TrajectoryStep(
            float(times[0]), q, disc.energy(times[0], q), 0.0, 0.0, P, 0.0, 0,
            inclusion_residual(disc, times[0], q, q),
        )
    )
    for k in range(1, len(times)):
        t = float(times[k])
        prev = traj.steps[-1]
        try:
            q, diag = incremental_step(t, prev.fields, scenario, cfg)
        except (SolverError, DomainError) as exc:
            traj.complete = False
            traj.error = f"step {k} (t={t:.6g}): {exc}"
            logger.error(traj.error)
            break
        if np.any(q.chi > prev.fields.chi):
            raise AssertionError(f"damage healed at step {k}")
        check_fields(q, scenario)
        R = float(disc.dissipation(prev.fields.chi, prev.fields.d, q.chi, q.d))
        P = disc.power(t, q)
        dt = t - prev.t
        traj.steps.append(
            TrajectoryStep(
                t, q, disc.energy(t, q), R, prev.diss_cum + R, P,
                prev.power_integral + 0.5 * dt * (prev.power + P),
                diag.sweeps, diag.stationarity, diag.converged,
            )
        )
    return traj


def _is_identity_stiffness(mat):
    return mat.lame_lambda == 0.0 and mat.lame_mu == 0.5 and mat.k_min == 1.0


def stationarity_residual(fields, t, previous, scenario):
    """Inclusion residual for the simplified system with identity stiffness.

    Only defined for ``lame_lambda=0, lame_mu=1/2, k_min=1``; the general
    residual is :func:`inclusion_residual`.
    """
    if not _is_identity_stiffness(scenario.material):
        raise ConfigurationError(
            "stationarity_residual needs the identity-stiffness configuration "
            "(lame_lambda=0, lame_mu=0.5, k_min=1)"
        )
    check_fields(fields, scenario)
    check_fields(previous, scenario)
    return inclusion_residual(scenario.disc, t, fields, previous)


def activation_ratio(scenario, fields=None):
    """Largest ratio of driving force to activation threshold over the time grid.

    At a fixed internal state ``z`` with the elastic displacement re-solved
    at every grid time, damage is driven at a node when the smooth
    chi-gradient per unit mass exceeds ``nu`` and the plastic strain when the
    (S-projected) gradient norm per unit mass exceeds ``mu``. A ratio below 1
    means no increment can leave ``z``.
    """
    disc = scenario.disc
    mat = disc.material
    q = fields or initial_state(scenario)
    worst = 0.0
    for t in scenario.time.times:
        u = disc.solve_u(t, q.chi, q.d, rtol=scenario.solver.cg_rtol)
        _, gchi, gF = disc.gradients(t, u, q.chi, q.d, frobenius=True)
        r_chi = np.max(gchi / disc.lumped) / mat.nu_diss
        r_d = np.max(frob_norm_arr(disc.project_gradient_d(gF)) / disc.lumped) / mat.mu_diss
        worst = max(worst, r_chi, r_d)
    return float(worst)


def scale_loads(scenario, factor):
    """Scenario with every load amplitude multiplied by ``factor``."""
    ld = scenario.loading
    sc = lambda v: tuple(factor * x for x in v)  # noqa: E731
    return replace(
        scenario,
        loading=replace(
            ld,
            dirichlet_value=sc(ld.dirichlet_value),
            body_force=sc(ld.body_force),
            traction=sc(ld.traction),
        ),
    )


def activation_load_scale(scenario, tol=1e-10):
    """Load factor at which the initial state starts to evolve (bisection on the ratio)."""
    lo, hi = 0.0, 1.0
    while activation_ratio(scale_loads(scenario, hi)) < 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            return math.inf
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if activation_ratio(scale_loads(scenario, mid)) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo
