"""Scenario data model: mesh spec, loading, time grid, solver and verification settings.

Loading is restricted to a closed family of time profiles so that time
derivatives are exact. Interior corners of a profile are replaced by a
quadratic blend of configurable width, which makes every profile C^1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .constitutive import MaterialParams
from .exceptions import ValidationError

PROFILE_KINDS = ("zero", "constant", "linear-ramp", "hold-after-ramp")
DIRICHLET_MODES = ("none", "stretch")
FACETS = {1: ("left", "right"), 2: ("left", "right", "bottom", "top")}


def _ramp(x, b):
    """C^1 regularization of ``max(0, x)`` over ``|x| <= b/2`` (``b=0``: plain)."""
    x = np.asarray(x, dtype=float)
    if b <= 0:
        return np.maximum(x, 0.0)
    h = 0.5 * b
    return np.where(x <= -h, 0.0, np.where(x >= h, x, (x + h) ** 2 / (2.0 * b)))


def _ramp_prime(x, b):
    x = np.asarray(x, dtype=float)
    if b <= 0:
        return (x >= 0.0).astype(float)
    h = 0.5 * b
    return np.clip((x + h) / b, 0.0, 1.0)


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time profile ``p(t)``.

    ``linear-ramp`` rises with slope ``1/(t1-t0)`` from ``t0`` on and keeps
    rising; ``hold-after-ramp`` stays at 1 after ``t1``. ``blend=None`` means
    "use the scenario default" (twice the time step).
    """

    kind: str = "zero"
    t0: float = 0.0
    t1: float = 1.0
    blend: float | None = None

    def _kinks(self):
        if self.kind in ("zero", "constant"):
            return []
        s = 1.0 / (self.t1 - self.t0)
        ks = [(self.t0, s)]
        if self.kind == "hold-after-ramp":
            ks.append((self.t1, -s))
        return ks

    def _b(self, corner):
        # corners at or before t=0 are not inside the time interval
        return (self.blend or 0.0) if corner > 0 else 0.0

    def value(self, t):
        if self.kind == "zero":
            return 0.0 * np.asarray(t, dtype=float)
        if self.kind == "constant":
            return 1.0 + 0.0 * np.asarray(t, dtype=float)
        return sum(s * _ramp(np.asarray(t, dtype=float) - c, self._b(c)) for c, s in self._kinks())

    def rate(self, t):
        if self.kind in ("zero", "constant"):
            return 0.0 * np.asarray(t, dtype=float)
        return sum(
            s * _ramp_prime(np.asarray(t, dtype=float) - c, self._b(c)) for c, s in self._kinks()
        )

    def breakpoints(self):
        out = []
        for c, _ in self._kinks():
            b = self._b(c)
            out.extend([c - b / 2, c + b / 2] if b > 0 else [c])
        return out

    def violations(self, name):
        out = []
        if self.kind not in PROFILE_KINDS:
            out.append(f"{name}: profile must be one of {PROFILE_KINDS}, got {self.kind!r}")
            return out
        if self.kind in ("linear-ramp", "hold-after-ramp"):
            if not self.t1 > self.t0:
                out.append(f"{name}: ramp needs t1 > t0")
            if self.t0 < 0:
                out.append(f"{name}: ramp start t0 must be >= 0")
            b = self.blend or 0.0
            if b < 0:
                out.append(f"{name}: blend width must be >= 0")
            elif self.t0 > 0 and self.t0 < b / 2:
                out.append(f"{name}: blend window around t0 reaches below t=0")
            if self.kind == "hold-after-ramp" and (self.t1 - self.t0) < b:
                out.append(f"{name}: blend windows of t0 and t1 overlap")
        return out


@dataclass(frozen=True)
class MeshSpec:
    dim: int = 1
    extents: tuple = (1.0,)
    subdivisions: tuple = (4,)
    dirichlet: tuple = ("left",)

    def violations(self):
        out = []
        if self.dim not in (1, 2):
            out.append(f"domain: mesh dim must be 1 or 2, got {self.dim}")
            return out
        if len(self.extents) != self.dim or len(self.subdivisions) != self.dim:
            out.append("domain: extents and subdivisions need one entry per dimension")
        if any(not e > 0 for e in self.extents):
            out.append("domain: extents must be positive (bounded domain)")
        if any(int(n) < 1 for n in self.subdivisions):
            out.append("domain: subdivisions must be >= 1")
        if not self.dirichlet:
            out.append("domain: Dirichlet boundary must be nonempty")
        bad = [f for f in self.dirichlet if f not in FACETS[self.dim]]
        if bad:
            out.append(f"domain: unknown facets {bad}, expected from {FACETS[self.dim]}")
        return out


@dataclass(frozen=True)
class Loading:
    """Dirichlet lift ``u_D(t,x) = p_D(t) * (x_1 - x_min)/L_1 * dirichlet_value``
    and load ``F(t) = p_F(t) * (body_force + traction on traction_facet)``."""

    dirichlet_mode: str = "none"
    dirichlet_value: tuple = ()
    dirichlet_profile: TimeProfile = field(default_factory=TimeProfile)
    body_force: tuple = ()
    traction: tuple = ()
    traction_facet: str = "right"
    force_profile: TimeProfile = field(default_factory=TimeProfile)

    def violations(self, dim):
        out = []
        if self.dirichlet_mode not in DIRICHLET_MODES:
            out.append(f"loading: dirichlet_mode must be one of {DIRICHLET_MODES}")
        for name in ("dirichlet_value", "body_force", "traction"):
            v = getattr(self, name)
            if len(v) not in (0, dim):
                out.append(f"loading: {name} needs {dim} components")
        if self.traction and self.traction_facet not in FACETS.get(dim, ()):
            out.append(f"loading: traction_facet must be one of {FACETS.get(dim, ())}")
        out += self.dirichlet_profile.violations("loading: dirichlet_profile")
        out += self.force_profile.violations("loading: force_profile")
        return out


@dataclass(frozen=True)
class TimeGrid:
    T: float = 1.0
    n_steps: int = 10

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def dt(self):
        return self.T / self.n_steps

    def violations(self):
        out = []
        if not self.T > 0:
            out.append("time: horizon T must be positive")
        if int(self.n_steps) < 1:
            out.append("time: n_steps must be >= 1")
        return out


@dataclass(frozen=True)
class InitialState:
    """Uniform initial internal variables; ``u`` is always the elastic response."""

    chi: float = 1.0
    d: tuple = ()

    def violations(self, dim, mat):
        from .constitutive import in_admissible_set
        from .tensor import n_components

        out = []
        if not (0.0 <= self.chi <= 1.0):
            out.append("initial state: chi must lie in [0, 1]")
        if self.d:
            if len(self.d) != n_components(dim):
                out.append(f"initial state: d needs {n_components(dim)} components")
            elif not in_admissible_set(np.asarray(self.d, dtype=float), mat):
                out.append("initial state: d must lie in K and S")
        return out


@dataclass(frozen=True)
class SolverConfig:
    am_tol: float = 1e-10
    am_max_sweeps: int = 200
    prox_step_init: float = 1.0
    backtrack_factor: float = 0.5
    prox_max_iters: int = 200
    stationarity_tol: float = 1e-7
    cg_rtol: float = 1e-10

    def violations(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                out.append(f"solver: {f.name} must be positive")
        if not self.backtrack_factor < 1:
            out.append("solver: backtrack_factor must be < 1")
        return out


@dataclass(frozen=True)
class VerificationConfig:
    """Competitor families for stability sampling, one count per family."""

    seed: int = 0
    n_drop: int = 250
    n_recovery: int = 250
    n_random: int = 250
    n_dperturb: int = 250
    n_rebalance: int = 1
    max_drop: float = 0.5
    random_scale: float = 0.05
    d_scale: float = 0.5
    eps_stab_rel: float = 1e-8
    eps_bal_rel: float = 1e-6

    @property
    def total_competitors(self):
        return self.n_drop + self.n_recovery + self.n_random + self.n_dperturb + self.n_rebalance

    def violations(self):
        out = []
        for f in fields(self):
            if f.name == "seed":
                continue
            if getattr(self, f.name) < 0:
                out.append(f"verification: {f.name} must be >= 0")
        return out


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    mesh_spec: MeshSpec = field(default_factory=MeshSpec)
    material: MaterialParams = field(default_factory=MaterialParams)
    loading: Loading = field(default_factory=Loading)
    time: TimeGrid = field(default_factory=TimeGrid)
    initial: InitialState = field(default_factory=InitialState)
    solver: SolverConfig = field(default_factory=SolverConfig)
    verification: VerificationConfig = field(default_factory=VerificationConfig)

    @property
    def dim(self):
        return self.mesh_spec.dim

    @cached_property
    def effective_loading(self):
        """Loading with default blend widths (twice the time step) filled in."""
        ld = self.loading
        if not (self.time.T > 0 and self.time.n_steps >= 1):
            return ld
        b = 2.0 * self.time.dt
        changes = {}
        for name in ("dirichlet_profile", "force_profile"):
            p = getattr(ld, name)
            if p.blend is None:
                changes[name] = replace(p, blend=b)
        return replace(ld, **changes) if changes else ld

    def violations(self):
        out = self.mesh_spec.violations()
        dim = self.mesh_spec.dim if self.mesh_spec.dim in (1, 2) else None
        out += self.material.violations(dim)
        if dim:
            out += self.effective_loading.violations(dim)
            out += self.initial.violations(dim, self.material)
        out += self.time.violations()
        out += self.solver.violations()
        out += self.verification.violations()
        return out

    def validated(self):
        """Return ``self`` after checking every assumption; raise on any violation."""
        bad = self.violations()
        if bad:
            raise ValidationError(bad)
        return self

    def with_(self, **changes):
        return replace(self, **changes)

    @cached_property
    def mesh(self):
        from .fem import build_mesh

        ms = self.mesh_spec
        return build_mesh(ms.dim, ms.extents, ms.subdivisions, ms.dirichlet)

    @cached_property
    def disc(self):
        from .fem import Discretization

        return Discretization(self.mesh, self.material, self.effective_loading)

    def load_norm(self):
        """Size of the driving data: max over the grid of |F|_2 + |u_D|_2 (nodal)."""
        d = self.disc
        ts = self.time.times
        return float(
            max(np.linalg.norm(d.force(t)) + np.linalg.norm(d.lift(t)) for t in ts)
        )
