"""Scenario files, time-series tables and field snapshots.

Scenario files are INI-style: named sections holding ``key = value`` lines.
Unknown sections or keys are rejected, and every problem found while
reading is reported at once. The key list is documented in
``docs/SCENARIO.md``.

Output tables are plain CSV with floats written to 17 significant digits,
so re-reading them reproduces the stored values exactly.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .constitutive import MaterialParams
from .exceptions import ValidationError
from .fem import StateFields
from .scenario import (
    InitialState,
    Loading,
    MeshSpec,
    Scenario,
    SolverConfig,
    TimeGrid,
    TimeProfile,
    VerificationConfig,
)
from .solver import Trajectory, TrajectoryStep
from .tensor import ConvexSetK, SubspaceS, n_components

TIMESERIES_COLUMNS = (
    "step",
    "t",
    "E_total",
    "W_part",
    "J_part",
    "G_part",
    "H_part",
    "diss_increment",
    "diss_cum",
    "power_integral",
    "balance_gap",
    "min_chi",
    "max_normD",
    "sweeps",
    "stationarity_residual",
)

_FLOAT = "%.17g"

# --- scenario files ------------------------------------------------------------

_SECTIONS = ("scenario", "domain", "material", "loading", "time", "initial", "solver", "verification")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _floats(s):
    s = s.strip()
    return tuple(float(x) for x in s.split(",")) if s else ()


def _ints(s):
    return tuple(int(x) for x in s.split(",")) if s.strip() else ()


def _names(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _opt_float(s):
    s = s.strip().lower()
    return None if s in ("", "none", "default") else float(s)


class _Reader:
    """Collects conversion errors while pulling typed values out of a section."""

    def __init__(self, cp, errors):
        self.cp = cp
        self.errors = errors
        self.seen = {}

    def get(self, section, key, conv, default):
        self.seen.setdefault(section, set()).add(key)
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError):
            self.errors.append(f"{section}.{key}: cannot read {raw!r}")
            return default

    def unknown(self):
        out = []
        for sec in self.cp.sections():
            if sec not in _SECTIONS:
                out.append(f"unknown section [{sec}]")
                continue
            for key in self.cp.options(sec):
                if key not in self.seen.get(sec, ()):
                    out.append(f"{sec}: unknown key {key!r}")
        return out


def _conv_for(default):
    if isinstance(default, bool):
        return lambda s: {"true": True, "false": False}[s.strip().lower()]
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def _plain(reader, section, cls):
    kw = {}
    for f in fields(cls):
        default = getattr(cls(), f.name)
        kw[f.name] = reader.get(section, f.name, _conv_for(default), default)
    return cls(**kw)


def _profile(reader, prefix):
    d = TimeProfile()
    return TimeProfile(
        kind=reader.get("loading", f"{prefix}_profile", str, d.kind),
        t0=reader.get("loading", f"{prefix}_t0", float, d.t0),
        t1=reader.get("loading", f"{prefix}_t1", float, d.t1),
        blend=reader.get("loading", f"{prefix}_blend", _opt_float, d.blend),
    )


def scenario_from_string(text, source="<string>"):
    """Parse and validate a scenario; raise :class:`ValidationError` listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValidationError([f"malformed scenario file: {exc}"]) from None
    errors = []
    r = _Reader(cp, errors)

    name = r.get("scenario", "name", str, "scenario")
    dim = r.get("domain", "dim", int, 1)
    mesh = MeshSpec(
        dim=dim,
        extents=r.get("domain", "extents", _floats, (1.0,) * max(dim, 1)),
        subdivisions=r.get("domain", "subdivisions", _ints, (4,) * max(dim, 1)),
        dirichlet=r.get("domain", "dirichlet", _names, ("left",)),
    )

    md = MaterialParams()
    mkw = {}
    for f in fields(MaterialParams):
        if f.name in ("subspace", "k_set"):
            continue
        default = getattr(md, f.name)
        mkw[f.name] = r.get("material", f.name, _conv_for(default), default)
    sub = r.get("material", "subspace", str, "full")
    if sub not in [s.value for s in SubspaceS]:
        errors.append(f"material.subspace: must be 'full' or 'deviatoric', got {sub!r}")
        sub = "full"
    kind = r.get("material", "k_set", str, "all")
    radius = r.get("material", "k_radius", float, None)
    k_set = ConvexSetK.all_of_s()
    if kind == "ball":
        if radius is None or not radius > 0:
            errors.append("material.k_radius: a ball K needs a positive radius")
        else:
            k_set = ConvexSetK.ball(radius)
    elif kind != "all":
        errors.append(f"material.k_set: must be 'all' or 'ball', got {kind!r}")
    elif radius is not None:
        errors.append("material.k_radius: only meaningful with k_set = ball")
    material = MaterialParams(subspace=SubspaceS(sub), k_set=k_set, **mkw)

    ld = Loading()
    loading = Loading(
        dirichlet_mode=r.get("loading", "dirichlet_mode", str, ld.dirichlet_mode),
        dirichlet_value=r.get("loading", "dirichlet_value", _floats, ()),
        dirichlet_profile=_profile(r, "dirichlet"),
        body_force=r.get("loading", "body_force", _floats, ()),
        traction=r.get("loading", "traction", _floats, ()),
        traction_facet=r.get("loading", "traction_facet", str, ld.traction_facet),
        force_profile=_profile(r, "force"),
    )
    time = TimeGrid(T=r.get("time", "t", float, 1.0), n_steps=r.get("time", "n_steps", int, 10))
    initial = InitialState(
        chi=r.get("initial", "chi", float, 1.0), d=r.get("initial", "d", _floats, ())
    )
    solver = _plain(r, "solver", SolverConfig)
    verification = _plain(r, "verification", VerificationConfig)
    errors += r.unknown()

    sc = Scenario(name, mesh, material, loading, time, initial, solver, verification)
    try:
        sc = sc.validated()
    except ValidationError as exc:
        errors += exc.violations
    if errors:
        raise ValidationError(errors)
    return sc


def parse_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError([f"cannot read scenario file {path}: {exc.strerror}"]) from None
    return scenario_from_string(text, source=str(path))


def serialize_scenario(scenario):
    """Canonical text form; parsing it back gives an equal scenario."""
    sc = scenario
    out = ["[scenario]", f"name = {sc.name}", ""]
    ms = sc.mesh_spec
    out += [
        "[domain]",
        f"dim = {ms.dim}",
        f"extents = {_fmt(tuple(map(float, ms.extents)))}",
        f"subdivisions = {_fmt(tuple(map(int, ms.subdivisions)))}",
        f"dirichlet = {_fmt(ms.dirichlet)}",
        "",
    ]
    mat = sc.material
    out.append("[material]")
    for f in fields(MaterialParams):
        v = getattr(mat, f.name)
        if f.name == "subspace":
            out.append(f"subspace = {v.value}")
        elif f.name == "k_set":
            if v.radius is None:
                out.append("k_set = all")
            else:
                out += ["k_set = ball", f"k_radius = {_fmt(float(v.radius))}"]
        else:
            out.append(f"{f.name} = {_fmt(v)}")
    ld = sc.loading
    out += ["", "[loading]", f"dirichlet_mode = {ld.dirichlet_mode}"]
    out.append(f"dirichlet_value = {_fmt(tuple(map(float, ld.dirichlet_value)))}")
    for prefix, p in (("dirichlet", ld.dirichlet_profile), ("force", ld.force_profile)):
        out += [
            f"{prefix}_profile = {p.kind}",
            f"{prefix}_t0 = {_fmt(float(p.t0))}",
            f"{prefix}_t1 = {_fmt(float(p.t1))}",
            f"{prefix}_blend = {'default' if p.blend is None else _fmt(float(p.blend))}",
        ]
    out += [
        f"body_force = {_fmt(tuple(map(float, ld.body_force)))}",
        f"traction = {_fmt(tuple(map(float, ld.traction)))}",
        f"traction_facet = {ld.traction_facet}",
        "",
        "[time]",
        f"T = {_fmt(float(sc.time.T))}",
        f"n_steps = {int(sc.time.n_steps)}",
        "",
        "[initial]",
        f"chi = {_fmt(float(sc.initial.chi))}",
        f"d = {_fmt(tuple(map(float, sc.initial.d)))}",
    ]
    for section, obj in (("solver", sc.solver), ("verification", sc.verification)):
        out += ["", f"[{section}]"]
        out += [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)]
    return "\n".join(out) + "\n"


# --- time series ---------------------------------------------------------------


def _cell(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return _FLOAT % v


def timeseries_rows(trajectory, balance=None):
    """Rows of the time-series table; ``balance`` is an optional :class:`BalanceReport`."""
    rows = []
    for k, s in enumerate(trajectory.steps):
        W, J, G, H = s.energy.as_tuple()
        gap = balance.balance_gap[k] if balance is not None else math.nan
        normd = np.sqrt(np.einsum("nc,c->n", s.fields.d**2, _weights(s.fields.d.shape[1])))
        rows.append(
            (
                k,
                s.t,
                s.energy.total,
                W,
                J,
                G,
                H,
                s.diss_increment,
                s.diss_cum,
                s.power_integral,
                gap,
                float(s.fields.chi.min()),
                float(normd.max()),
                int(s.sweeps),
                s.stationarity,
            )
        )
    return rows


def _weights(m):
    from .tensor import component_weights, dim_from_components

    return component_weights(dim_from_components(m))


def write_timeseries(trajectory, report, path):
    """Write the fixed-schema table; ``report`` may be a BalanceReport, a
    VerificationReport (its balance part is used) or ``None``."""
    balance = getattr(report, "balance", report)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_COLUMNS)
        for row in timeseries_rows(trajectory, balance):
            w.writerow([_cell(v) for v in row])


def read_timeseries(path):
    """Column name -> array (``step`` and ``sweeps`` as integers)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != TIMESERIES_COLUMNS:
        raise ValueError(f"unexpected time-series header in {path}")
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        cols[name] = np.array(vals, dtype=int if name in ("step", "sweeps") else float)
    return cols


# --- snapshots -------------------------------------------------------------------


def _coord_names(dim):
    return ("x", "y", "z")[:dim]


def _component_names(dim):
    return {1: ("11",), 2: ("11", "22", "12"), 3: ("11", "22", "33", "23", "13", "12")}[dim]


def snapshot_paths(directory, step):
    d = Path(directory)
    return {f: d / f"step_{step:05d}_{f}.csv" for f in ("u", "chi", "d")}


def write_snapshot(directory, step, mesh, fields_):
    """One CSV per field: node id, coordinates, values."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dim = mesh.dim
    xs = _coord_names(dim)
    spec = {
        "u": ([f"u_{x}" for x in xs], fields_.u),
        "chi": (["chi"], fields_.chi[:, None]),
        "d": ([f"d_{c}" for c in _component_names(dim)], fields_.d),
    }
    for name, path in snapshot_paths(directory, step).items():
        cols, vals = spec[name]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", *xs, *cols])
            for i in range(mesh.n_nodes):
                w.writerow([i, *(_FLOAT % c for c in mesh.nodes[i]), *(_FLOAT % v for v in vals[i])])


def read_snapshot(directory, step, mesh):
    out = {}
    for name, path in snapshot_paths(directory, step).items():
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if arr.shape[0] != mesh.n_nodes:
            raise ValueError(f"{path}: expected {mesh.n_nodes} nodes, found {arr.shape[0]}")
        out[name] = arr[:, 1 + mesh.dim :]
    m = n_components(mesh.dim)
    if out["d"].shape[1] != m or out["u"].shape[1] != mesh.dim:
        raise ValueError(f"snapshot of step {step} does not match a {mesh.dim}D mesh")
    return StateFields(out["u"].copy(), out["chi"][:, 0].copy(), out["d"].copy())


def write_run(directory, trajectory, scenario, report=None, snapshots=True):
    """Write ``timeseries.csv``, ``scenario.cfg`` and per-step snapshots."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_timeseries(trajectory, report, directory / "timeseries.csv")
    (directory / "scenario.cfg").write_text(serialize_scenario(scenario))
    if snapshots:
        for k, s in enumerate(trajectory.steps):
            write_snapshot(directory / "snapshots", k, scenario.mesh, s.fields)


def read_run(directory, scenario):
    """Rebuild a trajectory from a run directory, recomputing energies and power."""
    directory = Path(directory)
    ts = read_timeseries(directory / "timeseries.csv")
    disc = scenario.disc
    steps = []
    prev = None
    diss_cum = 0.0
    for k, t in zip(ts["step"], ts["t"]):
        f = read_snapshot(directory / "snapshots", int(k), scenario.mesh)
        inc = 0.0 if prev is None else float(disc.dissipation(prev.chi, prev.d, f.chi, f.d))
        diss_cum += inc
        steps.append(
            TrajectoryStep(
                t=float(t),
                fields=f,
                energy=disc.energy(float(t), f),
                diss_increment=inc,
                diss_cum=diss_cum,
                power=disc.power(float(t), f),
                power_integral=float(ts["power_integral"][k]),
                sweeps=int(ts["sweeps"][k]),
                stationarity=float(ts["stationarity_residual"][k]),
            )
        )
        prev = f
    return Trajectory(steps)
