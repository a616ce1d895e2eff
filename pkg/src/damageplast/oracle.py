"""Brute-force reference minimizer for tiny incremental problems.

Every nodal damage value and plastic-strain component is restricted to a
finite set of levels, every combination is evaluated with an exact elastic
solve, and the best one wins. The search is deterministic and independent
of the alternating-minimization code path apart from the shared energy
evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import OracleSizeError
from .fem import StateFields, check_fields
from .tensor import SubspaceS, deviatoric_arr, n_components

MAX_UNKNOWNS = 8
MAX_LEVELS = 21
# beyond this many candidates the search takes minutes, whatever the unknown count
MAX_CANDIDATES = 5_000_000
_CHUNK = 100_000


@dataclass
class OracleResult:
    fields: StateFields
    objective: float
    quantization_gap: float
    n_candidates: int
    levels: int


def _d_basis(dim, subspace):
    """Orthonormal (Frobenius) basis of S in component coordinates."""
    m = n_components(dim)
    w = np.ones(m)
    w[dim:] = 2.0
    E = np.eye(m) / np.sqrt(w)[:, None]
    if subspace is SubspaceS.DEVIATORIC:
        E = deviatoric_arr(E)
        # Gram-Schmidt in the Frobenius inner product, dropping the null direction
        out = []
        for v in E:
            for b in out:
                v = v - np.sum(w * v * b) * b
            nv = math.sqrt(np.sum(w * v * v))
            if nv > 1e-12:
                out.append(v / nv)
        E = np.array(out).reshape(-1, m)
    return E


def oracle_size(scenario):
    """``(n_chi, n_d)``: unknown counts of the quantized search."""
    N = scenario.mesh.n_nodes
    E = _d_basis(scenario.dim, scenario.material.subspace)
    return N, N * len(E)


def oracle_minimize(t, previous, scenario, quantization=11, d_range=1.5):
    """Exhaustive search of ``E(t, q) + R(q - q_prev)`` over a quantized grid.

    Damage levels at node ``i`` are ``quantization`` equispaced values in
    ``[0, chi_prev_i]``. Plastic strains are expanded in an orthonormal
    basis of S; each coordinate takes ``quantization`` equispaced values in
    ``[-rho, rho]`` (``rho`` the ball radius of K, else ``d_range``) plus
    its previous value. Points outside K are infeasible and skipped.

    The returned ``quantization_gap`` estimates how far the continuous
    minimum can lie below the grid minimum (see :func:`_cell_lower_bound`).
    """
    check_fields(previous, scenario)
    if not (2 <= quantization <= MAX_LEVELS):
        raise OracleSizeError(f"quantization must lie in [2, {MAX_LEVELS}], got {quantization}")
    n_chi, n_d = oracle_size(scenario)
    n_unknowns = n_chi + n_d
    if n_unknowns > MAX_UNKNOWNS:
        raise OracleSizeError(
            f"oracle needs at most {MAX_UNKNOWNS} nodal unknowns, instance has {n_unknowns} "
            f"({n_chi} damage + {n_d} plastic)"
        )
    disc = scenario.disc
    mat = scenario.material
    N, m = disc.mesh.n_nodes, disc.m
    basis = _d_basis(disc.dim, mat.subspace)
    w = disc.weights
    rho = mat.k_set.radius if mat.k_set.radius is not None else d_range

    axes = [np.linspace(0.0, c, quantization) for c in previous.chi]
    prev_coords = (previous.d * w) @ basis.T  # (N, nb)
    for i in range(N):
        for b in range(len(basis)):
            ax = np.linspace(-rho, rho, quantization)
            axes.append(np.unique(np.append(ax, prev_coords[i, b])))
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape, dtype=np.int64))
    if total > MAX_CANDIDATES:
        raise OracleSizeError(
            f"oracle grid has {total} candidates ({n_unknowns} unknowns x {quantization} levels), "
            f"limit is {MAX_CANDIDATES}"
        )

    values = np.empty(total)
    nb = len(basis)
    for start in range(0, total, _CHUNK):
        idx = np.array(np.unravel_index(np.arange(start, min(start + _CHUNK, total)), shape))
        coords = [axes[j][idx[j]] for j in range(len(axes))]
        chi = np.stack(coords[:N], axis=-1)
        if nb:
            c = np.stack(coords[N:], axis=-1).reshape(-1, N, nb)
            d = c @ basis
        else:
            d = np.zeros((len(chi), N, m))
        u = disc.solve_u_many(t, chi, d)
        E = disc.energy_batch(t, u, chi, d)
        R = disc.dissipation(previous.chi, previous.d, chi, d)
        values[start : start + len(chi)] = E + R

    grid = values.reshape(shape)
    best = int(np.argmin(values))
    gap = float(values[best]) - _cell_lower_bound(grid)

    ib = np.unravel_index(best, shape)
    chi = np.array([axes[j][ib[j]] for j in range(N)])
    if nb:
        c = np.array([axes[N + j][ib[N + j]] for j in range(N * nb)]).reshape(N, nb)
        d = c @ basis
    else:
        d = np.zeros((N, m))
    u = disc.solve_u(t, chi, d, rtol=scenario.solver.cg_rtol)
    return OracleResult(StateFields(u, chi, d), float(values[best]), gap, total, quantization)


def _window2(a, axis, op):
    """``op`` of neighbouring entries along ``axis`` (length shrinks by one)."""
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis], hi[axis] = slice(None, -1), slice(1, None)
    return op(a[tuple(lo)], a[tuple(hi)])


def _cell_lower_bound(grid):
    """Estimated lower bound of the objective over the boxes spanned by the grid.

    In each grid cell the objective is at least its smallest vertex value
    minus half the largest vertex-to-vertex change along each axis (the
    secant estimate of a Lipschitz bound). Cells with an infeasible vertex
    are bounded by their feasible vertices only.
    """
    g = np.where(np.isfinite(grid), grid, np.nan)
    nd = g.ndim
    low = g
    for j in range(nd):
        low = _window2(low, j, np.fmin)
    slack = np.zeros_like(low)
    for j in range(nd):
        jump = np.abs(np.diff(g, axis=j))
        for k in range(nd):
            if k != j:
                jump = _window2(jump, k, np.fmax)
        slack += 0.5 * np.nan_to_num(jump, nan=0.0)
    bound = low - slack
    return float(np.nanmin(bound)) if np.isfinite(bound).any() else -math.inf


def incremental_objective(t, fields, previous, scenario):
    disc = scenario.disc
    return float(disc.energy(t, fields).total) + float(
        disc.dissipation(previous.chi, previous.d, fields.chi, fields.d)
    )


def compare_with_oracle(trajectory, scenario, quantization=11, steps=None):
    """Per step ``k >= 1``: ``(k, am_objective, oracle_result)`` using the stored previous state."""
    out = []
    ks = range(1, len(trajectory)) if steps is None else steps
    for k in ks:
        prev = trajectory[k - 1].fields
        cur = trajectory[k]
        am = incremental_objective(cur.t, cur.fields, prev, scenario)
        out.append((k, am, oracle_minimize(cur.t, prev, scenario, quantization)))
    return out


__all__ = [
    "OracleResult",
    "oracle_minimize",
    "oracle_size",
    "compare_with_oracle",
    "incremental_objective",
    "MAX_UNKNOWNS",
    "MAX_LEVELS",
]
