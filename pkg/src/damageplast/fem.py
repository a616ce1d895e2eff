"""P1 finite elements for the displacement, damage and plastic-strain fields.

Quadrature rules:

* the elastic term is integrated exactly for the element-constant strain,
  with damage and plastic strain frozen at the element barycenter;
* all other nonlinear densities (W1, the quartic plastic well, H) use the
  barycentric one-point rule; gradient terms are exact;
* dissipation integrals use nodal (lumped) weights.

The unknown displacement vanishes on the Dirichlet boundary; the boundary
datum enters only through the strain of its lift ``e_D(t)``.

All energy kernels accept an optional leading batch axis on the fields,
which the brute-force oracle uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from . import constitutive as cst
from .exceptions import ConfigurationError, DomainError, SolverError
from .tensor import (
    SubspaceS,
    component_weights,
    frob_inner_arr,
    frob_norm_arr,
    from_matrix_arr,
    n_components,
    project_K_arr,
    project_subspace_arr,
)

__all__ = [
    "Mesh",
    "StateFields",
    "EnergyBreakdown",
    "Discretization",
    "build_mesh",
    "assemble_energy",
    "assemble_power",
    "elastic_solve",
    "energy_gradient_blocks",
]


# element-by-node operator size below which dense storage is used
_DENSE_LIMIT = 250_000
# batched dense elastic solves are used up to this many free dofs
_BATCH_DOF_LIMIT = 400
_BATCH_BYTES = 64e6


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    extents: tuple
    subdivisions: tuple
    nodes: np.ndarray  # (N, dim)
    elements: np.ndarray  # (ne, dim+1)
    boundary: np.ndarray  # (N,) of {"dirichlet", "neumann", "interior"}
    facets: dict  # facet name -> (node ids, nodal weights of the facet measure)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def dirichlet_nodes(self):
        return np.flatnonzero(self.boundary == "dirichlet")

    @property
    def volume(self):
        return float(np.prod(self.extents))


def build_mesh(dim, extents, subdivisions, dirichlet_spec):
    """Structured interval or triangulated rectangle.

    ``dirichlet_spec`` names the boundary facets carrying the Dirichlet
    condition (``left``/``right`` and, in 2D, ``bottom``/``top``).
    """
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    subdivisions = tuple(int(n) for n in np.atleast_1d(subdivisions))
    if dim not in (1, 2):
        raise ConfigurationError("meshes are available for dim 1 and 2")
    if len(extents) != dim or len(subdivisions) != dim:
        raise ConfigurationError("one extent and one subdivision count per dimension")
    if any(n < 1 for n in subdivisions) or any(e <= 0 for e in extents):
        raise ConfigurationError("subdivisions must be >= 1 and extents positive")
    dirichlet_spec = tuple(dirichlet_spec or ())
    if not dirichlet_spec:
        raise ConfigurationError("the Dirichlet boundary must be nonempty")

    if dim == 1:
        (L,), (n,) = extents, subdivisions
        nodes = np.linspace(0.0, L, n + 1)[:, None]
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        facets = {
            "left": (np.array([0]), np.array([1.0])),
            "right": (np.array([n]), np.array([1.0])),
        }
    else:
        (Lx, Ly), (nx, ny) = extents, subdivisions
        xs, ys = np.linspace(0.0, Lx, nx + 1), np.linspace(0.0, Ly, ny + 1)
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])

        def idx(i, j):
            return j * (nx + 1) + i

        tris = []
        for j in range(ny):
            for i in range(nx):
                n0, n1, n2, n3 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
                tris.append((n0, n1, n3))
                tris.append((n0, n3, n2))
        elements = np.array(tris)

        def edge(ids, h):
            w = np.full(len(ids), h)
            w[0] = w[-1] = h / 2
            return np.array(ids), w

        facets = {
            "left": edge([idx(0, j) for j in range(ny + 1)], Ly / ny),
            "right": edge([idx(nx, j) for j in range(ny + 1)], Ly / ny),
            "bottom": edge([idx(i, 0) for i in range(nx + 1)], Lx / nx),
            "top": edge([idx(i, ny) for i in range(nx + 1)], Lx / nx),
        }

    unknown = [f for f in dirichlet_spec if f not in facets]
    if unknown:
        raise ConfigurationError(f"unknown boundary facets {unknown}")
    boundary = np.full(len(nodes), "interior", dtype=object)
    for ids, _ in facets.values():
        boundary[ids] = "neumann"
    for f in dirichlet_spec:
        boundary[facets[f][0]] = "dirichlet"
    return Mesh(dim, extents, subdivisions, nodes, elements, boundary, facets)


@dataclass
class StateFields:
    """Nodal fields ``u`` (N, dim), ``chi`` (N,), ``d`` (N, m)."""

    u: np.ndarray
    chi: np.ndarray
    d: np.ndarray

    def copy(self):
        return StateFields(self.u.copy(), self.chi.copy(), self.d.copy())

    @classmethod
    def uniform(cls, mesh, chi=1.0, d=None):
        m = n_components(mesh.dim)
        dd = np.zeros((mesh.n_nodes, m))
        if d is not None and len(d):
            dd[:] = np.asarray(d, dtype=float)
        return cls(np.zeros((mesh.n_nodes, mesh.dim)), np.full(mesh.n_nodes, float(chi)), dd)

    def check_conforming(self, mesh):
        m = n_components(mesh.dim)
        if (
            self.u.shape != (mesh.n_nodes, mesh.dim)
            or self.chi.shape != (mesh.n_nodes,)
            or self.d.shape != (mesh.n_nodes, m)
        ):
            raise ValueError(
                f"fields do not conform to the mesh: u{self.u.shape}, chi{self.chi.shape}, "
                f"d{self.d.shape} for {mesh.n_nodes} nodes in {mesh.dim}D"
            )


@dataclass(frozen=True)
class EnergyBreakdown:
    W_elastic_minus_work: float
    J_damage: float
    G_plastic: float
    H_coupling: float

    @property
    def total(self):
        return self.W_elastic_minus_work + self.J_damage + self.G_plastic + self.H_coupling

    def as_tuple(self):
        return (self.W_elastic_minus_work, self.J_damage, self.G_plastic, self.H_coupling)


def _simplex_geometry(mesh):
    X = mesh.nodes[mesh.elements]  # (ne, d+1, d)
    Jac = np.transpose(X[:, 1:, :] - X[:, :1, :], (0, 2, 1))  # columns are edge vectors
    det = np.linalg.det(Jac)
    if np.any(det <= 0):
        raise ConfigurationError("mesh has degenerate or inverted elements")
    vol = det / math.factorial(mesh.dim)
    inv = np.linalg.inv(Jac)  # rows: gradients of barycentric coordinates 1..d
    grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
    return vol, grads


class Discretization:
    """Precomputed element operators and loading vectors for one scenario."""

    def __init__(self, mesh, material, loading):
        self.mesh = mesh
        self.material = material
        self.loading = loading
        d = mesh.dim
        self.dim = d
        self.m = n_components(d)
        self.nv = d + 1
        self.weights = component_weights(d)
        self.vol, self.grads = _simplex_geometry(mesh)
        conn = mesh.elements
        self.conn = conn

        # strain-displacement operator: e_c = sum_{a,i} B[c, a*d+i] u_{a,i}
        ne = mesh.n_elements
        B = np.zeros((ne, self.m, self.nv * d))
        for a in range(self.nv):
            for i in range(d):
                unit = np.zeros((ne, d, d))
                unit[:, i, :] = self.grads[:, a, :]
                B[:, :, a * d + i] = from_matrix_arr(unit)
        self.B = B
        M0 = material.base_stiffness(d).matrix
        WM0 = self.weights[:, None] * M0
        self.k0 = np.einsum("e,eca,cq,eqb->eab", self.vol, B, WM0, B)
        self.BtW = np.einsum("eca,c->eac", B, self.weights)  # (ne, nv*d, m)
        self.elem_dofs = (conn[:, :, None] * d + np.arange(d)[None, None, :]).reshape(ne, -1)
        self.rows = np.repeat(self.elem_dofs, self.nv * d, axis=1).ravel()
        self.cols = np.tile(self.elem_dofs, (1, self.nv * d)).ravel()
        self.ndof = mesh.n_nodes * d
        fixed = np.zeros((mesh.n_nodes, d), dtype=bool)
        fixed[mesh.dirichlet_nodes] = True
        self.fixed = fixed
        self.free = np.flatnonzero(~fixed.ravel())

        # lumped nodal weights
        lump = np.zeros(mesh.n_nodes)
        np.add.at(lump, conn.ravel(), np.repeat(self.vol / self.nv, self.nv))
        self.lumped = lump

        # sparse element operators: barycentric average, gradients, strain
        N, nv = mesh.n_nodes, self.nv
        erow = np.repeat(np.arange(ne), nv)
        self.P = sp.csr_matrix((np.full(ne * nv, 1.0 / nv), (erow, conn.ravel())), shape=(ne, N))
        grow = np.broadcast_to(np.arange(ne)[:, None, None] * d + np.arange(d), (ne, nv, d))
        gcol = np.broadcast_to(conn[:, :, None], (ne, nv, d))
        self.Gs = sp.csr_matrix(
            (self.grads.ravel(), (grow.ravel(), gcol.ravel())), shape=(ne * d, N)
        )
        brow = np.broadcast_to(np.arange(ne)[:, None, None] * self.m + np.arange(self.m)[:, None],
                               (ne, self.m, nv * d))
        bcol = np.broadcast_to(self.elem_dofs[:, None, :], (ne, self.m, nv * d))
        self.Bu = sp.csr_matrix((B.ravel(), (brow.ravel(), bcol.ravel())), shape=(ne * self.m, self.ndof))
        if ne * N <= _DENSE_LIMIT:
            # dense products are much cheaper than sparse dispatch on small meshes
            self.P, self.Gs, self.Bu = self.P.toarray(), self.Gs.toarray(), self.Bu.toarray()
            self.PT, self.GsT, self.BuT = self.P.T.copy(), self.Gs.T.copy(), self.Bu.T.copy()
        else:
            self.PT, self.GsT, self.BuT = self.P.T.tocsr(), self.Gs.T.tocsr(), self.Bu.T.tocsr()
        self._cache = {}

        self._init_loading()

    # --- loading -----------------------------------------------------

    def _init_loading(self):
        ld, mesh, d = self.loading, self.mesh, self.dim
        lift = np.zeros((mesh.n_nodes, d))
        if ld.dirichlet_mode == "stretch" and ld.dirichlet_value:
            x = mesh.nodes[:, 0]
            lift = ((x - x.min()) / (x.max() - x.min()))[:, None] * np.asarray(
                ld.dirichlet_value, dtype=float
            )[None, :]
        self.lift_mode = lift
        self.e_mode = np.einsum("eca,ea->ec", self.B, lift[self.conn].reshape(len(self.conn), -1))
        f = np.zeros((mesh.n_nodes, d))
        if ld.body_force:
            fv = np.asarray(ld.body_force, dtype=float)
            np.add.at(f, self.conn.ravel(), np.repeat(self.vol / self.nv, self.nv)[:, None] * fv)
        if ld.traction:
            ids, w = mesh.facets[ld.traction_facet]
            np.add.at(f, ids, w[:, None] * np.asarray(ld.traction, dtype=float))
        f[self.fixed] = 0.0
        self.force_mode = f

    def _amplitudes(self, t):
        t = float(t)
        hit = self._cache.get(t)
        if hit is None:
            ld = self.loading
            hit = (
                float(ld.dirichlet_profile.value(t)),
                float(ld.dirichlet_profile.rate(t)),
                float(ld.force_profile.value(t)),
                float(ld.force_profile.rate(t)),
            )
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[t] = hit
        return hit

    def lift(self, t):
        return self._amplitudes(t)[0] * self.lift_mode

    def e_D(self, t):
        return self._amplitudes(t)[0] * self.e_mode

    def e_D_rate(self, t):
        return self._amplitudes(t)[1] * self.e_mode

    def force(self, t):
        return self._amplitudes(t)[2] * self.force_mode

    def force_rate(self, t):
        return self._amplitudes(t)[3] * self.force_mode

    # --- element fields ----------------------------------------------

    def bary(self, chi, d):
        """Barycentric damage (.., ne) and plastic strain (.., ne, m)."""
        return _nodal(self.P, chi, 0), _nodal(self.P, d, 1)

    def strain(self, u):
        ne = len(self.conn)
        e = _nodal(self.Bu, u.reshape(u.shape[:-2] + (-1,)), 0)
        return e.reshape(e.shape[:-1] + (ne, self.m))

    def grad_chi(self, chi):
        g = _nodal(self.Gs, chi, 0)
        return g.reshape(g.shape[:-1] + (len(self.conn), self.dim))

    def grad_d(self, d):
        g = _nodal(self.Gs, d, 1)  # (..., ne*dim, m)
        g = g.reshape(g.shape[:-2] + (len(self.conn), self.dim, self.m))
        return np.swapaxes(g, -1, -2)

    def elastic_strain(self, t, u, chibar, dbar):
        return self.strain(u) + self.e_D(t) - (1.0 - chibar)[..., None] * dbar

    # --- energy --------------------------------------------------------

    def energy_parts(self, t, u, chi, d):
        """Smooth energy parts ``(W, J, G, H)`` without indicator checks."""
        mat = self.material
        chibar, dbar = self.bary(chi, d)
        eps = self.elastic_strain(t, u, chibar, dbar)
        g = cst.degradation(chibar, mat)
        W = 0.5 * ((g * cst.base_energy_arr(eps, mat)) @ self.vol)
        W = W - np.sum(u * self.force(t), axis=(-2, -1))
        gc = self.grad_chi(chi)
        J = (0.5 * mat.alpha * np.sum(gc * gc, axis=-1) + cst.w1(chibar, mat)) @ self.vol
        G = cst.g_smooth(dbar, self.grad_d(d), mat) @ self.vol
        H = ((mat.w + 0.5 * frob_inner_arr(dbar, dbar)) * (1.0 - chibar)) @ self.vol
        return W, J, G, H

    def feasible_chi(self, chi):
        return (chi >= 0.0).all(axis=-1) & (chi <= 1.0).all(axis=-1)

    def feasible_d(self, d):
        return cst.in_admissible_set(d, self.material).all(axis=-1)

    def energy(self, t, fields):
        W, J, G, H = self.energy_parts(t, fields.u, fields.chi, fields.d)
        J = float(J) if self.feasible_chi(fields.chi) else math.inf
        G = float(G) if self.feasible_d(fields.d) else math.inf
        return EnergyBreakdown(float(W), J, G, float(H))

    def energy_batch(self, t, u, chi, d):
        """Total energy for a batch of states (leading axis), ``inf`` if infeasible."""
        W, J, G, H = self.energy_parts(t, u, chi, d)
        tot = W + J + G + H
        ok = self.feasible_chi(chi) & self.feasible_d(d)
        return np.where(ok, tot, math.inf)

    def power(self, t, fields):
        mat = self.material
        chibar, dbar = self.bary(fields.chi, fields.d)
        eps = self.elastic_strain(t, fields.u, chibar, dbar)
        sig = cst.degradation(chibar, mat)[:, None] * cst.base_stress_arr(eps, mat)
        P = np.sum(self.vol * frob_inner_arr(sig, self.e_D_rate(t)))
        return float(P - np.sum(fields.u * self.force_rate(t)))

    # --- gradients -----------------------------------------------------

    def gradients(self, t, u, chi, d, frobenius=False):
        """Partial derivatives of the smooth energy w.r.t. the nodal unknowns.

        With ``frobenius=True`` the plastic block is returned as a Frobenius
        gradient (matrix dual), otherwise as partials w.r.t. stored components.
        """
        mat = self.material
        chibar, dbar = self.bary(chi, d)
        eps = self.elastic_strain(t, u, chibar, dbar)
        g = cst.degradation(chibar, mat)
        sig0 = cst.base_stress_arr(eps, mat)
        sig = g[:, None] * sig0

        gu = self.BuT @ ((self.vol[:, None] * self.weights) * sig).ravel()
        gu = gu.reshape(-1, self.dim) - self.force(t)
        gu[self.fixed] = 0.0

        a = self.vol * (
            0.5 * cst.degradation_prime(chibar, mat) * cst.base_energy_arr(eps, mat)
            + g * frob_inner_arr(sig0, dbar)
            + cst.w1_prime(chibar, mat)
            - mat.w
            - 0.5 * frob_inner_arr(dbar, dbar)
        )
        gc = self.grad_chi(chi)
        gchi = self.PT @ a + self.GsT @ (mat.alpha * self.vol[:, None] * gc).ravel()

        s = frob_inner_arr(dbar, dbar)
        b = self.vol[:, None] * (
            -(1.0 - chibar)[:, None] * sig
            + 4.0 * mat.plastic_well_weight * (s - 1.0)[:, None] * dbar
            + (1.0 - chibar)[:, None] * dbar
        )
        _, dgrad = cst.G_partials(dbar, self.grad_d(d), mat)  # (ne, m, dim)
        flux = np.swapaxes(self.vol[:, None, None] * dgrad, 1, 2).reshape(-1, self.m)
        gd = self.PT @ b + self.GsT @ flux
        if not frobenius:
            gd = gd * self.weights
        return gu, gchi, gd

    # --- elastic solve -------------------------------------------------

    def _elastic_rhs(self, t, chibar, dbar):
        g = cst.degradation(chibar, self.material)
        pre = self.e_D(t) - (1.0 - chibar)[..., None] * dbar
        sig = g[..., None] * cst.base_stress_arr(pre, self.material)
        fe = self.vol[:, None] * np.einsum("eac,...ec->...ea", self.BtW, sig)
        return g, fe

    def stiffness_matrix(self, chi):
        g = cst.degradation(chi[self.conn].mean(axis=-1), self.material)
        data = (g[:, None, None] * self.k0).ravel()
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.ndof, self.ndof))

    def solve_u(self, t, chi, d, rtol=1e-10, maxiter=None):
        chibar, dbar = self.bary(chi, d)
        g = cst.degradation(chibar, self.material)
        pre = self.e_D(t) - (1.0 - chibar)[:, None] * dbar
        sig = g[:, None] * cst.base_stress_arr(pre, self.material)
        rhs = self.force(t).ravel() - self.BuT @ ((self.vol[:, None] * self.weights) * sig).ravel()
        K = self.stiffness_matrix(chi)[self.free][:, self.free]
        b = rhs[self.free]
        u = np.zeros(self.ndof)
        bn = np.linalg.norm(b)
        if bn > 0:
            diag = K.diagonal()
            M = sp.diags(1.0 / diag)
            maxiter = maxiter or 10 * len(b) + 100
            x, _ = cg(K, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
            res = np.linalg.norm(b - K @ x) / bn
            if res > rtol:
                # restart once from the current iterate before giving up
                x, _ = cg(K, b, x0=x, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
                res = np.linalg.norm(b - K @ x) / bn
                if res > rtol:
                    raise SolverError(
                        f"conjugate gradient stopped at relative residual {res:.3e}", residual=res
                    )
            u[self.free] = x
        return u.reshape(-1, self.dim)

    def _free_scatter(self):
        """Dense map from element stiffness factors to the free-free stiffness."""
        if getattr(self, "_kscatter", None) is None:
            f = self.free
            pos = -np.ones(self.ndof, dtype=int)
            pos[f] = np.arange(len(f))
            nf = len(f)
            S = np.zeros((len(self.conn), nf * nf))
            for e in range(len(self.conn)):
                p = pos[self.elem_dofs[e]]
                keep = p >= 0
                idx = (p[keep][:, None] * nf + p[keep][None, :]).ravel()
                np.add.at(S[e], idx, self.k0[e][np.ix_(keep, keep)].ravel())
            self._kscatter = S
        return self._kscatter

    def solve_u_batch(self, t, chi, d):
        """Dense direct elastic solve for a batch of (chi, d); small meshes only."""
        chibar, dbar = self.bary(chi, d)
        g = cst.degradation(chibar, self.material)
        pre = self.e_D(t) - (1.0 - chibar)[..., None] * dbar
        sig = g[..., None] * cst.base_stress_arr(pre, self.material)
        X = ((self.vol[:, None] * self.weights) * sig).reshape(len(chi), -1)
        rhs = self.force(t).ravel() - (self.Bu.T @ X.T).T
        f = self.free
        nf = len(f)
        K = (g @ self._free_scatter()).reshape(len(chi), nf, nf)
        u = np.zeros((len(chi), self.ndof))
        u[:, f] = np.linalg.solve(K, rhs[:, f][..., None])[..., 0]
        return u.reshape(len(chi), -1, self.dim)

    def solve_u_many(self, t, chi, d, rtol=1e-10, chunk=None):
        """Elastic solves for a batch; dense batched on small meshes, CG otherwise."""
        nf = len(self.free)
        if nf > _BATCH_DOF_LIMIT:
            return np.stack([self.solve_u(t, c, dd, rtol=rtol) for c, dd in zip(chi, d)])
        chunk = chunk or max(1, int(_BATCH_BYTES // (8 * nf * nf)))
        return np.concatenate(
            [self.solve_u_batch(t, chi[i : i + chunk], d[i : i + chunk]) for i in range(0, len(chi), chunk)]
        )

    # --- dissipation ---------------------------------------------------

    def dissipation(self, chi_from, d_from, chi_to, d_to):
        """Lumped ``R(z_to - z_from)``; ``inf`` if damage would heal anywhere."""
        mat = self.material
        dchi = chi_to - chi_from
        val = np.einsum(
            "n,...n->...",
            self.lumped,
            mat.nu_diss * np.abs(dchi) + mat.mu_diss * frob_norm_arr(d_to - d_from),
        )
        return np.where((dchi > 0).any(axis=-1), math.inf, val)

    def project_d(self, d):
        return project_K_arr(project_subspace_arr(d, self.material.subspace), self.material.k_set)

    def project_gradient_d(self, gd):
        if self.material.subspace is SubspaceS.DEVIATORIC:
            return project_subspace_arr(gd, SubspaceS.DEVIATORIC)
        return gd


def _nodal(op, x, ntail):
    """Apply a sparse operator along the node axis of ``x`` (``ntail`` trailing axes)."""
    if x.ndim == 1 + ntail:
        return op @ x
    lead, N = x.shape[: x.ndim - 1 - ntail], x.shape[x.ndim - 1 - ntail]
    tail = x.shape[x.ndim - ntail:]
    xm = np.moveaxis(x.reshape((-1, N) + tail), 1, 0).reshape(N, -1)
    y = (op @ xm).reshape((op.shape[0], -1) + tail)
    return np.moveaxis(y, 0, 1).reshape(lead + (op.shape[0],) + tail)


def _disc(scenario):
    if isinstance(scenario, Discretization):
        return scenario
    return scenario.disc


def check_fields(fields, scenario, feasible=True):
    disc = _disc(scenario)
    fields.check_conforming(disc.mesh)
    if feasible:
        if not disc.feasible_chi(fields.chi):
            raise DomainError("damage field leaves [0, 1]")
        if not disc.feasible_d(fields.d):
            raise DomainError("plastic strain leaves K or S")
        if np.any(fields.u[disc.fixed] != 0.0):
            raise DomainError("displacement must vanish on the Dirichlet boundary")


def assemble_energy(t, fields, scenario):
    """Energy breakdown ``(W - <F,u>, J, G, H)``; the total is ``inf`` if infeasible."""
    disc = _disc(scenario)
    fields.check_conforming(disc.mesh)
    return disc.energy(t, fields)


def assemble_power(t, fields, scenario):
    """Partial time derivative of the energy at fixed state."""
    disc = _disc(scenario)
    fields.check_conforming(disc.mesh)
    return disc.power(t, fields)


def elastic_solve(t, chi, d_tensor, scenario, rtol=None):
    """Displacement minimizing the energy for fixed internal variables."""
    disc = _disc(scenario)
    chi = np.asarray(chi, dtype=float)
    d_tensor = np.asarray(d_tensor, dtype=float)
    if chi.shape != (disc.mesh.n_nodes,) or d_tensor.shape != (disc.mesh.n_nodes, disc.m):
        raise ValueError("internal variables do not conform to the mesh")
    if rtol is None:
        rtol = getattr(getattr(scenario, "solver", None), "cg_rtol", 1e-10)
    return disc.solve_u(t, chi, d_tensor, rtol=rtol)


def energy_gradient_blocks(t, fields, scenario):
    """``(grad_u, grad_chi, grad_d)`` of the smooth energy part at a feasible state."""
    disc = _disc(scenario)
    check_fields(fields, scenario)
    return disc.gradients(t, fields.u, fields.chi, fields.d)
