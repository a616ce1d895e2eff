"""Pointwise constitutive densities of the damage/plasticity model.

All functions broadcast: ``chi`` may be a scalar or an array, and plastic
strains are component arrays with the component axis last (see
:mod:`damageplast.tensor`). :class:`~damageplast.tensor.SymTensor2` values
are accepted wherever a single tensor is expected and a ``SymTensor2`` is
returned in that case.

Indicator terms evaluate to ``math.inf``; they are never approximated by a
large penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError
from .tensor import (
    ConvexSetK,
    SubspaceS,
    SymTensor2,
    Tensor4,
    frob_inner_arr,
    frob_norm_arr,
    identity_components,
    isotropic_tensor4,
    n_components,
    trace_arr,
)

W1_VARIANTS = ("inhibit", "double-well")

# relative slack when testing membership of projected points
_SET_TOL = 1e-12


@dataclass(frozen=True)
class MaterialParams:
    """Material constants.

    ``beta`` scales the damage potential W1 as ``(beta/alpha) * w1(chi)``;
    ``plastic_well_weight`` and ``plastic_gradient_weight`` scale the two
    parts of the plastic regularization ``(|D|^2-1)^2 + |grad D|^q / q``.
    """

    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    k_min: float = 0.1
    w: float = 0.1
    alpha: float = 0.01
    beta: float = 0.0
    w1_variant: str = "double-well"
    mu_diss: float = 1.0
    nu_diss: float = 0.1
    q: float = 2.0
    subspace: SubspaceS = SubspaceS.FULL
    k_set: ConvexSetK = field(default_factory=ConvexSetK.all_of_s)
    plastic_well_weight: float = 1.0
    plastic_gradient_weight: float = 1.0
    r: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "subspace", SubspaceS(self.subspace))

    def violations(self, dim=None):
        """List every violated modelling assumption (empty when admissible)."""
        out = []
        if not self.lame_mu > 0:
            out.append("stiffness bounds: lame_mu must be > 0 (K1 > 0)")
        if not self.lame_lambda >= 0:
            out.append("stiffness bounds: lame_lambda must be >= 0")
        if not (0.0 < self.k_min <= 1.0):
            out.append("stiffness bounds: k_min must lie in (0, 1] (degenerate stiffness excluded)")
        if not self.w > 0:
            out.append("coupling term H: w must be > 0")
        if not self.alpha > 0:
            out.append("damage regularization J: alpha must be > 0")
        if not self.beta >= 0:
            out.append("damage regularization J: beta must be >= 0")
        if self.w1_variant not in W1_VARIANTS:
            out.append(f"damage regularization J: w1_variant must be one of {W1_VARIANTS}")
        if not self.mu_diss > 0:
            out.append("dissipation: mu_diss must be > 0")
        if not self.nu_diss > 0:
            out.append("dissipation: nu_diss must be > 0")
        if self.r != 2.0:
            out.append("damage regularization J: gradient exponent r is fixed to 2")
        if not self.plastic_well_weight >= 0 or not self.plastic_gradient_weight >= 0:
            out.append("plastic regularization G: weights must be >= 0")
        q_lo = 2.0 * dim / (dim + 2.0) if dim else 1.0
        if not (q_lo <= self.q <= 4.0) or not self.q > 1.0:
            out.append(
                f"plastic regularization G growth: q must satisfy max(1, 2d/(d+2)) <= q <= 4, "
                f"got q={self.q} (lower bound {q_lo:.4g})"
            )
        return out

    def stiffness_bounds(self, dim):
        """``(K1, K2)`` with ``K1 |e|^2 <= e:K(chi):e <= K2 |e|^2`` on [0, 1]."""
        k1 = self.k_min * 2.0 * self.lame_mu
        k2 = dim * self.lame_lambda + 2.0 * self.lame_mu
        return k1, k2

    def base_stiffness(self, dim):
        return isotropic_tensor4(dim, self.lame_lambda, self.lame_mu)

    def with_(self, **changes):
        return replace(self, **changes)


def _unwrap(a):
    if isinstance(a, SymTensor2):
        return a.components, True
    return np.asarray(a, dtype=float), False


def _check_chi(chi):
    chi = np.asarray(chi, dtype=float)
    if np.any(~np.isfinite(chi)) or np.any(chi < 0.0) or np.any(chi > 1.0):
        raise DomainError("damage variable must lie in [0, 1]")
    return chi


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# --- inelastic strain ----------------------------------------------------


def eval_xi(chi, d_tensor):
    """Inelastic strain ``(1 - chi) D``."""
    chi = _check_chi(chi)
    d, wrapped = _unwrap(d_tensor)
    xi = (1.0 - chi)[..., None] * d
    return SymTensor2(xi) if wrapped else xi


def xi_partials(chi, d_tensor):
    """``(dXi/dchi, s)`` where ``dXi/dchi = -D`` and ``dXi/dD`` is ``A -> s A``."""
    chi = _check_chi(chi)
    d, wrapped = _unwrap(d_tensor)
    dchi = -d
    return (SymTensor2(dchi) if wrapped else dchi), _scalar(1.0 - chi)


# --- stiffness -----------------------------------------------------------


def degradation(chi, mat):
    """Stiffness factor ``k_min + (1 - k_min) chi^2``."""
    chi = np.asarray(chi, dtype=float)
    return mat.k_min + (1.0 - mat.k_min) * chi**2


def degradation_prime(chi, mat):
    return 2.0 * (1.0 - mat.k_min) * np.asarray(chi, dtype=float)


def eval_stiffness(chi, mat, dim=2):
    chi = _check_chi(chi)
    if chi.ndim:
        raise ValueError("eval_stiffness takes a scalar damage value")
    return Tensor4(float(degradation(chi, mat)) * mat.base_stiffness(dim).matrix)


def base_stress_arr(eps, mat):
    """``K0 : eps`` on component arrays."""
    eps = np.asarray(eps, dtype=float)
    d = _dim(eps)
    tr = trace_arr(eps)
    return 2.0 * mat.lame_mu * eps + mat.lame_lambda * tr[..., None] * identity_components(d)


def base_energy_arr(eps, mat):
    """``eps : K0 : eps`` on component arrays."""
    eps = np.asarray(eps, dtype=float)
    tr = trace_arr(eps)
    return mat.lame_lambda * tr**2 + 2.0 * mat.lame_mu * frob_inner_arr(eps, eps)


def _dim(a):
    return {1: 1, 3: 2, 6: 3}[a.shape[-1]]


# --- coupling term H -----------------------------------------------------


def eval_H(chi, d_tensor, mat):
    chi = _check_chi(chi)
    d, _ = _unwrap(d_tensor)
    return _scalar((mat.w + 0.5 * frob_inner_arr(d, d)) * (1.0 - chi))


def H_partials(chi, d_tensor, mat):
    """``(dH/dchi, dH/dD)``; the tensor partial is the Frobenius gradient."""
    chi = _check_chi(chi)
    d, wrapped = _unwrap(d_tensor)
    dchi = _scalar(-mat.w - 0.5 * frob_inner_arr(d, d))
    dd = (1.0 - chi)[..., None] * d
    return dchi, (SymTensor2(dd) if wrapped else dd)


# --- damage regularization J ---------------------------------------------


def w1(chi, mat):
    chi = np.asarray(chi, dtype=float)
    c = mat.beta / mat.alpha
    if mat.w1_variant == "inhibit":
        return c * (1.0 - chi) ** 2
    return c * chi**2 * (1.0 - chi) ** 2


def w1_prime(chi, mat):
    chi = np.asarray(chi, dtype=float)
    c = mat.beta / mat.alpha
    if mat.w1_variant == "inhibit":
        return -2.0 * c * (1.0 - chi)
    return 2.0 * c * chi * (1.0 - chi) * (1.0 - 2.0 * chi)


def eval_J_density(chi, grad_chi, mat):
    """``I_[0,1](chi) + alpha/2 |grad chi|^2 + W1(chi)``."""
    chi = np.asarray(chi, dtype=float)
    g = np.asarray(grad_chi, dtype=float)
    smooth = 0.5 * mat.alpha * np.sum(g * g, axis=-1) + w1(chi, mat)
    out = np.where((chi >= 0.0) & (chi <= 1.0), smooth, math.inf)
    return _scalar(out)


def J_partials(chi, grad_chi, mat):
    """Partials of the smooth part: ``(dJ/dchi, dJ/dgrad_chi)``."""
    g = np.asarray(grad_chi, dtype=float)
    return _scalar(w1_prime(chi, mat)), mat.alpha * g


# --- plastic regularization G --------------------------------------------


def grad_d_norm2(grad_d):
    """``|grad D|^2`` for gradients shaped ``(..., m, dim)`` (full-matrix norm)."""
    gd = np.asarray(grad_d, dtype=float)
    w = np.ones(gd.shape[-2])
    w[_dim_from_m(gd.shape[-2]):] = 2.0
    return np.einsum("...ck,c->...", gd * gd, w)


def _dim_from_m(m):
    return {1: 1, 3: 2, 6: 3}[m]


def in_admissible_set(d, mat, tol=_SET_TOL):
    """Boolean mask: plastic strain in ``K`` (and in S)."""
    d = np.asarray(d, dtype=float)
    ok = np.ones(d.shape[:-1], dtype=bool)
    if mat.subspace is SubspaceS.DEVIATORIC:
        scale = 1.0 + frob_norm_arr(d)
        ok &= np.abs(trace_arr(d)) <= 1e-12 * scale
    if mat.k_set.radius is not None:
        ok &= frob_norm_arr(d) <= mat.k_set.radius * (1.0 + tol)
    return ok


def g_smooth(d, grad_d, mat):
    d = np.asarray(d, dtype=float)
    s = frob_inner_arr(d, d)
    g2 = grad_d_norm2(grad_d)
    return mat.plastic_well_weight * (s - 1.0) ** 2 + mat.plastic_gradient_weight * g2 ** (
        mat.q / 2.0
    ) / mat.q


def eval_G_density(d_tensor, grad_d, mat):
    """``I_K(D) + (|D|^2 - 1)^2 + |grad D|^q / q`` (with the configured weights)."""
    d, _ = _unwrap(d_tensor)
    out = np.where(in_admissible_set(d, mat), g_smooth(d, grad_d, mat), math.inf)
    return _scalar(out)


def G_partials(d_tensor, grad_d, mat):
    """Frobenius partials of the smooth part: ``(dG/dD, dG/dgrad_D)``."""
    d, wrapped = _unwrap(d_tensor)
    gd = np.asarray(grad_d, dtype=float)
    s = frob_inner_arr(d, d)
    dd = 4.0 * mat.plastic_well_weight * (s - 1.0)[..., None] * d
    g2 = grad_d_norm2(gd)
    if mat.q == 2.0:
        fac = np.full_like(g2, mat.plastic_gradient_weight)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(g2 > 0, mat.plastic_gradient_weight * g2 ** (mat.q / 2.0 - 1.0), 0.0)
    dgrad = fac[..., None, None] * gd
    return (SymTensor2(dd) if wrapped else dd), dgrad


# --- dissipation ---------------------------------------------------------


def eval_dissipation_rate(delta_chi, delta_d, mat):
    """``nu |dchi| + mu |dD|`` with the unidirectionality indicator on ``dchi``."""
    dchi = np.asarray(delta_chi, dtype=float)
    dd, _ = _unwrap(delta_d)
    val = mat.nu_diss * np.abs(dchi) + mat.mu_diss * frob_norm_arr(dd)
    return _scalar(np.where(dchi > 0.0, math.inf, val))


def zero_strain(dim):
    return np.zeros(n_components(dim))
