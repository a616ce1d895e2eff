"""Small-dimension symmetric tensor algebra.

Symmetric second-order tensors are stored by their independent components
only, in the order

    d=1: (11,)
    d=2: (11, 22, 12)
    d=3: (11, 22, 33, 23, 13, 12)

Norms and inner products are those of the full d x d matrix, so every
off-diagonal component carries weight 2. Fourth-order tensors with minor
symmetries are stored as the (m, m) matrix acting on these components.

Besides the immutable value types, the module exposes array kernels
(``*_arr``) that broadcast over leading axes; the finite-element code
works with those directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "SymTensor2",
    "Tensor4",
    "SubspaceS",
    "ConvexSetK",
    "n_components",
    "dim_from_components",
    "component_weights",
    "identity_components",
    "frob_inner",
    "frob_norm",
    "project_subspace",
    "project_K",
    "apply_tensor4",
    "isotropic_tensor4",
    "identity_tensor4",
]


def n_components(dim):
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    return dim * (dim + 1) // 2


def dim_from_components(m):
    try:
        return {1: 1, 3: 2, 6: 3}[m]
    except KeyError:
        raise ValueError(f"{m} is not a valid number of symmetric components") from None


@lru_cache(maxsize=None)
def _index_pairs(dim):
    diag = [(i, i) for i in range(dim)]
    if dim == 1:
        off = []
    elif dim == 2:
        off = [(0, 1)]
    else:
        off = [(1, 2), (0, 2), (0, 1)]
    return tuple(diag + off)


@lru_cache(maxsize=None)
def _weights(dim):
    w = np.ones(n_components(dim))
    w[dim:] = 2.0
    w.setflags(write=False)
    return w


def component_weights(dim):
    """Frobenius weights of the stored components (1 on the diagonal, 2 off it)."""
    return _weights(dim)


@lru_cache(maxsize=None)
def _identity(dim):
    e = np.zeros(n_components(dim))
    e[:dim] = 1.0
    e.setflags(write=False)
    return e


def identity_components(dim):
    return _identity(dim)


# --- array kernels -------------------------------------------------------


def frob_inner_arr(a, b):
    """Frobenius product of component arrays, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"component mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    w = _weights(dim_from_components(a.shape[-1]))
    return (a * b) @ w


def frob_norm_arr(a):
    return np.sqrt(np.maximum(frob_inner_arr(a, a), 0.0))


def trace_arr(a):
    a = np.asarray(a, dtype=float)
    d = dim_from_components(a.shape[-1])
    return np.sum(a[..., :d], axis=-1)


def deviatoric_arr(a):
    a = np.asarray(a, dtype=float)
    d = dim_from_components(a.shape[-1])
    out = a.copy()
    out[..., :d] -= (np.sum(a[..., :d], axis=-1) / d)[..., None]
    return out


def project_subspace_arr(a, subspace):
    subspace = SubspaceS(subspace)
    if subspace is SubspaceS.FULL:
        return np.array(a, dtype=float, copy=True)
    return deviatoric_arr(a)


def project_K_arr(a, kset):
    """Nearest point of ``kset`` for each row of ``a`` (rows assumed in S)."""
    a = np.asarray(a, dtype=float)
    if kset.radius is None:
        return a.copy()
    nrm = frob_norm_arr(a)
    scale = np.ones_like(nrm)
    outside = nrm > kset.radius
    scale[outside] = kset.radius / nrm[outside]
    return a * scale[..., None]


def to_matrix_arr(a):
    a = np.asarray(a, dtype=float)
    d = dim_from_components(a.shape[-1])
    out = np.zeros(a.shape[:-1] + (d, d))
    for c, (i, j) in enumerate(_index_pairs(d)):
        out[..., i, j] = a[..., c]
        out[..., j, i] = a[..., c]
    return out


def from_matrix_arr(mat):
    """Components of the symmetric part of ``mat``."""
    mat = np.asarray(mat, dtype=float)
    d = mat.shape[-1]
    pairs = _index_pairs(d)
    out = np.empty(mat.shape[:-2] + (len(pairs),))
    for c, (i, j) in enumerate(pairs):
        out[..., c] = 0.5 * (mat[..., i, j] + mat[..., j, i])
    return out


# --- value types ---------------------------------------------------------


class SubspaceS(str, Enum):
    """Admissible subspace for the plastic strain."""

    FULL = "full"
    DEVIATORIC = "deviatoric"


@dataclass(frozen=True)
class ConvexSetK:
    """Closed convex subset of S: either all of S or a Frobenius ball.

    ``radius=None`` means the whole subspace.
    """

    radius: float | None = None

    def __post_init__(self):
        if self.radius is not None and not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def all_of_s(cls):
        return cls(None)

    @classmethod
    def ball(cls, radius):
        return cls(float(radius))

    def contains(self, a, tol=0.0):
        if self.radius is None:
            return True
        return bool(np.all(frob_norm_arr(a) <= self.radius * (1.0 + tol)))


class SymTensor2:
    """Immutable symmetric second-order tensor."""

    __slots__ = ("_c", "dim")

    def __init__(self, components, dim=None):
        c = np.array(components, dtype=float).reshape(-1)
        d = dim_from_components(c.size)
        if dim is not None and dim != d:
            raise ValueError(f"{c.size} components do not describe a {dim}-d tensor")
        c.setflags(write=False)
        self._c = c
        self.dim = d

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("expected a square matrix")
        return cls(from_matrix_arr(mat))

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(n_components(dim)))

    @classmethod
    def identity(cls, dim):
        return cls(_identity(dim))

    @property
    def components(self):
        return self._c

    def matrix(self):
        return to_matrix_arr(self._c)

    def trace(self):
        return float(np.sum(self._c[: self.dim]))

    def norm(self):
        # scaled so that tiny entries do not underflow to a zero norm
        s = float(np.max(np.abs(self._c)))
        return s * float(frob_norm_arr(self._c / s)) if s > 0 else 0.0

    def __add__(self, other):
        _check_same_dim(self, other)
        return SymTensor2(self._c + other._c)

    def __sub__(self, other):
        _check_same_dim(self, other)
        return SymTensor2(self._c - other._c)

    def __mul__(self, s):
        return SymTensor2(self._c * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return SymTensor2(-self._c)

    def __eq__(self, other):
        return (
            isinstance(other, SymTensor2)
            and other.dim == self.dim
            and np.array_equal(other._c, self._c)
        )

    def __hash__(self):
        return hash((self.dim, self._c.tobytes()))

    def allclose(self, other, atol=1e-12):
        _check_same_dim(self, other)
        return bool(np.allclose(self._c, other._c, rtol=0.0, atol=atol))

    def __repr__(self):
        return f"SymTensor2({self._c.tolist()})"


class Tensor4:
    """Immutable fourth-order tensor acting on symmetric tensors."""

    __slots__ = ("_m", "dim")

    def __init__(self, matrix, dim=None):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("Tensor4 needs a square component matrix")
        d = dim_from_components(m.shape[0])
        if dim is not None and dim != d:
            raise ValueError("dimension mismatch")
        m.setflags(write=False)
        self._m = m
        self.dim = d

    @property
    def matrix(self):
        return self._m

    def __mul__(self, s):
        return Tensor4(self._m * float(s))

    __rmul__ = __mul__

    def norm(self):
        """Operator norm w.r.t. the Frobenius inner product."""
        w = np.sqrt(_weights(self.dim))
        sym = (w[:, None] * self._m) / w[None, :]
        return float(np.linalg.norm(sym, 2))

    def __repr__(self):
        return f"Tensor4(dim={self.dim})"


def _check_same_dim(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def frob_inner(a, b):
    """Full-matrix Frobenius product ``sum_ij a_ij b_ij``."""
    _check_same_dim(a, b)
    return float(frob_inner_arr(a.components, b.components))


def frob_norm(a):
    return a.norm()


def project_subspace(a, s):
    return SymTensor2(project_subspace_arr(a.components, s))


def project_K(a, k):
    return SymTensor2(project_K_arr(a.components, k))


def apply_tensor4(k, a):
    _check_same_dim(k, a)
    return SymTensor2(k.matrix @ a.components)


def isotropic_tensor4(dim, lame_lambda, lame_mu):
    """``a -> lambda tr(a) Id + 2 mu a``."""
    e = _identity(dim)
    return Tensor4(lame_lambda * np.outer(e, e) + 2.0 * lame_mu * np.eye(n_components(dim)))


def identity_tensor4(dim):
    return Tensor4(np.eye(n_components(dim)))
