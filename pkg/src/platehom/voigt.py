"""Quadratic forms on symmetric 2x2 / 3x3 matrices in an orthonormal Voigt basis.

Symmetric matrices are stored as coordinate vectors with sqrt(2)-scaled
off-diagonal entries, so the Euclidean norm of the coordinates equals the
Frobenius norm of the matrix and quadratic energy densities become plain SPD
matrices acting on coordinates.  Component order:

* 2x2: ``(A11, A22, sqrt(2) A12)``
* 3x3: ``(G11, G22, G33, sqrt(2) G23, sqrt(2) G13, sqrt(2) G12)``

The module also provides the in-plane injection ``iota`` and the pointwise
plane-stress reduction ``reduce2d`` (exact minimization over the out-of-plane
strain column, computed as a Schur complement).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)

# Positions of the in-plane / out-of-plane coordinates in the 3x3 Voigt vector.
PLANE_IDX = np.array([0, 1, 5])
OUT_IDX = np.array([2, 3, 4])


# ---------------------------------------------------------------------------
# batched coordinate transforms (array level, used throughout the solvers)
# ---------------------------------------------------------------------------

def sym2_to_coords(mat):
    """(... ,2,2) symmetric -> (...,3) orthonormal Voigt coordinates."""
    mat = np.asarray(mat, dtype=float)
    out = np.empty(mat.shape[:-2] + (3,))
    out[..., 0] = mat[..., 0, 0]
    out[..., 1] = mat[..., 1, 1]
    out[..., 2] = SQRT2 * 0.5 * (mat[..., 0, 1] + mat[..., 1, 0])
    return out


def coords_to_sym2(c):
    """(...,3) coordinates -> (...,2,2) symmetric matrix."""
    c = np.asarray(c, dtype=float)
    out = np.empty(c.shape[:-1] + (2, 2))
    out[..., 0, 0] = c[..., 0]
    out[..., 1, 1] = c[..., 1]
    out[..., 0, 1] = out[..., 1, 0] = c[..., 2] / SQRT2
    return out


def sym3_to_coords(mat):
    """(...,3,3) symmetric -> (...,6) orthonormal Voigt coordinates."""
    mat = np.asarray(mat, dtype=float)
    out = np.empty(mat.shape[:-2] + (6,))
    out[..., 0] = mat[..., 0, 0]
    out[..., 1] = mat[..., 1, 1]
    out[..., 2] = mat[..., 2, 2]
    out[..., 3] = SQRT2 * 0.5 * (mat[..., 1, 2] + mat[..., 2, 1])
    out[..., 4] = SQRT2 * 0.5 * (mat[..., 0, 2] + mat[..., 2, 0])
    out[..., 5] = SQRT2 * 0.5 * (mat[..., 0, 1] + mat[..., 1, 0])
    return out


def coords_to_sym3(c):
    """(...,6) coordinates -> (...,3,3) symmetric matrix."""
    c = np.asarray(c, dtype=float)
    out = np.empty(c.shape[:-1] + (3, 3))
    out[..., 0, 0] = c[..., 0]
    out[..., 1, 1] = c[..., 1]
    out[..., 2, 2] = c[..., 2]
    out[..., 1, 2] = out[..., 2, 1] = c[..., 3] / SQRT2
    out[..., 0, 2] = out[..., 2, 0] = c[..., 4] / SQRT2
    out[..., 0, 1] = out[..., 1, 0] = c[..., 5] / SQRT2
    return out


def iota_coords(c2):
    """Inject (...,3) in-plane coordinates into (...,6) with zero third row/column."""
    c2 = np.asarray(c2, dtype=float)
    out = np.zeros(c2.shape[:-1] + (6,))
    out[..., 0] = c2[..., 0]
    out[..., 1] = c2[..., 1]
    out[..., 5] = c2[..., 2]
    return out


def isotropic_voigt(mu, lam):
    """Voigt matrices of mu |G|^2 + (lam/2) (tr G)^2, broadcast over mu/lam arrays."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    t = np.zeros(6)
    t[:3] = 1.0  # coordinates of the 3x3 identity
    eye = np.eye(6)
    return mu[..., None, None] * eye + 0.5 * lam[..., None, None] * np.outer(t, t)


def reduce2d_voigt(q):
    """Schur complement of (...,6,6) Voigt matrices onto the in-plane block.

    Eliminates the three coordinates coupled to e3 (G33, sqrt(2) G23,
    sqrt(2) G13), realizing ``min_d Q(iota(A) + sym(d x e3))`` exactly.
    """
    q = np.asarray(q, dtype=float)
    kpp = q[..., PLANE_IDX[:, None], PLANE_IDX[None, :]]
    kpo = q[..., PLANE_IDX[:, None], OUT_IDX[None, :]]
    koo = q[..., OUT_IDX[:, None], OUT_IDX[None, :]]
    sol = np.linalg.solve(koo, np.swapaxes(kpo, -1, -2))
    red = kpp - kpo @ sol
    return 0.5 * (red + np.swapaxes(red, -1, -2))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sym2:
    """Symmetric 2x2 matrix stored by orthonormal Voigt coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (2, 2) or not np.allclose(mat, mat.T, atol=1e-13 * (1 + abs(mat).max())):
            raise ValueError("expected a symmetric 2x2 matrix")
        return cls(sym2_to_coords(mat))

    @property
    def matrix(self):
        return coords_to_sym2(self.coords)

    @property
    def norm(self):
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class Sym3:
    """Symmetric 3x3 matrix stored by orthonormal Voigt coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(6)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (3, 3) or not np.allclose(mat, mat.T, atol=1e-13 * (1 + abs(mat).max())):
            raise ValueError("expected a symmetric 3x3 matrix")
        return cls(sym3_to_coords(mat))

    @property
    def matrix(self):
        return coords_to_sym3(self.coords)

    @property
    def norm(self):
        return float(np.linalg.norm(self.coords))


def _check_spd(matrix, dim, name):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (dim, dim):
        raise ValueError(f"{name} expects a {dim}x{dim} Voigt matrix, got {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=1e-12 * (1 + abs(matrix).max())):
        raise ValueError(f"{name} matrix must be symmetric")
    matrix = 0.5 * (matrix + matrix.T)
    if np.linalg.eigvalsh(matrix)[0] <= 0:
        raise ValueError(f"{name} matrix must be positive definite")
    matrix.setflags(write=False)
    return matrix


def _as_coords(g, dim):
    if isinstance(g, (Sym2, Sym3)):
        return g.coords
    g = np.asarray(g, dtype=float)
    if g.shape[-1] == dim and g.ndim >= 1 and (g.ndim == 1 or g.shape[-2] != g.shape[-1]):
        return g
    if g.shape[-2:] == (2, 2) and dim == 3:
        return sym2_to_coords(g)
    if g.shape[-2:] == (3, 3) and dim == 6:
        return sym3_to_coords(g)
    raise ValueError(f"argument has dimension {g.shape}, expected Voigt length {dim}")


@dataclass(frozen=True)
class QuadForm3:
    """SPD quadratic form on symmetric 3x3 matrices (6x6 Voigt matrix)."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_spd(self.matrix, 6, "QuadForm3"))

    def eval(self, g):
        """Q(G) = coords(G)^T M coords(G); accepts Sym3, matrices, or coordinates."""
        c = _as_coords(g, 6)
        out = np.einsum("...i,ij,...j->...", c, self.matrix, c)
        return float(out) if np.ndim(out) == 0 else out

    def bilinear(self, g, h):
        """Symmetric polarization; bilinear(G, G) = eval(G)."""
        cg = _as_coords(g, 6)
        ch = _as_coords(h, 6)
        out = np.einsum("...i,ij,...j->...", cg, self.matrix, ch)
        return float(out) if np.ndim(out) == 0 else out

    def eigenvalue_range(self):
        w = np.linalg.eigvalsh(self.matrix)
        return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class QuadForm2:
    """SPD quadratic form on symmetric 2x2 matrices (3x3 Voigt matrix)."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_spd(self.matrix, 3, "QuadForm2"))

    def eval(self, a):
        c = _as_coords(a, 3)
        out = np.einsum("...i,ij,...j->...", c, self.matrix, c)
        return float(out) if np.ndim(out) == 0 else out

    def bilinear(self, a, b):
        ca = _as_coords(a, 3)
        cb = _as_coords(b, 3)
        out = np.einsum("...i,ij,...j->...", ca, self.matrix, cb)
        return float(out) if np.ndim(out) == 0 else out

    def eigenvalue_range(self):
        w = np.linalg.eigvalsh(self.matrix)
        return float(w[0]), float(w[-1])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def iota(a: Sym2) -> Sym3:
    """Natural injection of a symmetric 2x2 matrix: zero third row and column."""
    if not isinstance(a, Sym2):
        a = Sym2(_as_coords(a, 3))
    return Sym3(iota_coords(a.coords))


def isotropic(mu: float, lam: float) -> QuadForm3:
    """Isotropic form mu |G|^2 + (lam/2) (tr G)^2.

    Requires mu > 0 and lam >= 0; negative lam is rejected even where the form
    would remain positive definite, to keep the eigenvalue bounds elementary.
    """
    if mu <= 0:
        raise ValueError("non-positive shear modulus")
    if lam < 0:
        raise ValueError("negative first Lame parameter is not supported")
    return QuadForm3(isotropic_voigt(float(mu), float(lam)))


def reduce2d(q: QuadForm3) -> QuadForm2:
    """Plane-stress reduction min over the e3-coupled strain column.

    For every A: eval(reduce2d(Q), A) = min_{d in R^3} eval(Q, iota(A) + sym(d x e3)).
    The minimum of a strictly convex quadratic in the three eliminated Voigt
    coordinates is the Schur complement of the 6x6 matrix.
    """
    return QuadForm2(reduce2d_voigt(q.matrix))


def check_bounds(q, c1: float, c2: float) -> bool:
    """True iff all eigenvalues of the Voigt matrix lie in [c1, c2]."""
    if c1 <= 0 or c2 <= 0:
        raise ValueError("bounds must be positive")
    lo, hi = q.eigenvalue_range()
    return bool(lo >= c1 - 1e-12 * c1 and hi <= c2 + 1e-12 * c2)
