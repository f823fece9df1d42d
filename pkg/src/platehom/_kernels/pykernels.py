"""Pure numpy implementations of the hot pointwise kernels.

These mirror the compiled routines in ``_core.pyx`` one to one; the package
selects between the two at import time (see ``platehom._kernels``).  All
kernels operate on stacks of small dense blocks: ``q`` holds one symmetric
``d x d`` matrix per point, ``v`` one ``d``-vector per point.
"""

import numpy as np

_SQRT2 = np.sqrt(2.0)


def apply_quadform_field(q, v):
    """Pointwise matrix-vector product: out[p] = q[p] @ v[p].

    q : (n, d, d) float64, v : (n, d) float64 -> (n, d) float64
    """
    return np.einsum("pij,pj->pi", q, v)


def quadform_energy(q, v, w):
    """Weighted quadratic accumulation: sum_p w[p] * v[p].T @ q[p] @ v[p]."""
    return float(np.einsum("p,pi,pij,pj->", w, v, q, v))


def green_strain_voigt(f):
    """Green-Lagrange strain of deformation gradients, in orthonormal Voigt form.

    f : (n, 3, 3) float64 -> (n, 6) float64 with component order
    (E11, E22, E33, sqrt(2) E23, sqrt(2) E13, sqrt(2) E12) for
    E = (F^T F - I) / 2.
    """
    c = np.einsum("pki,pkj->pij", f, f)
    out = np.empty(f.shape[:1] + (6,))
    out[:, 0] = 0.5 * (c[:, 0, 0] - 1.0)
    out[:, 1] = 0.5 * (c[:, 1, 1] - 1.0)
    out[:, 2] = 0.5 * (c[:, 2, 2] - 1.0)
    out[:, 3] = 0.5 * _SQRT2 * c[:, 1, 2]
    out[:, 4] = 0.5 * _SQRT2 * c[:, 0, 2]
    out[:, 5] = 0.5 * _SQRT2 * c[:, 0, 1]
    return out
