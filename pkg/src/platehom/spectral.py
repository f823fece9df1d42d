"""Shared Fourier-collocation plumbing for the torus solvers.

Coefficient convention: an array ``c`` of shape (..., n1, n2) indexed in numpy
FFT frequency order represents ``f(y) = sum_xi c[xi] exp(2 pi i xi . y)``;
``coeff_to_grid``/``grid_to_coeff`` convert between coefficients and samples
on the uniform lattice ``y_j = j / n``.  With the discrete cell inner product
``(1/(n1 n2)) sum_j f_j conj(g_j)`` these two maps are mutually adjoint, which
the solvers rely on when assembling operator transposes.
"""

import numpy as np


def int_frequencies(n1, n2):
    """Integer frequency grids (xi1, xi2), each of shape (n1, n2), FFT order."""
    f1 = np.fft.fftfreq(n1, d=1.0 / n1).astype(int)
    f2 = np.fft.fftfreq(n2, d=1.0 / n2).astype(int)
    return np.meshgrid(f1, f2, indexing="ij")


def mode_mask(n1, n2, modes):
    """Active-frequency mask for the truncation xi in {-N..N}^2 minus {0}."""
    xi1, xi2 = int_frequencies(n1, n2)
    mask = (np.abs(xi1) <= modes) & (np.abs(xi2) <= modes)
    mask[0, 0] = False
    return mask


def wavenumbers(n1, n2):
    """Angular wavenumbers k = 2 pi xi for both directions."""
    xi1, xi2 = int_frequencies(n1, n2)
    return 2.0 * np.pi * xi1, 2.0 * np.pi * xi2


def coeff_to_grid(c):
    """Coefficients -> real grid samples (last two axes are the torus)."""
    n1, n2 = c.shape[-2:]
    return (n1 * n2) * np.fft.ifft2(c, axes=(-2, -1))


def grid_to_coeff(g):
    """Grid samples -> coefficients (adjoint of coeff_to_grid)."""
    n1, n2 = g.shape[-2:]
    return np.fft.fft2(g, axes=(-2, -1)) / (n1 * n2)
