"""Hot-kernel backend selection.

The compiled Cython module ``_core`` is preferred; when it is missing (source
checkout without a build step) or when ``PLATEHOM_PURE_PYTHON=1`` is set, the
numpy implementations in ``pykernels`` are used instead.  Both backends share
the exact same call signatures and are cross-checked in the test suite.
"""

import os

from . import pykernels

BACKEND = "python"

if os.environ.get("PLATEHOM_PURE_PYTHON", "0") != "1":
    try:
        from . import _core

        BACKEND = "cython"
    except ImportError:
        _core = None
else:
    _core = None

_impl = _core if BACKEND == "cython" else pykernels


def backend_name():
    """Name of the active kernel backend: 'cython' or 'python'."""
    return BACKEND


def apply_quadform_field(q, v):
    return _impl.apply_quadform_field(q, v)


def quadform_energy(q, v, w):
    return _impl.quadform_energy(q, v, w)


def green_strain_voigt(f):
    return _impl.green_strain_voigt(f)
