import numpy as np
import pytest

from platehom._kernels import backend_name, pykernels

try:
    from platehom._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _inputs(rng, n, d):
    q = rng.standard_normal((n, d, d))
    q = q @ np.swapaxes(q, -1, -2) + 2 * np.eye(d)
    v = rng.standard_normal((n, d))
    w = rng.uniform(0.1, 1.0, n)
    return q, v, w


class TestPythonKernels:
    def test_apply_matches_direct(self):
        rng = np.random.default_rng(0)
        q, v, _ = _inputs(rng, 50, 3)
        out = pykernels.apply_quadform_field(q, v)
        for p in range(50):
            assert np.allclose(out[p], q[p] @ v[p])

    def test_energy_matches_direct(self):
        rng = np.random.default_rng(1)
        q, v, w = _inputs(rng, 50, 6)
        expect = sum(w[p] * v[p] @ q[p] @ v[p] for p in range(50))
        assert pykernels.quadform_energy(q, v, w) == pytest.approx(expect, rel=1e-13)

    def test_green_strain_voigt(self):
        rng = np.random.default_rng(2)
        f = np.eye(3) + 0.1 * rng.standard_normal((20, 3, 3))
        out = pykernels.green_strain_voigt(f)
        for p in range(20):
            e = 0.5 * (f[p].T @ f[p] - np.eye(3))
            expect = np.array([e[0, 0], e[1, 1], e[2, 2],
                               np.sqrt(2) * e[1, 2], np.sqrt(2) * e[0, 2],
                               np.sqrt(2) * e[0, 1]])
            assert np.allclose(out[p], expect, atol=1e-15)


@needs_core
class TestBackendParity:
    @pytest.mark.parametrize("d", [3, 6])
    def test_apply(self, d):
        rng = np.random.default_rng(3)
        q, v, _ = _inputs(rng, 1000, d)
        assert np.allclose(_core.apply_quadform_field(q, v),
                           pykernels.apply_quadform_field(q, v),
                           rtol=1e-14, atol=1e-14)

    @pytest.mark.parametrize("d", [3, 6])
    def test_energy(self, d):
        rng = np.random.default_rng(4)
        q, v, w = _inputs(rng, 1000, d)
        a = _core.quadform_energy(q, v, w)
        b = pykernels.quadform_energy(q, v, w)
        assert a == pytest.approx(b, rel=1e-12)

    def test_green_strain(self):
        rng = np.random.default_rng(5)
        f = np.eye(3) + 0.2 * rng.standard_normal((500, 3, 3))
        assert np.allclose(_core.green_strain_voigt(f),
                           pykernels.green_strain_voigt(f),
                           rtol=1e-14, atol=1e-15)

    def test_read_only_inputs_accepted(self):
        rng = np.random.default_rng(6)
        q, v, w = _inputs(rng, 10, 3)
        for arr in (q, v, w):
            arr.setflags(write=False)
        _core.apply_quadform_field(q, v)
        _core.quadform_energy(q, v, w)


def test_backend_name_reports_selection():
    assert backend_name() in ("cython", "python")
