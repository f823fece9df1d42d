import numpy as np
import pytest

from platehom.cell import SolverConvergenceError, homogenize
from platehom.gamma import (
    GammaProblem,
    default_x3_elems,
    gamma_limit_study,
    solve_gamma,
    solve_gamma_details,
)
from platehom.material import material_from_config, reduce_field
from platehom.oracles import dense_gamma_oracle
from platehom.voigt import iota_coords, isotropic, reduce2d

from .test_material import iso_config

E1 = np.array([1.0, 0.0, 0.0])


def homogeneous_field(mu=1.0, lam=1.0, grid=16):
    return material_from_config(iso_config(mu=str(mu), lam=str(lam),
                                           grid=(grid, grid)))


def layered_field(lam="1", grid=32, x3=2):
    return material_from_config(iso_config(mu="2 + cos(2*pi*y1)", lam=lam,
                                           grid=(grid, grid), x3_nodes=x3))


class TestSolveGamma:
    def test_homogeneous_gamma_independent(self):
        fld = homogeneous_field()
        vals = [solve_gamma(GammaProblem(field=fld, a=E1, gamma=g, modes=2,
                                         x3_elems=8)) for g in (1.0, 0.1, 0.01)]
        for v in vals[1:]:
            assert v == pytest.approx(vals[0], rel=1e-8)

    def test_homogeneous_value_has_known_thickness_floor(self):
        # with piecewise-linear thickness correctors the homogeneous value is
        # (1/12) Q2(A) + (1/(12 M^2)) (Q(iota A) - Q2(A)), exactly
        fld = homogeneous_field()
        q3 = isotropic(1.0, 1.0)
        q2 = reduce2d(q3)
        for m in (4, 8, 16):
            val = solve_gamma(GammaProblem(field=fld, a=E1, gamma=0.5, modes=2,
                                           x3_elems=m))
            floor = (q3.eval(iota_coords(E1)) - q2.eval(E1)) / (12.0 * m ** 2)
            assert val == pytest.approx(q2.eval(E1) / 12.0 + floor, rel=1e-11)

    def test_zero_direction(self):
        fld = homogeneous_field()
        det = solve_gamma_details(GammaProblem(field=fld, a=np.zeros(3),
                                               gamma=1.0, modes=2, x3_elems=4))
        assert det.energy == 0.0

    def test_certificate(self):
        fld = layered_field()
        det = solve_gamma_details(GammaProblem(field=fld, a=E1, gamma=0.5,
                                               modes=3, x3_elems=6, tol=1e-11))
        assert det.residual <= 1e-11
        assert det.energy == pytest.approx(det.energy_quadrature, rel=1e-10)
        mass = np.full(7, 1.0 / 6.0)
        mass[0] = mass[-1] = 1.0 / 12.0
        mean = np.einsum("i,cikl->ckl", mass, det.phi_nodes)[:, 0, 0]
        assert np.abs(mean).max() < 1e-12

    def test_rejects_bad_parameters(self):
        fld = homogeneous_field()
        with pytest.raises(ValueError, match="gamma"):
            GammaProblem(field=fld, a=E1, gamma=0.0, modes=2, x3_elems=4)
        with pytest.raises(ValueError, match="thickness"):
            GammaProblem(field=fld, a=E1, gamma=1.0, modes=2, x3_elems=1)
        with pytest.raises(ValueError, match="too coarse"):
            GammaProblem(field=fld, a=E1, gamma=1.0, modes=4, x3_elems=4)

    def test_nonconvergence_explicit(self):
        fld = layered_field()
        with pytest.raises(SolverConvergenceError):
            solve_gamma(GammaProblem(field=fld, a=E1, gamma=0.25, modes=3,
                                     x3_elems=8, tol=1e-12, max_iter=2))


class TestStructure:
    def test_feasibility_bound(self):
        fld = layered_field()
        det = solve_gamma_details(GammaProblem(field=fld, a=E1, gamma=0.7,
                                               modes=3, x3_elems=6))
        assert det.energy <= det.diagnostics["feasible_upper_bound"] + 1e-12

    def test_parallelogram_law(self):
        rng = np.random.default_rng(5)
        fld = layered_field()
        a1 = rng.standard_normal(3)
        a2 = rng.standard_normal(3)
        val = lambda a: solve_gamma(GammaProblem(field=fld, a=a, gamma=0.6,
                                                 modes=2, x3_elems=4, tol=1e-12))
        lhs = val(a1 + a2) + val(a1 - a2)
        rhs = 2 * val(a1) + 2 * val(a2)
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_x3_mesh_monotonicity(self):
        fld = layered_field()
        vals = [solve_gamma(GammaProblem(field=fld, a=E1, gamma=0.5, modes=3,
                                         x3_elems=m, tol=1e-12))
                for m in (2, 4, 8)]
        assert vals[0] >= vals[1] - 1e-11
        assert vals[1] >= vals[2] - 1e-11

    def test_dense_oracle_agreement(self):
        fld = layered_field(grid=16)
        for gamma in (1.0, 0.3):
            v1 = dense_gamma_oracle(fld, E1, gamma=gamma, modes=1, x3_elems=3)
            v2 = solve_gamma(GammaProblem(field=fld, a=E1, gamma=gamma,
                                          modes=1, x3_elems=3, tol=1e-12))
            assert v1 == pytest.approx(v2, rel=1e-9)

    def test_dense_oracle_agreement_x3_dependent(self):
        # exercises the thickness resampling of the analytic generator and
        # the B coupling through odd x3 moments
        fld = material_from_config(iso_config(mu="2 + cos(2*pi*y1)", lam="1",
                                              grid=(16, 16), x3_nodes=2,
                                              x3_factor="1 + x3"))
        det = solve_gamma_details(GammaProblem(field=fld, a=E1, gamma=0.5,
                                               modes=1, x3_elems=3, tol=1e-12))
        v1 = dense_gamma_oracle(fld, E1, gamma=0.5, modes=1, x3_elems=3)
        assert v1 == pytest.approx(det.energy, rel=1e-9)
        assert np.abs(det.b).max() > 1e-4  # odd profile activates B


class TestSweep:
    def test_schedule(self):
        assert default_x3_elems(1.0) == 4
        assert default_x3_elems(0.25) == 8
        assert default_x3_elems(1 / 16) == 32

    def test_homogeneous_sweep_constant(self):
        fld = homogeneous_field()
        rep = gamma_limit_study(fld, E1, [1.0, 0.5, 0.25], modes=2,
                                x3_elems=8, tol=1e-11)
        assert max(rep.values) - min(rep.values) <= 1e-10 * rep.values[0]

    def test_layered_gap_shrinks(self):
        fld = layered_field()
        rep = gamma_limit_study(fld, E1, [1.0, 0.5, 0.25, 0.125], modes=3,
                                tol=1e-10)
        assert rep.non_shrinking == []
        assert rep.gaps[-1] < rep.gaps[0]
        # last value within 1 percent of the matched-truncation limit
        ref = homogenize(reduce_field(fld), E1, modes=3)
        assert abs(rep.values[-1] - ref) <= 0.01 * ref

    def test_empty_sweep_rejected(self):
        fld = homogeneous_field()
        with pytest.raises(ValueError, match="empty sweep"):
            gamma_limit_study(fld, E1, [], modes=2)

    def test_non_decreasing_sweep_rejected(self):
        fld = homogeneous_field()
        with pytest.raises(ValueError, match="decreasing"):
            gamma_limit_study(fld, E1, [0.5, 1.0], modes=2)

    def test_threads_match_sequential(self):
        fld = layered_field()
        seq = gamma_limit_study(fld, E1, [1.0, 0.5], modes=2, threads=1)
        par = gamma_limit_study(fld, E1, [1.0, 0.5], modes=2, threads=2)
        assert seq.values == par.values
