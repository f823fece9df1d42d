"""platehom: effective bending stiffness of periodic composite Kirchhoff plates.

The package solves the relaxation cell problem that defines the homogenized
bending energy density of a thin periodic plate by spectral Galerkin methods,
cross-checks the results against independent closed-form and dense oracles,
and numerically reproduces the scale-ratio continuity and recovery-sequence
limits that justify the model.
"""

from .cell import (
    CellProblem,
    CellSolution,
    EffectiveTensor,
    SolverConvergenceError,
    dimred_bar,
    effective_tensor,
    homogenize,
    solve_cell,
)
from .gamma import (
    GammaProblem,
    GammaSweepReport,
    gamma_limit_study,
    solve_gamma,
)
from .material import (
    MaterialConfigError,
    MaterialField,
    ReducedField,
    load_material,
    loads_material,
    material_from_config,
    reduce_field,
)
from .oracles import (
    OracleReport,
    dense_gamma_oracle,
    dense_oracle,
    layered_1d_oracle,
    layered_closed_form,
    plane_stress,
    run_validation_suite,
)
from .recovery import (
    ConvergenceReport,
    Isometry,
    QuadratureResolutionError,
    RecoveryAnsatz,
    RecoverySampler,
    ThicknessProfile,
    TrigPoly,
    TwoScaleScalar,
    VectorDisplacement,
    build_isometry,
    build_recovery,
    cell_harmonic,
    convergence_study,
    energy3d,
    macro_harmonic,
    snap_h,
    strain,
    two_scale_test,
)
from .voigt import (
    QuadForm2,
    QuadForm3,
    Sym2,
    Sym3,
    check_bounds,
    iota,
    isotropic,
    reduce2d,
)

__version__ = "0.1.0"

__all__ = [
    "CellProblem", "CellSolution", "ConvergenceReport", "EffectiveTensor",
    "GammaProblem", "GammaSweepReport", "Isometry", "MaterialConfigError",
    "MaterialField", "OracleReport", "QuadForm2", "QuadForm3",
    "QuadratureResolutionError", "RecoveryAnsatz", "RecoverySampler",
    "ReducedField", "SolverConvergenceError", "Sym2", "Sym3",
    "ThicknessProfile", "TrigPoly", "TwoScaleScalar", "VectorDisplacement",
    "build_isometry", "build_recovery", "cell_harmonic", "check_bounds",
    "convergence_study", "dense_gamma_oracle", "dense_oracle", "dimred_bar",
    "effective_tensor", "energy3d", "gamma_limit_study", "homogenize", "iota",
    "isotropic", "layered_1d_oracle", "layered_closed_form", "load_material",
    "loads_material", "macro_harmonic", "material_from_config", "plane_stress",
    "reduce2d", "reduce_field", "run_validation_suite", "snap_h", "solve_cell",
    "solve_gamma", "strain", "two_scale_test", "__version__",
]
