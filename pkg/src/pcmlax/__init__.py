"""Dual-scalar toolkit for the 2D principal chiral model.

Solves the first-order algebraic equations for the Noether current in
terms of dual scalar fields, builds the integrated Lax connection and
transports its linear system, evaluates the dual Lagrangian in two
independently assembled forms, and runs the Frobenius-integrability
recovery of original-field solutions — all as machine-checkable residuals
with independent oracles.
"""

from .algebra import (
    COND_LIMIT,
    LieAlgebraData,
    SiteMatrix,
    algebra_from_config,
    contraction_matrix,
    matrix_exp,
    solve_kernel,
    spectral_matrix,
    su2,
    u1,
    validate_algebra,
)
from .dual_current import (
    CurrentSolution,
    binomial_identity_check,
    binomial_inverse_sides,
    first_order_residual,
    kernel_identity_sides,
    solve_closed,
    solve_direct,
    solve_scalar,
    solve_series,
)
from .errors import (
    ClosednessError,
    CommutationError,
    ConfigError,
    KernelSingularError,
    MissingRepresentationError,
    NonConvergentSeriesError,
    NonFiniteError,
    OperatorSingularError,
    PcmlaxError,
    PoleError,
    SingularityError,
)
from .geometry import (
    CONVENTIONS,
    FieldSet,
    Lattice2D,
    LieOneForm,
    LieTwoForm,
    LorentzFrame,
    MINKOWSKI,
    d_oneform,
    d_scalar,
    fieldset_from_expressions,
    hodge_oneform,
    lattice_diff,
    max_site_norm,
    random_lorentz_frame,
    random_smooth_fieldset,
    sample_expression,
    wedge_bracket,
    wedge_contract,
)
from .lagrangian import (
    AdjointContraction,
    LagrangianDensity,
    WMatrix,
    adjoint_contraction,
    bianchi_residual,
    dual_lagrangian_direct,
    dual_lagrangian_split,
    maurer_cartan_current,
    pcm_lagrangian,
    representation_current,
    split_identity_diagnostics,
    w_apply,
    w_matrix,
)
from .lax import (
    LaxConnection,
    LatticePath,
    TransportGap,
    build_lax,
    enclosed_plaquettes,
    flatness_residual,
    integrate_lax,
    path_dependence_gap,
)
from .pde_frobenius import (
    OmegaField,
    PipelineResult,
    SystemResidual,
    closedness_residual,
    commutation_residual,
    frobenius_pipeline,
    nilpotency_residual,
    plaquette_circulation,
    reconstruct_omega,
    solution_from_omega,
    system_residual,
)
from .reportio import ResidualReport, make_residual_report, read_dense, write_dense

__version__ = "0.1.0"
