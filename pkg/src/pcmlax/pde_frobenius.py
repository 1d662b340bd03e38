"""Coupled first-order system and the Frobenius-integrability pipeline.

The transformation between original fields phi and dual scalars A is

    W(phi) dphi = G'(A),       G' = -*G + inv(T) Cmat G,   G = K dA,

evaluated componentwise with the toolkit's fixed Hodge convention (the
component form is regenerated from the covariant equation rather than
transcribed, so the h-index pattern is convention-consistent).

The recovery pipeline: if G' is closed it integrates to omega with
d omega = G'; if additionally [omega, G'] = 0 then G' ^ G' = 0, closedness
plus nilpotency reassemble the zero-curvature condition, and phi = omega
solves the original model, verified by the residual of W(phi) dphi - G'.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import LieAlgebraData
from .errors import ClosednessError, CommutationError, ConfigError
from .geometry import (
    FieldSet,
    LieOneForm,
    LorentzFrame,
    d_oneform,
    d_scalar,
    lattice_diff,
    wedge_bracket,
)
from .lagrangian import w_matrix
from .lax import build_lax, flatness_residual
from .reportio import ResidualReport, make_residual_report

#: Default "closed enough" / "commuting enough" gates, as fractions of the
#: relevant field scale; they sit above stencil noise on default lattices
#: yet catch genuine violations.
DEFAULT_THRESHOLDS = {
    "closedness": 1e-6,
    "commutation": 1e-6,
    "nilpotency": 1e-6,
    "verify_multiplier": 10.0,
    "curvature_multiplier": 2.0,
}

_FLOOR = 1e-300


@dataclass
class SystemResidual:
    """Residual of the coupled system, per site, component slot, generator."""

    values: np.ndarray  # (N0, N1, 2, n)
    max_norm: float
    l2_norm: float
    slot_max: tuple[float, float]
    scale: float

    def record(self) -> dict:
        return {
            "name": "system_residual",
            "max_norm": self.max_norm,
            "l2_norm": self.l2_norm,
            "dx0_slot_max": self.slot_max[0],
            "dx1_slot_max": self.slot_max[1],
            "scale": self.scale,
        }


@dataclass
class OmegaField:
    """Line-integrated potential omega with d omega = G' (locally).

    ``values`` comes from the axis-first path (x0 leg then x1 leg) from
    ``base``; ``alt_values`` from the x1-first path, kept for the
    path-consistency diagnostic.  omega(base) = 0 by construction.
    """

    values: np.ndarray
    base: tuple[int, int]
    path_tag: str
    consistency_gap: float
    consistency_bound: float
    alt_values: np.ndarray = field(repr=False, default=None)
    source: Optional[LieOneForm] = field(repr=False, default=None)
    closedness: Optional[ResidualReport] = field(repr=False, default=None)


def system_residual(algebra: LieAlgebraData, phi: FieldSet, A: FieldSet,
                    frame: LorentzFrame) -> SystemResidual:
    """Both component slots of W(phi) dphi - G'(A)."""
    if phi.lattice.extents != A.lattice.extents:
        raise ConfigError("phi and A live on different lattices")
    W = w_matrix(algebra, phi.values).values
    dphi = d_scalar(phi)
    lhs = np.einsum("ijmn,ijan->ijam", W, dphi.values)
    rhs = build_lax(algebra, A, frame).values
    res = lhs - rhs
    scale = max(float(np.abs(lhs).max()), float(np.abs(rhs).max()))
    return SystemResidual(
        values=res,
        max_norm=float(np.abs(res).max()),
        l2_norm=float(np.sqrt(np.mean(res**2))),
        slot_max=(float(np.abs(res[:, :, 0, :]).max()), float(np.abs(res[:, :, 1, :]).max())),
        scale=scale,
    )


def closedness_residual(G_prime: LieOneForm) -> ResidualReport:
    """dG' by stencils; scale is the max-norm of G' itself."""
    res = d_oneform(G_prime).values
    return make_residual_report("closedness_residual", res,
                                scale_terms=(G_prime.values,))


def plaquette_circulation(G_prime: LieOneForm) -> np.ndarray:
    """Trapezoid-rule circulation of G' around each lattice plaquette.

    Shape (N0-1, N1-1, n).  The two axis-ordered line integrals from a
    common base differ exactly by the signed sum of these circulations over
    the enclosed rectangle, giving a sharp path-consistency bound.
    """
    v = G_prime.values
    d0, d1 = G_prime.lattice.spacing
    g0, g1 = v[:, :, 0, :], v[:, :, 1, :]
    bottom = 0.5 * d0 * (g0[:-1, :-1] + g0[1:, :-1])
    right = 0.5 * d1 * (g1[1:, :-1] + g1[1:, 1:])
    top = 0.5 * d0 * (g0[:-1, 1:] + g0[1:, 1:])
    left = 0.5 * d1 * (g1[:-1, :-1] + g1[:-1, 1:])
    return bottom + right - top - left


def _prefix_trapz(v: np.ndarray, axis: int, delta: float) -> np.ndarray:
    """Cumulative trapezoid integral along a site axis, zero at index 0."""
    v = np.moveaxis(v, axis, 0)
    seg = 0.5 * delta * (v[:-1] + v[1:])
    out = np.concatenate([np.zeros_like(v[:1]), np.cumsum(seg, axis=0)], axis=0)
    return np.moveaxis(out, 0, axis)


def reconstruct_omega(G_prime: LieOneForm, base: tuple[int, int] = (0, 0),
                      closed_tol: float = 1e-6) -> OmegaField:
    """Integrate G' to omega along axis-first paths from ``base``.

    Refuses (with the residual attached) when the closedness residual
    exceeds ``closed_tol`` times the field scale.  The x1-first integration
    is also computed; its deviation and the exact circulation bound are
    stored as the path-consistency diagnostic.
    """
    rep = closedness_residual(G_prime)
    if rep.max_norm > closed_tol * rep.scale + _FLOOR:
        raise ClosednessError(
            f"G' is not closed enough to integrate: max residual {rep.max_norm:.3e} "
            f"> {closed_tol:g} x scale {rep.scale:.3e}",
            report=rep,
        )
    i0, j0 = int(base[0]), int(base[1])
    lat = G_prime.lattice
    n0, n1 = lat.extents
    if not (0 <= i0 < n0 and 0 <= j0 < n1):
        raise ConfigError(f"base site {base} outside lattice {lat.extents}")
    d0, d1 = lat.spacing
    g0 = G_prime.values[:, :, 0, :]
    g1 = G_prime.values[:, :, 1, :]

    # x0-first: along the base row, then up each column
    p_row = _prefix_trapz(g0[:, j0, :], 0, d0)            # (N0, n)
    p_col = _prefix_trapz(g1, 1, d1)                      # (N0, N1, n)
    omega = (p_row - p_row[i0])[:, None, :] + (p_col - p_col[:, j0:j0 + 1, :])

    # x1-first: along the base column, then across each row
    q_col = _prefix_trapz(g1[i0, :, :], 0, d1)            # (N1, n)
    q_row = _prefix_trapz(g0, 0, d0)                      # (N0, N1, n)
    omega_alt = (q_col - q_col[j0])[None, :, :] + (q_row - q_row[i0:i0 + 1, :, :])

    gap = float(np.abs(omega - omega_alt).max())
    circ = plaquette_circulation(G_prime)
    bound = float(np.abs(circ).sum(axis=(0, 1)).max()) if circ.size else 0.0
    return OmegaField(values=omega, base=(i0, j0), path_tag="x0-first",
                      consistency_gap=gap, consistency_bound=bound,
                      alt_values=omega_alt, source=G_prime, closedness=rep)


def commutation_residual(omega, G_prime: LieOneForm,
                         algebra: LieAlgebraData) -> ResidualReport:
    """Per-site bracket C^k_{mn} omega^m G'^n_a; scale is |omega| |G'|."""
    w = omega.values if isinstance(omega, OmegaField) else np.asarray(omega)
    if w.shape[:2] != G_prime.values.shape[:2] or w.shape[-1] != G_prime.n:
        raise ConfigError("omega and G' shapes are inconsistent")
    res = np.einsum("kmn,ijm,ijan->ijak", algebra.structure_constants, w, G_prime.values)
    scale = float(np.abs(w).max()) * float(np.abs(G_prime.values).max())
    out = make_residual_report("commutation_residual", res)
    out.scale = scale
    return out


def nilpotency_residual(G_prime: LieOneForm, algebra: LieAlgebraData) -> ResidualReport:
    """Bracket wedge of G' with itself; zero iff [G'_0, G'_1] = 0 sitewise.

    Together with closedness this reassembles the zero-curvature condition.
    """
    res = wedge_bracket(G_prime, G_prime, algebra).values
    out = make_residual_report("nilpotency_residual", res)
    out.scale = float(np.abs(G_prime.values).max()) ** 2
    return out


def solution_from_omega(omega: OmegaField, algebra: LieAlgebraData,
                        comm_tol: float = 1e-6) -> tuple[FieldSet, ResidualReport]:
    """Take phi = omega and verify W(phi) dphi - G' inherits the error budget.

    Requires the commutation residual below ``comm_tol`` times its scale;
    the returned report carries the verification residual against the
    source one-form.
    """
    if omega.source is None:
        raise ConfigError("omega carries no source one-form to verify against")
    comm = commutation_residual(omega, omega.source, algebra)
    if comm.max_norm > comm_tol * comm.scale + _FLOOR:
        raise CommutationError(
            f"[omega, G'] too large: max {comm.max_norm:.3e} "
            f"> {comm_tol:g} x scale {comm.scale:.3e}",
            report=comm,
        )
    lat = omega.source.lattice
    phi = FieldSet(values=omega.values, lattice=lat, role="original")
    W = w_matrix(algebra, phi.values).values
    dphi = d_scalar(phi)
    lhs = np.einsum("ijmn,ijan->ijam", W, dphi.values)
    res = lhs - omega.source.values
    report = make_residual_report("recovered_solution_residual", res,
                                  scale_terms=(omega.source.values,),
                                  details={"commutation_max": comm.max_norm})
    return phi, report


# ---------------------------------------------------------------------------
# staged pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    stages: list
    passed: bool
    failed_stage: Optional[str] = None
    omega: Optional[OmegaField] = None
    phi: Optional[FieldSet] = None
    verify: Optional[ResidualReport] = None


def _curvature_scale(G_prime: LieOneForm) -> float:
    """Max second-difference magnitude of G' components, both axes."""
    lat = G_prime.lattice
    worst = 0.0
    for axis in range(2):
        d2 = lattice_diff(lattice_diff(G_prime.values, axis, lat), axis, lat)
        worst = max(worst, float(np.abs(d2).max()))
    return worst


def frobenius_pipeline(algebra: LieAlgebraData, A: FieldSet, frame: LorentzFrame,
                       thresholds: Optional[dict] = None,
                       base: tuple[int, int] = (0, 0)) -> PipelineResult:
    """Run the staged recovery from dual scalars A.

    Stages: closedness of G'(A); omega reconstruction with its
    path-consistency self-check; commutation; nilpotency; flatness
    cross-check; recovered-solution residual.  The final verification gate
    is self-calibrating: a fixed multiple of (closedness + commutation)
    plus a spacing^2 curvature budget, since the recovery inherits exactly
    those errors on the commuting family.
    """
    thr = dict(DEFAULT_THRESHOLDS)
    thr.update(thresholds or {})
    G_prime = build_lax(algebra, A, frame).form
    stages: list = []

    closed = closedness_residual(G_prime)
    ok = closed.max_norm <= thr["closedness"] * closed.scale + _FLOOR
    stages.append({**closed.record(thr["closedness"], ok), "name": "closedness"})
    if not ok:
        return PipelineResult(stages=stages, passed=False, failed_stage="closedness")

    omega = reconstruct_omega(G_prime, base=base, closed_tol=thr["closedness"])
    cons_ok = omega.consistency_gap <= omega.consistency_bound * (1.0 + 1e-6) + 1e-12 * closed.scale + _FLOOR
    stages.append({
        "name": "omega_path_consistency",
        "max_norm": omega.consistency_gap,
        "tolerance": omega.consistency_bound,
        "pass": bool(cons_ok),
    })

    comm = commutation_residual(omega, G_prime, algebra)
    ok = comm.max_norm <= thr["commutation"] * comm.scale + _FLOOR
    stages.append({**comm.record(thr["commutation"], ok), "name": "commutation"})
    if not ok:
        return PipelineResult(stages=stages, passed=False, failed_stage="commutation",
                              omega=omega)

    nil = nilpotency_residual(G_prime, algebra)
    ok = nil.max_norm <= thr["nilpotency"] * nil.scale + _FLOOR
    stages.append({**nil.record(thr["nilpotency"], ok), "name": "nilpotency"})
    if not ok:
        return PipelineResult(stages=stages, passed=False, failed_stage="nilpotency",
                              omega=omega)

    flat = flatness_residual(G_prime, algebra=algebra)
    flat_budget = (closed.max_norm + nil.max_norm) * (1.0 + 1e-9) + 1e-12 * closed.scale
    ok = flat.max_norm <= flat_budget + _FLOOR
    stages.append({**flat.record(flat_budget, ok), "name": "flatness"})
    if not ok:
        return PipelineResult(stages=stages, passed=False, failed_stage="flatness",
                              omega=omega)

    phi, verify = solution_from_omega(omega, algebra, comm_tol=thr["commutation"])
    d0, d1 = A.lattice.spacing
    budget = (
        thr["verify_multiplier"] * (closed.max_norm + comm.max_norm)
        + thr["curvature_multiplier"] * (d0**2 + d1**2) * _curvature_scale(G_prime)
    )
    ok = verify.max_norm <= budget + _FLOOR
    stages.append({**verify.record(budget, ok), "name": "recovered_solution"})
    if not ok:
        return PipelineResult(stages=stages, passed=False, failed_stage="recovered_solution",
                              omega=omega, phi=phi, verify=verify)

    return PipelineResult(stages=stages, passed=True, omega=omega, phi=phi, verify=verify)
