"""Dual Lagrangian, original-model density, and exponential parametrization.

For the exponential parametrization g = exp(phi^m T_m) the current is
F^m = W^m_n(phi) dphi^n with

    W(phi) = sum_{k>=0} (-M_phi)^k / (k+1)!,     M_phi[n, m] = C^n_{lm} phi^l,

an entire function evaluated by series plus argument-halving, never through
the literal (I - exp(-M)) inv(M) form: M_phi is singular on a dense set of
valid inputs (it always annihilates phi itself).

The dual Lagrangian density is assembled two ways that must agree to
roundoff:

* direct:  -1/2 T_mn (*F^m ^ F^n) + (dF^l + 1/2 C^l_mn F^m ^ F^n) A_l
  with F from the closed-form solver;
* split:   six terms over G = K dA and G' = inv(T) Cmat G, with the cross
  terms eliminated by the kernel identities.

Densities are coefficients of dx0 ^ dx1 with eps~_{01} = +1; the report
header records this convention.  A single multiplicative ``scale`` (default
1) fixes the overall normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import LieAlgebraData, contraction_matrix, matrix_exp, solve_kernel
from .dual_current import solve_closed
from .errors import ConfigError, MissingRepresentationError, NonFiniteError
from .geometry import (
    FieldSet,
    Lattice2D,
    LieOneForm,
    LorentzFrame,
    d_oneform,
    d_scalar,
    hodge_oneform,
    lattice_diff,
    wedge_bracket,
    wedge_contract,
)
from .reportio import ResidualReport, make_residual_report


@dataclass
class AdjointContraction:
    """M_phi with entries M[n, m] = C^n_{lm} phi^l; linear in phi."""

    values: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass
class WMatrix:
    """W(phi); identity at phi = 0 and entire in phi."""

    values: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass
class LagrangianDensity:
    """Per-site top-form coefficient with its assembly tag."""

    values: np.ndarray
    tag: str  # dual_direct | dual_split | pcm
    lattice: Lattice2D
    terms: dict = field(default_factory=dict)


def adjoint_contraction(algebra: LieAlgebraData, phi: np.ndarray) -> AdjointContraction:
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != algebra.dim:
        raise ConfigError("phi length does not match algebra dimension")
    vals = np.einsum("nlm,...l->...nm", algebra.structure_constants, phi)
    return AdjointContraction(values=vals)


def w_matrix(algebra: LieAlgebraData, phi: np.ndarray,
             tol: float = 1e-16, max_terms: int = 40) -> WMatrix:
    """Entire series for W with argument halving above unit norm.

    Series terms are accumulated until they fall below ``tol`` in max-norm,
    then the half-argument result is doubled via
    W(2X) = W(X) - (1/2) X W(X)^2.
    """
    if not np.all(np.isfinite(phi)):
        raise NonFiniteError("w_matrix: non-finite phi")
    M = adjoint_contraction(algebra, phi).values
    nrm = float(np.abs(M).sum(axis=-1).max()) if M.size else 0.0
    s = 0 if nrm <= 1.0 else int(np.ceil(np.log2(nrm)))
    X = M / (2.0**s)
    n = algebra.dim
    I = np.broadcast_to(np.eye(n), X.shape).copy()
    W = I.copy()
    term = I.copy()
    for k in range(1, max_terms + 1):
        term = -(term @ X) / (k + 1)
        W = W + term
        if np.abs(term).max() < tol:
            break
    for _ in range(s):
        W = W - 0.5 * (X @ W @ W)
        X = 2.0 * X
    return WMatrix(values=W)


def w_apply(algebra: LieAlgebraData, phi: np.ndarray, dphi: np.ndarray) -> np.ndarray:
    """Pointwise W(phi) dphi for explicit (analytic) dphi vectors."""
    W = w_matrix(algebra, phi).values
    return np.einsum("...mn,...n->...m", W, np.asarray(dphi, dtype=float))


def maurer_cartan_current(algebra: LieAlgebraData, phi: FieldSet) -> LieOneForm:
    """F^m_a = W^m_n(phi) D_a phi^n with stencil derivatives."""
    W = w_matrix(algebra, phi.values).values
    dphi = d_scalar(phi)
    vals = np.einsum("ijmn,ijan->ijam", W, dphi.values)
    return LieOneForm(values=vals, lattice=phi.lattice)


def representation_current(algebra: LieAlgebraData, phi: FieldSet) -> np.ndarray:
    """Oracle current exp(-phi.T) D_a exp(phi.T) from finite differences.

    Returns complex matrices of shape (N0, N1, 2, r, r); agreement with the
    W-route current contracted on generators is O(spacing^2).
    """
    if algebra.representation is None:
        raise MissingRepresentationError(f"algebra {algebra.name!r} has no representation")
    rep = algebra.representation
    arg = np.einsum("ijm,mab->ijab", phi.values, rep)
    g = matrix_exp(arg)
    ginv = matrix_exp(-arg)
    out = []
    for axis in range(2):
        dg = lattice_diff(g, axis, phi.lattice)
        out.append(ginv @ dg)
    return np.stack(out, axis=2)


def bianchi_residual(F: LieOneForm, algebra: LieAlgebraData) -> ResidualReport:
    """Two-form dF^l + (1/2) C^l_mn F^m ^ F^n with norms."""
    dF = d_oneform(F)
    br = wedge_bracket(F, F, algebra)
    res = dF.values + br.values
    return make_residual_report("bianchi_residual", res,
                                scale_terms=(dF.values, br.values, F.values))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def pcm_lagrangian(G_prime: LieOneForm, algebra: LieAlgebraData,
                   frame: LorentzFrame, scale: float = 1.0) -> LagrangianDensity:
    """Kinetic density -1/2 T_mn (*G'^m ^ G'^n) of the original model."""
    star = hodge_oneform(G_prime, frame)
    dens = -0.5 * wedge_contract(star, G_prime, algebra.trace_metric)
    return LagrangianDensity(values=scale * dens, tag="pcm", lattice=G_prime.lattice)


def dual_lagrangian_direct(algebra: LieAlgebraData, A: FieldSet, frame: LorentzFrame,
                           scale: float = 1.0) -> LagrangianDensity:
    """Density -1/2 T_mn (*F^m ^ F^n) + (dF^l + 1/2 C^l_mn F^m ^ F^n) A_l
    with F read from the closed-form solver."""
    F = solve_closed(algebra, A, frame).F
    star_F = hodge_oneform(F, frame)
    kinetic = -0.5 * wedge_contract(star_F, F, algebra.trace_metric)
    two_form = d_oneform(F).values + wedge_bracket(F, F, algebra).values
    bianchi_dot_A = np.einsum("ijl,ijl->ij", two_form, A.values)
    return LagrangianDensity(values=scale * (kinetic + bianchi_dot_A),
                             tag="dual_direct", lattice=A.lattice)


def _split_pieces(algebra: LieAlgebraData, A: FieldSet, frame: LorentzFrame):
    dA = d_scalar(A)
    K = solve_kernel(algebra, A.values).values
    G = np.einsum("ijln,ijan->ijal", K, dA.values)
    cmat = contraction_matrix(algebra, A.values).values
    P = np.einsum("ml,ijln->ijmn", algebra.trace_metric_inv, cmat)
    Gp = np.einsum("ijmn,ijan->ijam", P, G)
    lat = A.lattice
    return (LieOneForm(values=G, lattice=lat), LieOneForm(values=Gp, lattice=lat), cmat)


def dual_lagrangian_split(algebra: LieAlgebraData, A: FieldSet, frame: LorentzFrame,
                          scale: float = 1.0) -> LagrangianDensity:
    """Six-term split over the dual field strengths G and G' = inv(T) Cmat G.

    Pointwise identical to the direct assembly up to roundoff; the terms
    dict keeps each contribution for term-by-term cross-checks.
    """
    Gf, Gpf, cmat = _split_pieces(algebra, A, frame)
    T = algebra.trace_metric
    star_G = hodge_oneform(Gf, frame)
    star_Gp = hodge_oneform(Gpf, frame)
    a_vals = A.values
    terms = {
        "kinetic_g": -0.5 * wedge_contract(Gf, star_G, T),
        "kinetic_gp": -0.5 * wedge_contract(Gpf, star_Gp, T),
        "cs_g": 0.5 * wedge_contract(Gf, Gf, cmat),
        "cs_gp": 0.5 * wedge_contract(Gpf, Gpf, cmat),
        "d_star_g": -np.einsum("ijl,ijl->ij", d_oneform(star_G).values, a_vals),
        "d_gp": np.einsum("ijl,ijl->ij", d_oneform(Gpf).values, a_vals),
    }
    dens = scale * sum(terms.values())
    return LagrangianDensity(values=dens, tag="dual_split", lattice=A.lattice,
                             terms={k: scale * v for k, v in terms.items()})


def split_identity_diagnostics(algebra: LieAlgebraData, A: FieldSet,
                               frame: LorentzFrame) -> dict:
    """Both sides of the two intermediate split identities, as densities.

    ``kinetic``: the expansion of -1/2 T_mn (*F^m ^ F^n) into four G-terms;
    ``cross``: the cross-term identity
    -1/2 T_mn (P *G)^m ^ (P G)^n = +1/2 Cmat_mn *G^m ^ (P G)^n.
    """
    Gf, Gpf, cmat = _split_pieces(algebra, A, frame)
    T = algebra.trace_metric
    Tinv = algebra.trace_metric_inv
    star_G = hodge_oneform(Gf, frame)
    star_Gp = hodge_oneform(Gpf, frame)
    F = LieOneForm(values=-star_G.values + Gpf.values, lattice=A.lattice)
    star_F = hodge_oneform(F, frame)

    kin_lhs = -0.5 * wedge_contract(star_F, F, T)
    S = np.einsum("ijml,mk,ijkn->ijln", cmat, Tinv, cmat)  # Cmat^T Tinv Cmat
    kin_rhs = (
        -0.5 * wedge_contract(Gf, star_G, T)
        + 0.5 * wedge_contract(Gf, Gf, cmat)
        + 0.5 * wedge_contract(star_G, star_G, np.swapaxes(cmat, -1, -2))
        - 0.5 * wedge_contract(star_G, Gf, S)
    )
    cross_lhs = -0.5 * wedge_contract(star_Gp, Gpf, T)
    cross_rhs = 0.5 * wedge_contract(star_G, Gpf, cmat)
    return {"kinetic": (kin_lhs, kin_rhs), "cross": (cross_lhs, cross_rhs)}
