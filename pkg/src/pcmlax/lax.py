"""Integrated Lax connection, flatness, and path-ordered transport.

The connection built from dual scalars,

    L_a = [inv(T) lam inv(1-lam^2)] D_a A - [inv(T) inv(1-lam^2)] (*dA)_a,

coincides with the solved current contracted on generators; its flatness
residual

    D_0 L_1 - D_1 L_0 + [L_0, L_1]

vanishes exactly when the dual field equations hold.  Transport integrates
dg = g L along axis-aligned lattice paths with midpoint-rule link
exponentials in the algebra's matrix representation.

Fields are stored real throughout; a complexified spectral slot would be
an extension point, not implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import LieAlgebraData, matrix_exp, spectral_matrix
from .errors import ConfigError, MissingRepresentationError
from .geometry import (
    FieldSet,
    LieOneForm,
    LorentzFrame,
    d_oneform,
    d_scalar,
    hodge_oneform,
    wedge_bracket,
)
from .reportio import ResidualReport, make_residual_report


@dataclass
class LaxConnection:
    """Connection components on generators plus the provenance that built it."""

    form: LieOneForm
    algebra: LieAlgebraData
    frame: LorentzFrame
    provenance: str = "build_lax"

    @property
    def values(self) -> np.ndarray:
        return self.form.values


@dataclass(frozen=True)
class LatticePath:
    """Axis-aligned unit-step path: start site plus moves from {+0,-0,+1,-1}."""

    start: tuple[int, int]
    moves: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "start", (int(self.start[0]), int(self.start[1])))
        object.__setattr__(self, "moves", tuple(self.moves))
        for mv in self.moves:
            if mv not in ("+0", "-0", "+1", "-1"):
                raise ConfigError(f"unknown path move {mv!r}")

    def vertices(self) -> list[tuple[int, int]]:
        """Unwrapped integer vertices visited, start first."""
        out = [self.start]
        i, j = self.start
        for mv in self.moves:
            if mv == "+0":
                i += 1
            elif mv == "-0":
                i -= 1
            elif mv == "+1":
                j += 1
            else:
                j -= 1
            out.append((i, j))
        return out

    def endpoint(self) -> tuple[int, int]:
        return self.vertices()[-1]


def build_lax(algebra: LieAlgebraData, A: FieldSet, frame: LorentzFrame,
              dA: Optional[LieOneForm] = None) -> LaxConnection:
    """Assemble the connection from the spectral matrix and resolvent.

    This is an independent assembly of the same formula the closed-form
    current solver evaluates; the two agree to roundoff.
    """
    dA = dA if dA is not None else d_scalar(A)
    lam = spectral_matrix(algebra, A.values).values
    n = algebra.dim
    I = np.broadcast_to(np.eye(n), lam.shape)
    resolvent = np.linalg.inv(I - lam @ lam)
    Tinv = algebra.trace_metric_inv
    coef_d = np.einsum("ml,ijlk->ijmk", Tinv, lam @ resolvent)
    coef_star = np.einsum("ml,ijlk->ijmk", Tinv, resolvent)
    star_dA = hodge_oneform(dA, frame).values
    vals = (
        np.einsum("ijmk,ijak->ijam", coef_d, dA.values)
        - np.einsum("ijmk,ijak->ijam", coef_star, star_dA)
    )
    return LaxConnection(form=LieOneForm(values=vals, lattice=A.lattice),
                         algebra=algebra, frame=frame)


def _as_form_and_algebra(L, algebra: Optional[LieAlgebraData]):
    if isinstance(L, LaxConnection):
        return L.form, L.algebra, L.provenance
    if algebra is None:
        raise ConfigError("a bare one-form needs an explicit algebra")
    return L, algebra, "hand-assembled"


def flatness_residual(L, algebra: Optional[LieAlgebraData] = None) -> ResidualReport:
    """Two-form residual D_0 L_1 - D_1 L_0 + [L_0, L_1] with norms."""
    form, alg, provenance = _as_form_and_algebra(L, algebra)
    dL = d_oneform(form)
    br = wedge_bracket(form, form, alg)
    res = dL.values + br.values
    return make_residual_report(
        "flatness_residual", res,
        scale_terms=(dL.values, br.values, form.values),
        details={"provenance": provenance},
    )


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

def _site_index(pos: tuple[int, int], lattice) -> tuple[int, int]:
    n0, n1 = lattice.extents
    i, j = pos
    if lattice.boundary == "periodic":
        return i % n0, j % n1
    if not (0 <= i < n0 and 0 <= j < n1):
        raise ConfigError(f"path leaves the clamped lattice at {pos}")
    return i, j


def integrate_lax(L, g0: np.ndarray, path: LatticePath,
                  algebra: Optional[LieAlgebraData] = None) -> np.ndarray:
    """Ordered product of midpoint-rule link exponentials along the path.

    g(end) = g0 prod_links exp(Lbar_a dx^a) with Lbar the average of L at
    the link endpoints; second-order accurate per link.
    """
    form, alg, _ = _as_form_and_algebra(L, algebra)
    if alg.representation is None:
        raise MissingRepresentationError(
            f"algebra {alg.name!r} carries no matrix representation")
    rep = alg.representation
    lat = form.lattice
    d0, d1 = lat.spacing
    g = np.array(g0, dtype=complex)
    verts = path.vertices()
    vals = form.values
    for a, b, mv in zip(verts[:-1], verts[1:], path.moves):
        axis = 0 if mv[1] == "0" else 1
        sign = 1.0 if mv[0] == "+" else -1.0
        step = sign * (d0 if axis == 0 else d1)
        ia = _site_index(a, lat)
        ib = _site_index(b, lat)
        coeff = 0.5 * (vals[ia[0], ia[1], axis, :] + vals[ib[0], ib[1], axis, :])
        mat = np.einsum("m,mab->ab", coeff, rep)
        g = g @ matrix_exp(step * mat)
    return g


def enclosed_plaquettes(path_a: LatticePath, path_b: LatticePath) -> float:
    """Unsigned area, in plaquette units, between two endpoint-sharing paths."""
    va = path_a.vertices()
    vb = path_b.vertices()
    loop = va + list(reversed(vb))[1:]
    area2 = 0.0
    for (x0, y0), (x1, y1) in zip(loop[:-1], loop[1:]):
        area2 += x0 * y1 - x1 * y0
    return abs(area2) / 2.0


@dataclass
class TransportGap:
    """Difference of two transports plus the flatness-based bound."""

    gap: float
    bound: float
    plaquettes: float
    enclosed_area: float
    flatness_max: float
    provenance: str = "build_lax"

    def __float__(self) -> float:
        return self.gap


def path_dependence_gap(L, g0: np.ndarray, path_a: LatticePath, path_b: LatticePath,
                        algebra: Optional[LieAlgebraData] = None) -> TransportGap:
    """Norm of the transport difference along two endpoint-sharing paths.

    For flat connections the gap is bounded by the matrix flatness-residual
    max-norm times the enclosed coordinate area (up to an O(1) factor); the
    bound is computed and returned for comparison.
    """
    form, alg, provenance = _as_form_and_algebra(L, algebra)
    if path_a.start != path_b.start or path_a.endpoint() != path_b.endpoint():
        raise ConfigError("paths must share start and end points")
    ga = integrate_lax(form, g0, path_a, algebra=alg)
    gb = integrate_lax(form, g0, path_b, algebra=alg)
    gap = float(np.linalg.norm(ga - gb))

    res = flatness_residual(form, algebra=alg)
    rep = alg.representation
    rmat = np.einsum("ijm,mab->ijab", res.field_values, rep)
    flat_max = float(np.sqrt((np.abs(rmat) ** 2).sum(axis=(-2, -1))).max())
    plaq = enclosed_plaquettes(path_a, path_b)
    d0, d1 = form.lattice.spacing
    area = plaq * d0 * d1
    return TransportGap(gap=gap, bound=flat_max * area, plaquettes=plaq,
                        enclosed_area=area, flatness_max=flat_max,
                        provenance=provenance)
