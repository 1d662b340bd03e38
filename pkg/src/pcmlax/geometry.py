"""Discretized 2D Lorentzian base manifold.

Lattice storage for scalar multiplets and Lie-algebra-valued forms, the
exterior derivative by second-order finite differences, wedge products,
and the metric Hodge star.

Conventions fixed here and recorded in every report header:

* metric h has signature (-, +), densitized epsilon eps_{ab} = h' eps~_{ab}
  with eps~_{01} = +1 and h' = sqrt(-det h);
* Hodge star on one-forms is (*w)_a = w^b eps_{ba}, which satisfies
  ** = +1 exactly;
* two-form coefficients are relative to dx0 ^ dx1;
* array storage is (site0, site1, component, generator).
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteError

CONVENTIONS = {
    "hodge": "(*w)_a = w^b eps_{ba}; eps_{01} = +sqrt(-det h)",
    "top_form": "coefficient of dx0^dx1",
    "storage": "site0, site1, component, generator",
}


@dataclass(frozen=True)
class LorentzFrame:
    """Constant 2x2 Lorentzian metric with its derived Hodge data.

    ``star`` is the 2x2 matrix acting on covariant one-form components,
    (*w)_a = star[a, g] w_g.  It squares to the identity up to roundoff.
    """

    h: np.ndarray
    h_inv: np.ndarray = field(init=False)
    h_prime: float = field(init=False)
    eps: np.ndarray = field(init=False)
    star: np.ndarray = field(init=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (2, 2):
            raise ConfigError(f"metric must be 2x2, got {h.shape}")
        if abs(h[0, 1] - h[1, 0]) > 1e-14 * max(1.0, np.abs(h).max()):
            raise ConfigError("metric must be symmetric")
        det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
        if not det < 0:
            raise ConfigError(f"metric must be Lorentzian (det < 0), got det = {det}")
        hp = float(np.sqrt(-det))
        h_inv = np.array([[h[1, 1], -h[0, 1]], [-h[0, 1], h[0, 0]]]) / det
        eps = hp * np.array([[0.0, 1.0], [-1.0, 0.0]])
        star = np.array([[-h[0, 1], h[0, 0]], [-h[1, 1], h[0, 1]]]) / hp
        object.__setattr__(self, "h", _freeze(h))
        object.__setattr__(self, "h_inv", _freeze(h_inv))
        object.__setattr__(self, "h_prime", hp)
        object.__setattr__(self, "eps", _freeze(eps))
        object.__setattr__(self, "star", _freeze(star))


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.flags.writeable = False
    return out


MINKOWSKI = LorentzFrame(h=np.diag([-1.0, 1.0]))


@dataclass(frozen=True)
class Lattice2D:
    """Rectangular lattice: N0 x N1 sites, spacings (d0, d1), boundary mode."""

    extents: tuple[int, int]
    spacing: tuple[float, float]
    boundary: str = "periodic"

    def __post_init__(self):
        n0, n1 = self.extents
        d0, d1 = self.spacing
        if n0 < 3 or n1 < 3:
            raise ConfigError("lattice extents must be >= 3 (needed by one-sided stencils)")
        if not (d0 > 0 and d1 > 0):
            raise ConfigError("lattice spacings must be positive")
        if self.boundary not in ("periodic", "clamped"):
            raise ConfigError(f"unknown boundary mode {self.boundary!r}")
        object.__setattr__(self, "extents", (int(n0), int(n1)))
        object.__setattr__(self, "spacing", (float(d0), float(d1)))

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid coordinate arrays x0, x1 (site (i, j) at (i d0, j d1))."""
        n0, n1 = self.extents
        d0, d1 = self.spacing
        return np.meshgrid(np.arange(n0) * d0, np.arange(n1) * d1, indexing="ij")

    def refine(self, k: int) -> "Lattice2D":
        """Lattice over the same domain with spacings divided by k."""
        n0, n1 = self.extents
        d0, d1 = self.spacing
        if self.boundary == "periodic":
            return Lattice2D((n0 * k, n1 * k), (d0 / k, d1 / k), self.boundary)
        return Lattice2D(((n0 - 1) * k + 1, (n1 - 1) * k + 1), (d0 / k, d1 / k), self.boundary)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{what} contains non-finite entries")


@dataclass
class FieldSet:
    """Per-site n-vector of scalars; role tags dual multipliers vs originals."""

    values: np.ndarray
    lattice: Lattice2D
    role: str = "dual"  # dual | original

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n0, n1 = self.lattice.extents
        if v.ndim != 3 or v.shape[:2] != (n0, n1):
            raise ConfigError(f"field values must have shape ({n0}, {n1}, n), got {v.shape}")
        _check_finite(v, "field set")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[-1]


@dataclass
class LieOneForm:
    """Components F^m_a per site; shape (N0, N1, 2, n)."""

    values: np.ndarray
    lattice: Lattice2D

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n0, n1 = self.lattice.extents
        if v.ndim != 4 or v.shape[:3] != (n0, n1, 2):
            raise ConfigError(f"one-form values must have shape ({n0}, {n1}, 2, n), got {v.shape}")
        _check_finite(v, "one-form")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[-1]


@dataclass
class LieTwoForm:
    """Coefficient of dx0^dx1 per site and generator; shape (N0, N1, n)."""

    values: np.ndarray
    lattice: Lattice2D

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n0, n1 = self.lattice.extents
        if v.ndim != 3 or v.shape[:2] != (n0, n1):
            raise ConfigError(f"two-form values must have shape ({n0}, {n1}, n), got {v.shape}")
        _check_finite(v, "two-form")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[-1]


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def _diff(values: np.ndarray, axis: int, delta: float, boundary: str) -> np.ndarray:
    """Second-order derivative along a site axis.

    Central differences in the interior; wraparound when periodic and
    one-sided three-point stencils at clamped boundaries.  Exact for fields
    quadratic in the coordinate.
    """
    if boundary == "periodic":
        return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * delta)
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * delta)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * delta)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * delta)
    return np.moveaxis(out, 0, axis)


def lattice_diff(values: np.ndarray, axis: int, lattice: Lattice2D) -> np.ndarray:
    """Derivative of any per-site array along a site axis, lattice stencils."""
    return _diff(values, axis, lattice.spacing[axis], lattice.boundary)


def d_scalar(f: FieldSet) -> LieOneForm:
    """Exterior derivative of a scalar multiplet: components (d f)_a = D_a f."""
    lat = f.lattice
    d0, d1 = lat.spacing
    g0 = _diff(f.values, 0, d0, lat.boundary)
    g1 = _diff(f.values, 1, d1, lat.boundary)
    return LieOneForm(values=np.stack([g0, g1], axis=2), lattice=lat)


def d_oneform(omega: LieOneForm) -> LieTwoForm:
    """Exterior derivative of a one-form: coefficient D_0 w_1 - D_1 w_0."""
    lat = omega.lattice
    d0, d1 = lat.spacing
    v = omega.values
    coeff = _diff(v[:, :, 1, :], 0, d0, lat.boundary) - _diff(v[:, :, 0, :], 1, d1, lat.boundary)
    return LieTwoForm(values=coeff, lattice=lat)


def hodge_oneform(omega: LieOneForm, frame: LorentzFrame) -> LieOneForm:
    """Pointwise Hodge star (*w)_a = w^b eps_{ba} on every site and generator."""
    vals = np.einsum("ag,ijgn->ijan", frame.star, omega.values)
    return LieOneForm(values=vals, lattice=omega.lattice)


def wedge_bracket(omega: LieOneForm, eta: LieOneForm, algebra) -> LieTwoForm:
    """Bracket wedge (1/2) C^l_{mn} (w^m_0 e^n_1 - w^m_1 e^n_0).

    Normalized so that for equal arguments it is the Bianchi combination
    (1/2) C^l_{mn} F^m ^ F^n = C^l_{mn} F^m_0 F^n_1, which also equals the
    curvature commutator [F_0, F_1]^l.
    """
    if omega.values.shape != eta.values.shape:
        raise ConfigError("wedge_bracket: operand shapes differ")
    if omega.n != algebra.dim:
        raise ConfigError("wedge_bracket: generator count does not match algebra")
    C = algebra.structure_constants
    w, e = omega.values, eta.values
    coeff = 0.5 * (
        np.einsum("kmn,ijm,ijn->ijk", C, w[:, :, 0, :], e[:, :, 1, :])
        - np.einsum("kmn,ijm,ijn->ijk", C, w[:, :, 1, :], e[:, :, 0, :])
    )
    return LieTwoForm(values=coeff, lattice=omega.lattice)


def wedge_contract(omega: LieOneForm, eta: LieOneForm, weights: np.ndarray) -> np.ndarray:
    """Plain wedge contracted with a weight matrix over the generator pair.

    Returns the per-site scalar sum_{mn} weights_{mn} (w^m_0 e^n_1 - w^m_1 e^n_0);
    ``weights`` may be a constant (n, n) matrix or per-site (N0, N1, n, n).
    """
    w, e = omega.values, eta.values
    weights = np.asarray(weights)
    if weights.ndim == 2:
        return (
            np.einsum("mn,ijm,ijn->ij", weights, w[:, :, 0, :], e[:, :, 1, :])
            - np.einsum("mn,ijm,ijn->ij", weights, w[:, :, 1, :], e[:, :, 0, :])
        )
    return (
        np.einsum("ijmn,ijm,ijn->ij", weights, w[:, :, 0, :], e[:, :, 1, :])
        - np.einsum("ijmn,ijm,ijn->ij", weights, w[:, :, 1, :], e[:, :, 0, :])
    )


# ---------------------------------------------------------------------------
# field construction
# ---------------------------------------------------------------------------

_EXPR_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_EXPR_NAMES = {"pi": np.pi}
_BIN_OPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _eval_expr(node: ast.AST, env: dict):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return node.value
        raise ConfigError(f"non-numeric constant in field expression: {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _EXPR_NAMES:
            return _EXPR_NAMES[node.id]
        raise ConfigError(f"unknown name in field expression: {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        return _BIN_OPS[type(node.op)](_eval_expr(node.left, env), _eval_expr(node.right, env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_expr(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        if node.func.id not in _EXPR_FUNCS:
            raise ConfigError(f"function not in field-expression vocabulary: {node.func.id!r}")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one positional argument")
        return _EXPR_FUNCS[node.func.id](_eval_expr(node.args[0], env))
    raise ConfigError(f"disallowed syntax in field expression: {type(node).__name__}")


def sample_expression(expr: str, lattice: Lattice2D) -> np.ndarray:
    """Evaluate an expression in (x0, x1) with the fixed vocabulary
    sin, cos, exp, pi and arithmetic, on the lattice coordinates."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse field expression {expr!r}: {exc}") from exc
    x0, x1 = lattice.coords()
    out = _eval_expr(tree.body, {"x0": x0, "x1": x1})
    return np.broadcast_to(np.asarray(out, dtype=float), lattice.extents).copy()


def fieldset_from_expressions(exprs: Sequence[str], lattice: Lattice2D,
                              role: str = "dual") -> FieldSet:
    comps = [sample_expression(e, lattice) for e in exprs]
    return FieldSet(values=np.stack(comps, axis=-1), lattice=lattice, role=role)


def random_smooth_fieldset(lattice: Lattice2D, dim: int, rng: np.random.Generator,
                           amplitude: float = 0.5, modes: int = 2,
                           role: str = "dual") -> FieldSet:
    """Band-limited random multiplet, periodic over the lattice domain.

    Fourier coefficients decay with mode number; the result is rescaled so
    the maximum site 2-norm over generators equals ``amplitude``.
    """
    n0, n1 = lattice.extents
    d0, d1 = lattice.spacing
    L0, L1 = n0 * d0, n1 * d1
    x0, x1 = lattice.coords()
    vals = np.zeros((n0, n1, dim))
    for k in range(dim):
        for p in range(-modes, modes + 1):
            for q in range(-modes, modes + 1):
                if p == 0 and q == 0:
                    continue
                amp = rng.normal() / (1.0 + p * p + q * q)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                vals[:, :, k] += amp * np.cos(2.0 * np.pi * (p * x0 / L0 + q * x1 / L1) + phase)
    m = np.sqrt((vals**2).sum(axis=-1)).max()
    if m > 0:
        vals *= amplitude / m
    return FieldSet(values=vals, lattice=lattice, role=role)


def max_site_norm(values: np.ndarray) -> float:
    """Max over sites of the generator-space 2-norm."""
    return float(np.sqrt((np.asarray(values) ** 2).sum(axis=-1)).max())


def random_lorentz_frame(rng: np.random.Generator) -> LorentzFrame:
    """Random signature-(-, +) frame; det < 0 holds by construction."""
    u = rng.uniform(0.0, 2.0)
    w = rng.uniform(0.0, 2.0)
    b = rng.uniform(-1.0, 1.0)
    return LorentzFrame(h=np.array([[-(1.0 + u), b], [b, 1.0 + w]]))
