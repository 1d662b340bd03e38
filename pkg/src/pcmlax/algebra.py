"""Lie algebra data and the site-local matrix machinery.

An algebra enters as structure constants ``C[k, l, n] = C^k_{ln}``
(antisymmetric in the lower pair, Jacobi-consistent) and a symmetric
invertible trace metric ``T``.  From an n-vector ``A`` of dual scalars the
rest of the toolkit consumes three pointwise matrices:

    contraction   Cmat[l, n] = sum_k C^k_{ln} A_k
    spectral      lam        = Cmat @ inv(T)
    kernel        K          = inv(T) @ inv(I - lam @ lam)

plus a batched matrix exponential.  Every builder accepts leading batch
axes on ``A`` so whole lattices evaluate in one call.  Algebra data is
immutable after construction and safe to share across concurrent
evaluations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    KernelSingularError,
    NonFiniteError,
)

#: Condition-number ceiling for every pointwise inverse.  Exceeding it is a
#: hard error, never a silent regularization.
COND_LIMIT = 1e12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants, trace metric, and optional matrix representation.

    ``structure_constants[k, l, n]`` is C^k_{ln}; ``trace_metric[m, l]`` is
    T_{ml}; ``representation``, when present, stacks the generator matrices
    T_m along axis 0 (complex entries allowed).
    """

    dim: int
    structure_constants: np.ndarray
    trace_metric: np.ndarray
    representation: Optional[np.ndarray] = None
    name: str = "algebra"
    trace_note: str = "explicit"

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ConfigError("algebra dimension must be positive")
        C = np.asarray(self.structure_constants, dtype=float)
        T = np.asarray(self.trace_metric, dtype=float)
        if C.shape != (n, n, n):
            raise ConfigError(f"structure constants must have shape {(n, n, n)}, got {C.shape}")
        if T.shape != (n, n):
            raise ConfigError(f"trace metric must have shape {(n, n)}, got {T.shape}")
        object.__setattr__(self, "structure_constants", _frozen(C))
        object.__setattr__(self, "trace_metric", _frozen(T))
        if self.representation is not None:
            R = np.asarray(self.representation, dtype=complex)
            if R.ndim != 3 or R.shape[0] != n or R.shape[1] != R.shape[2]:
                raise ConfigError(f"representation must stack {n} square matrices, got {R.shape}")
            object.__setattr__(self, "representation", _frozen(R))

    @cached_property
    def trace_metric_inv(self) -> np.ndarray:
        return _frozen(np.linalg.inv(self.trace_metric))

    def killing_form(self) -> np.ndarray:
        """K_{mn} = C^r_{ms} C^s_{nr}."""
        C = self.structure_constants
        return np.einsum("rms,snr->mn", C, C)


@dataclass
class SiteMatrix:
    """n x n matrix (batched) with a role tag and construction diagnostics."""

    values: np.ndarray
    role: str  # contraction | spectral | kernel
    cond: Optional[np.ndarray] = None
    spectral_radius: Optional[np.ndarray] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate_algebra(data: LieAlgebraData, tol: float = 1e-12) -> list[str]:
    """Return the list of violated invariants (empty means valid).

    Residuals are measured on unit-normalized entries: each check divides by
    the max-magnitude of its inputs before comparing against ``tol``.
    """
    C = data.structure_constants
    T = data.trace_metric
    out: list[str] = []

    c_scale = max(1.0, float(np.abs(C).max()))
    anti = C + np.swapaxes(C, 1, 2)
    if np.abs(anti).max() / c_scale > tol:
        k, l, n = np.unravel_index(np.abs(anti).argmax(), anti.shape)
        out.append(
            f"antisymmetry violated at (k,l,n)=({k},{l},{n}): "
            f"C^k_ln + C^k_nl = {anti[k, l, n]:.3e}"
        )

    jac = (
        np.einsum("plm,qpn->lmnq", C, C)
        + np.einsum("pmn,qpl->lmnq", C, C)
        + np.einsum("pnl,qpm->lmnq", C, C)
    )
    if np.abs(jac).max() / max(1.0, c_scale**2) > tol:
        l, m, n, q = np.unravel_index(np.abs(jac).argmax(), jac.shape)
        out.append(
            f"jacobi identity violated at (l,m,n,q)=({l},{m},{n},{q}): "
            f"residual {jac[l, m, n, q]:.3e}"
        )

    t_scale = max(1.0, float(np.abs(T).max()))
    if np.abs(T - T.T).max() / t_scale > tol:
        out.append("trace metric not symmetric")
    t_cond = float(np.linalg.cond(T))
    if not np.isfinite(t_cond) or t_cond > COND_LIMIT:
        out.append(f"trace metric singular or ill-conditioned (cond = {t_cond:.3e})")
    else:
        # ad-invariance: T_kp C^k_mn totally antisymmetric in (p, m, n)
        f = np.einsum("kp,kmn->pmn", T, C)
        f_scale = max(1.0, float(np.abs(f).max()))
        bad = max(
            np.abs(f + np.swapaxes(f, 0, 1)).max(),
            np.abs(f + np.swapaxes(f, 1, 2)).max(),
        )
        if bad / f_scale > tol:
            out.append(f"trace metric not ad-invariant: max symmetric part {bad:.3e}")

    if data.representation is not None:
        R = data.representation
        comm = np.einsum("lab,nbc->lnac", R, R) - np.einsum("nab,lbc->lnac", R, R)
        target = np.einsum("kln,kac->lnac", C, R)
        r_scale = max(1.0, float(np.abs(R).max()) ** 2)
        bad = np.abs(comm - target).max() / r_scale
        if bad > tol:
            out.append(f"representation bracket mismatch: max residual {bad:.3e}")

    return out


# ---------------------------------------------------------------------------
# pointwise matrices
# ---------------------------------------------------------------------------

def contraction_matrix(data: LieAlgebraData, A: np.ndarray) -> SiteMatrix:
    """Matrix with entry (l, n) = sum_k C^k_{ln} A_k; batched over leading axes."""
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != data.dim:
        raise ConfigError(f"A has length {A.shape[-1]}, algebra dim is {data.dim}")
    vals = np.einsum("kln,...k->...ln", data.structure_constants, A)
    return SiteMatrix(values=vals, role="contraction")


def _spectral_radius_estimate(lam: np.ndarray, iters: int = 50) -> np.ndarray:
    """Geometric-mean growth of a fixed start vector under lam.

    Degenerate orbits (vector annihilated) report radius 0; non-finite
    growth falls back to the operator 2-norm bound.
    """
    n = lam.shape[-1]
    batch = lam.shape[:-2]
    v0 = 1.0 + 1e-3 * np.arange(n)
    v0 = v0 / np.linalg.norm(v0)
    v = np.broadcast_to(v0, batch + (n,)).copy()
    log_growth = np.zeros(batch)
    dead = np.zeros(batch, dtype=bool)
    for _ in range(iters):
        w = np.einsum("...ln,...n->...l", lam, v)
        nw = np.linalg.norm(w, axis=-1)
        alive = (nw > 0) & ~dead
        dead |= nw == 0
        log_growth = np.where(alive, log_growth + np.log(np.where(alive, nw, 1.0)), log_growth)
        v = np.where(alive[..., None], w / np.where(nw[..., None] == 0, 1.0, nw[..., None]), v)
    est = np.where(dead, 0.0, np.exp(log_growth / iters))
    bad = ~np.isfinite(est)
    if np.any(bad):
        sv = np.linalg.svd(lam, compute_uv=False)[..., 0]
        est = np.where(bad, sv, est)
    return est


def spectral_matrix(data: LieAlgebraData, A: np.ndarray) -> SiteMatrix:
    """lam(A) = Cmat @ inv(T), with a spectral-radius estimate attached.

    The estimate (50 power iterations, operator-norm fallback) only gates
    series convergence; closed-form solvers never consult it.
    """
    t_cond = float(np.linalg.cond(data.trace_metric))
    if not np.isfinite(t_cond) or t_cond > COND_LIMIT:
        raise KernelSingularError(f"trace metric singular (cond = {t_cond:.3e})")
    cmat = contraction_matrix(data, A).values
    lam = cmat @ data.trace_metric_inv
    return SiteMatrix(values=lam, role="spectral",
                      spectral_radius=_spectral_radius_estimate(lam))


def solve_kernel(data: LieAlgebraData, A: np.ndarray) -> SiteMatrix:
    """K = inv(T) inv(1 - lam^2), via a pivoted direct solve of (1 - lam^2) T.

    Raises KernelSingularError, carrying the offending sites and A values,
    whenever the condition number exceeds COND_LIMIT.
    """
    A = np.asarray(A, dtype=float)
    lam = spectral_matrix(data, A).values
    n = data.dim
    B = np.broadcast_to(np.eye(n), lam.shape) - lam @ lam
    M = B @ data.trace_metric
    cond = np.linalg.cond(M)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if np.any(bad):
        sites = np.argwhere(bad)
        raise KernelSingularError(
            f"kernel singular or ill-conditioned at {len(sites)} site(s); "
            f"first at index {tuple(sites[0])} with cond {np.asarray(cond)[tuple(sites[0])]:.3e}",
            sites=[tuple(s) for s in sites],
            values=A[bad] if A.ndim > 1 else A,
        )
    K = np.linalg.inv(M)
    return SiteMatrix(values=K, role="kernel", cond=cond)


def matrix_exp(X: np.ndarray, terms: int = 18) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring around a truncated series.

    Accurate to ~1e-13 relative in norm for ||X|| <= 10; supports leading
    batch axes and complex entries.
    """
    X = np.asarray(X)
    dt = np.result_type(X.dtype, np.float64)
    X = X.astype(dt)
    if not np.all(np.isfinite(X.real)) or (np.iscomplexobj(X) and not np.all(np.isfinite(X.imag))):
        raise NonFiniteError("matrix_exp: non-finite input")
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise ConfigError(f"matrix_exp needs square matrices, got shape {X.shape}")
    nrm = float(np.abs(X).sum(axis=-1).max()) if X.size else 0.0
    s = 0 if nrm <= 0.5 else int(np.ceil(np.log2(nrm / 0.5)))
    Y = X / (2.0**s)
    n = X.shape[-1]
    I = np.broadcast_to(np.eye(n, dtype=dt), X.shape)
    E = I.copy()
    for k in range(terms, 0, -1):
        E = I + (Y @ E) / k
    for _ in range(s):
        E = E @ E
    return E


# ---------------------------------------------------------------------------
# presets and configuration
# ---------------------------------------------------------------------------

def _levi_civita(n: int = 3) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        sign = 1
        p = list(perm)
        for i in range(n):
            for j in range(i + 1, n):
                if p[i] > p[j]:
                    sign = -sign
        eps[perm] = sign
    return eps


def su2() -> LieAlgebraData:
    """su(2): C^k_{ln} = eps_{kln}, T = identity, defining 2x2 representation.

    Generators T_m = -i sigma_m / 2 satisfy [T_l, T_n] = eps_{kln} T_k; their
    trace form is tr(T_m T_n) = -delta_mn / 2, so the shipped T = identity is
    a normalization choice, recorded in report headers.
    """
    sigma = np.array([
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ], dtype=complex)
    rep = -0.5j * sigma
    return LieAlgebraData(
        dim=3,
        structure_constants=_levi_civita(3),
        trace_metric=np.eye(3),
        representation=rep,
        name="su2",
        trace_note="identity (defining-rep trace = -1/2 delta)",
    )


def u1(dim: int = 1) -> LieAlgebraData:
    """u(1)^n: all structure constants zero, T = identity.

    Ships commuting diagonal imaginary generators so transport and monodromy
    work for abelian demonstrations.
    """
    rep = np.zeros((dim, dim, dim), dtype=complex)
    for m in range(dim):
        rep[m, m, m] = 1j
    return LieAlgebraData(
        dim=dim,
        structure_constants=np.zeros((dim, dim, dim)),
        trace_metric=np.eye(dim),
        representation=rep,
        name=f"u1^{dim}" if dim > 1 else "u1",
        trace_note="identity",
    )


PRESETS = {"su2": su2, "u1": u1}


def algebra_from_config(block: dict) -> LieAlgebraData:
    """Build an algebra from its JSON config block.

    Either ``{"preset": "su2"}`` / ``{"preset": "u1", "dim": n}`` or the
    explicit form with sparse 0-based structure-constant triplets
    ``[[k, l, n, value], ...]`` (list both orientations), ``trace_metric``
    as dense rows, "identity" or "killing", and an optional representation
    with entries as [re, im] pairs.
    """
    if not isinstance(block, dict):
        raise ConfigError("algebra block must be an object")
    if "preset" in block:
        name = block["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown algebra preset {name!r}")
        if name == "u1":
            return u1(int(block.get("dim", 1)))
        return PRESETS[name]()

    try:
        n = int(block["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("algebra block needs an integer 'dim'") from exc
    C = np.zeros((n, n, n))
    for trip in block.get("structure_constants", []):
        if len(trip) != 4:
            raise ConfigError("structure-constant entries must be [k, l, n, value]")
        k, l, m, val = trip
        if not (0 <= int(k) < n and 0 <= int(l) < n and 0 <= int(m) < n):
            raise ConfigError(f"structure-constant index out of range in {trip}")
        C[int(k), int(l), int(m)] = float(val)

    tm = block.get("trace_metric", "identity")
    if isinstance(tm, str):
        if tm == "identity":
            T = np.eye(n)
            note = "identity"
        elif tm == "killing":
            T = np.einsum("rms,snr->mn", C, C)
            note = "killing form C^r_ms C^s_nr"
        else:
            raise ConfigError(f"unknown trace_metric keyword {tm!r}")
    else:
        T = np.asarray(tm, dtype=float)
        note = "explicit"

    rep = None
    if block.get("representation") is not None:
        raw = np.asarray(block["representation"], dtype=float)
        if raw.ndim != 4 or raw.shape[-1] != 2:
            raise ConfigError("representation must be nested [re, im] pairs per entry")
        rep = raw[..., 0] + 1j * raw[..., 1]

    data = LieAlgebraData(
        dim=n,
        structure_constants=C,
        trace_metric=T,
        representation=rep,
        name=str(block.get("name", "config-algebra")),
        trace_note=note,
    )
    problems = validate_algebra(data)
    if problems:
        raise ConfigError("algebra config fails validation: " + "; ".join(problems))
    return data
