"""Single command-line entry point.

Loads a JSON run config (algebra + lattice/metric + fields + options),
dispatches to the verification suites and solvers, and emits deterministic
reports plus dense field files.

    pcmlax <verify-identities|residuals|integrate|lagrangian|frobenius>
           --config FILE [--out DIR] [--seed U64] [--resolution-factor K]
           [--terms]

Exit codes: 0 all checks pass, 1 check failure, 2 config/validation error,
3 singularity; the frobenius command refines stage failures into 4
(closedness) and 5 (commutation).  Reports are byte-identical for identical
config and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import algebra as alg_mod
from . import dual_current, lagrangian, lax, pde_frobenius
from .errors import (
    ConfigError,
    MissingRepresentationError,
    NonConvergentSeriesError,
    PcmlaxError,
    SingularityError,
)
from .geometry import (
    FieldSet,
    Lattice2D,
    LieOneForm,
    LorentzFrame,
    fieldset_from_expressions,
    random_lorentz_frame,
    random_smooth_fieldset,
)
from .reportio import base_report, print_summary, read_dense, write_dense, write_report_files

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_CLOSEDNESS = 4
EXIT_COMMUTATION = 5


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


class Runtime:
    """Config resolved into live objects."""

    def __init__(self, cfg: dict, config_dir: Path):
        if "algebra" not in cfg or "lattice" not in cfg:
            raise ConfigError("config needs 'algebra' and 'lattice' blocks")
        self.cfg = cfg
        self.algebra = alg_mod.algebra_from_config(cfg["algebra"])
        lat_block = cfg["lattice"]
        try:
            self.lattice = Lattice2D(
                extents=tuple(lat_block["extents"]),
                spacing=tuple(lat_block["spacing"]),
                boundary=lat_block.get("boundary", "periodic"),
            )
            self.frame = LorentzFrame(h=np.asarray(
                lat_block.get("metric", [[-1.0, 0.0], [0.0, 1.0]]), dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad lattice/metric block: {exc}") from exc
        self.options = cfg.get("options", {})
        self._field_blocks = cfg.get("fields", {})
        self._config_dir = config_dir

    def field(self, name: str, lattice: Optional[Lattice2D] = None,
              role: str = "dual") -> FieldSet:
        block = self._field_blocks.get(name)
        if block is None:
            raise ConfigError(f"config defines no field {name!r}")
        lattice = lattice or self.lattice
        if "expressions" in block:
            exprs = block["expressions"]
            if len(exprs) != self.algebra.dim:
                raise ConfigError(
                    f"field {name!r} needs {self.algebra.dim} expressions, got {len(exprs)}")
            return fieldset_from_expressions(exprs, lattice, role=role)
        if "file" in block:
            arr, _meta = read_dense(self._config_dir / block["file"])
            return FieldSet(values=arr, lattice=lattice, role=role)
        raise ConfigError(f"field {name!r} needs 'expressions' or 'file'")

    def has_field(self, name: str) -> bool:
        return name in self._field_blocks

    def field_is_refinable(self, name: str) -> bool:
        return "expressions" in self._field_blocks.get(name, {})


def _resolved_seed(args, options: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(options.get("seed", 0))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_verify_identities(rt: Runtime, args, report: dict) -> None:
    rng = np.random.default_rng(report["seed"])
    opts = rt.options
    checks = report["checks"]

    # Hodge involution over seeded random frames and one-forms
    n_frames = int(opts.get("hodge_frames", 100))
    worst = 0.0
    for _ in range(n_frames):
        frame = random_lorentz_frame(rng)
        vals = rng.normal(size=rt.lattice.extents + (2, 2))
        omega = LieOneForm(values=vals, lattice=rt.lattice)
        from .geometry import hodge_oneform
        twice = hodge_oneform(hodge_oneform(omega, frame), frame)
        worst = max(worst, float(np.abs(twice.values - vals).max() / np.abs(vals).max()))
    tol = float(opts.get("hodge_tol", 1e-14))
    checks.append({"name": "hodge_involution", "max_norm": worst, "tolerance": tol,
                   "frames": n_frames, "pass": worst <= tol})

    # scalar closed form vs truncated series, compared against the exact
    # geometric tail prediction (holds for every |A| < 1)
    order = int(opts.get("scalar_series_order", 60))
    constants = opts.get("scalar_constants", [0.9, -0.9, 0.5, -0.5, 0.1])
    worst_excess = 0.0
    for a in constants:
        ce, co = 1.0 / (1.0 - a * a), a / (1.0 - a * a)
        powers = a ** np.arange(order + 1)
        se = powers[0::2].sum()
        so = powers[1::2].sum()
        tail = abs(a) ** (order + 1) / (1.0 - a * a)
        for exact, part in ((ce, se), (co, so)):
            excess = abs(exact - part) - (tail * (1.0 + 1e-9) + 1e-13 * abs(exact))
            worst_excess = max(worst_excess, excess)
    pole_ok = False
    try:
        small = Lattice2D((4, 4), (0.25, 0.25), "periodic")
        ones = FieldSet(values=np.ones((4, 4, 1)), lattice=small)
        from .geometry import d_scalar
        dual_current.solve_scalar(ones, d_scalar(ones), rt.frame)
    except PcmlaxError:
        pole_ok = True
    checks.append({"name": "scalar_closed_vs_series_tail", "max_norm": worst_excess,
                   "tolerance": 0.0, "order": order, "pass": worst_excess <= 0.0})
    checks.append({"name": "scalar_pole_detection", "value": "raised" if pole_ok else "missed",
                   "pass": pole_ok})

    # matrix three-way agreement over a seeded smooth ensemble
    count = int(opts.get("ensemble", 10))
    series_order = int(opts.get("series_order", 60))
    worst_cd = worst_cs = 0.0
    for _ in range(count):
        amp = 0.6 * rng.uniform(0.5, 1.0)
        A = random_smooth_fieldset(rt.lattice, rt.algebra.dim, rng, amplitude=amp)
        closed = dual_current.solve_closed(rt.algebra, A, rt.frame)
        direct = dual_current.solve_direct(rt.algebra, A, rt.frame)
        series = dual_current.solve_series(rt.algebra, A, rt.frame, order=series_order)
        scale = max(np.abs(closed.F.values).max(), 1e-300)
        worst_cd = max(worst_cd, float(np.abs(closed.F.values - direct.F.values).max()) / scale)
        worst_cs = max(worst_cs, float(np.abs(closed.F.values - series.F.values).max()) / scale)
    tol_cd = float(opts.get("three_way_tol_direct", 1e-10))
    tol_cs = float(opts.get("three_way_tol_series", 1e-9))
    checks.append({"name": "closed_vs_direct", "max_norm": worst_cd,
                   "tolerance": tol_cd, "ensemble": count, "pass": worst_cd <= tol_cd})
    checks.append({"name": "closed_vs_series", "max_norm": worst_cs,
                   "tolerance": tol_cs, "order": series_order, "pass": worst_cs <= tol_cs})

    # binomial inverse identity on random well-conditioned pairs
    npairs = int(opts.get("binomial_pairs", 1000))
    tol_b = float(opts.get("binomial_tol", 1e-10))
    worst_b = 0.0
    for _ in range(npairs):
        amat = _well_conditioned(rng)
        bmat = _well_conditioned(rng)
        rep = dual_current.binomial_identity_check(amat, bmat)
        worst_b = max(worst_b, rep.details["main_rel"])
        if rep.details.get("kernel_rel") is not None:
            worst_b = max(worst_b, rep.details["kernel_rel"])
    checks.append({"name": "binomial_identity", "max_norm": worst_b,
                   "tolerance": tol_b, "pairs": npairs, "pass": worst_b <= tol_b})


def _well_conditioned(rng: np.random.Generator, n: int = 3,
                      cond_cap: float = 50.0) -> np.ndarray:
    for _ in range(100):
        m = rng.normal(size=(n, n))
        if np.linalg.cond(m) <= cond_cap:
            return m
    raise RuntimeError("could not draw a well-conditioned matrix")


def cmd_residuals(rt: Runtime, args, report: dict) -> None:
    opts = rt.options
    checks = report["checks"]
    factor = int(args.resolution_factor or opts.get("resolution_factor", 2))
    A = rt.field("A")

    closed = dual_current.solve_closed(rt.algebra, A, rt.frame)
    res = dual_current.first_order_residual(closed, A, rt.algebra, rt.frame)
    tol = float(opts.get("first_order_tol", 1e-12))
    checks.append({**res.record(tol, res.rel_max <= tol), "name": "first_order_residual"})

    band = opts.get("flatness_ratio_band")
    flat_coarse = lax.flatness_residual(lax.build_lax(rt.algebra, A, rt.frame))
    entry = {"name": "flatness_residual", "max_norm": flat_coarse.max_norm,
             "l2_norm": flat_coarse.l2_norm}
    if rt.field_is_refinable("A"):
        fine_lat = rt.lattice.refine(factor)
        A_fine = rt.field("A", lattice=fine_lat)
        flat_fine = lax.flatness_residual(lax.build_lax(rt.algebra, A_fine, rt.frame))
        ratio = flat_coarse.max_norm / flat_fine.max_norm if flat_fine.max_norm > 0 else float("inf")
        entry["fine_max_norm"] = flat_fine.max_norm
        entry["ratio"] = ratio
        entry["resolution_factor"] = factor
        if band:
            entry["pass"] = bool(band[0] <= ratio <= band[1])
            entry["tolerance"] = float(band[1])
    else:
        entry["note"] = "refinement skipped (array-file field)"
    checks.append(entry)

    if rt.has_field("phi"):
        phi = rt.field("phi", role="original")
        bi_coarse = lagrangian.bianchi_residual(
            lagrangian.maurer_cartan_current(rt.algebra, phi), rt.algebra)
        entry = {"name": "bianchi_residual", "max_norm": bi_coarse.max_norm,
                 "l2_norm": bi_coarse.l2_norm}
        if rt.field_is_refinable("phi"):
            fine_lat = rt.lattice.refine(factor)
            phi_fine = rt.field("phi", lattice=fine_lat, role="original")
            bi_fine = lagrangian.bianchi_residual(
                lagrangian.maurer_cartan_current(rt.algebra, phi_fine), rt.algebra)
            ratio = bi_coarse.max_norm / bi_fine.max_norm if bi_fine.max_norm > 0 else float("inf")
            entry["fine_max_norm"] = bi_fine.max_norm
            entry["ratio"] = ratio
            entry["resolution_factor"] = factor
            if band:
                entry["pass"] = bool(band[0] <= ratio <= band[1])
                entry["tolerance"] = float(band[1])
        checks.append(entry)


def _paths_from_options(opts: dict) -> list[lax.LatticePath]:
    out = []
    for spec in opts.get("paths", []):
        out.append(lax.LatticePath(start=tuple(spec["start"]), moves=tuple(spec["moves"])))
    return out


def cmd_integrate(rt: Runtime, args, report: dict, outdir: Optional[Path]) -> None:
    if rt.algebra.representation is None:
        raise ConfigError(f"algebra {rt.algebra.name!r} has no matrix representation")
    opts = rt.options
    checks = report["checks"]
    A = rt.field("A")
    conn = lax.build_lax(rt.algebra, A, rt.frame)
    paths = _paths_from_options(opts)
    if not paths:
        raise ConfigError("integrate needs options.paths")
    r = rt.algebra.representation.shape[-1]
    g0 = np.eye(r, dtype=complex)
    transported = []
    for idx, path in enumerate(paths):
        g = lax.integrate_lax(conn, g0, path)
        transported.append(g)
        checks.append({"name": f"transport_{idx:03d}",
                       "value": float(np.linalg.norm(g)),
                       "endpoint": list(path.endpoint())})
        if outdir is not None:
            write_dense(outdir / f"transport_{idx:03d}.dense", g,
                        name=f"transport_{idx:03d}", order="row col",
                        algebra=rt.algebra.name,
                        tags={"provenance": conn.provenance,
                              "path_start": f"{path.start}",
                              "path_moves": "".join(path.moves)})
    for pair in opts.get("path_pairs", []):
        ia, ib = int(pair[0]), int(pair[1])
        gap = lax.path_dependence_gap(conn, g0, paths[ia], paths[ib])
        tol = 10.0 * gap.bound + float(opts.get("gap_floor", 1e-12))
        checks.append({"name": f"path_gap_{ia}_{ib}", "max_norm": gap.gap,
                       "tolerance": tol, "bound": gap.bound,
                       "plaquettes": gap.plaquettes, "pass": gap.gap <= tol})


def cmd_lagrangian(rt: Runtime, args, report: dict, outdir: Optional[Path]) -> None:
    opts = rt.options
    checks = report["checks"]
    scale = float(opts.get("scale", 1.0))
    A = rt.field("A")
    direct = lagrangian.dual_lagrangian_direct(rt.algebra, A, rt.frame, scale=scale)
    split = lagrangian.dual_lagrangian_split(rt.algebra, A, rt.frame, scale=scale)
    gprime = lax.build_lax(rt.algebra, A, rt.frame).form
    pcm = lagrangian.pcm_lagrangian(gprime, rt.algebra, rt.frame, scale=scale)

    dens_scale = max(np.abs(direct.values).max(), np.abs(split.values).max(), 1e-300)
    diff = float(np.abs(direct.values - split.values).max()) / dens_scale
    tol = float(opts.get("split_tol", 1e-12))
    checks.append({"name": "direct_vs_split", "max_norm": diff, "tolerance": tol,
                   "pass": diff <= tol})
    if outdir is not None:
        for dens in (direct, split, pcm):
            write_dense(outdir / f"density_{dens.tag}.dense", dens.values,
                        name=dens.tag, order="site0 site1",
                        algebra=rt.algebra.name, tags={"scale": str(scale)})
        if args.terms:
            for key, vals in split.terms.items():
                write_dense(outdir / f"term_{key}.dense", vals, name=key,
                            order="site0 site1", algebra=rt.algebra.name,
                            tags={"scale": str(scale)})


def cmd_frobenius(rt: Runtime, args, report: dict, outdir: Optional[Path]) -> int:
    opts = rt.options
    A = rt.field("A")
    thresholds = opts.get("thresholds", {})
    base = tuple(opts.get("base_site", (0, 0)))
    result = pde_frobenius.frobenius_pipeline(rt.algebra, A, rt.frame,
                                              thresholds=thresholds, base=base)
    report["checks"].extend(result.stages)
    report["failed_stage"] = result.failed_stage
    if result.passed and outdir is not None and result.phi is not None:
        write_dense(outdir / "recovered_phi.dense", result.phi.values,
                    name="recovered_phi", order="site0 site1 generator",
                    algebra=rt.algebra.name, tags={"base": f"{base}"})
    if result.passed:
        return EXIT_PASS
    if result.failed_stage == "closedness":
        return EXIT_CLOSEDNESS
    if result.failed_stage == "commutation":
        return EXIT_COMMUTATION
    return EXIT_CHECK_FAILURE


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcmlax", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify-identities", "residuals", "integrate", "lagrangian", "frobenius"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--resolution-factor", type=int, default=None)
        if name == "lagrangian":
            p.add_argument("--terms", action="store_true")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        rt = Runtime(cfg, Path(args.config).resolve().parent)
        seed = _resolved_seed(args, rt.options)
        report = base_report(args.command, cfg, seed, algebra=rt.algebra)
        outdir = Path(args.out) if args.out else None
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)

        code = EXIT_PASS
        if args.command == "verify-identities":
            cmd_verify_identities(rt, args, report)
        elif args.command == "residuals":
            cmd_residuals(rt, args, report)
        elif args.command == "integrate":
            cmd_integrate(rt, args, report, outdir)
        elif args.command == "lagrangian":
            cmd_lagrangian(rt, args, report, outdir)
        elif args.command == "frobenius":
            code = cmd_frobenius(rt, args, report, outdir)

        failed = [c for c in report["checks"] if c.get("pass") is False]
        if code == EXIT_PASS and failed:
            code = EXIT_CHECK_FAILURE
        if outdir is not None:
            write_report_files(outdir, report)
        print_summary(report, time.perf_counter() - t0)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingRepresentationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularityError, NonConvergentSeriesError) as exc:
        print(f"singularity: {exc}", file=sys.stderr)
        sites = getattr(exc, "sites", None)
        if sites:
            shown = ", ".join(str(s) for s in sites[:10])
            more = "" if len(sites) <= 10 else f" (+{len(sites) - 10} more)"
            print(f"  sites: {shown}{more}", file=sys.stderr)
        return EXIT_SINGULARITY
    except PcmlaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
