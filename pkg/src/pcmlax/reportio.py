"""Residual reports, deterministic JSON/CSV reports, and dense field files.

Reports are byte-identical for identical config + seed: keys are sorted,
floats use repr, and wall time is printed to the console but never written
into report payloads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .geometry import CONVENTIONS

SCHEMA_VERSION = 1
DENSE_MAGIC = "PCMLAX-DENSE 1"


@dataclass
class ResidualReport:
    """Max-norm and RMS of a pointwise residual field plus diagnostics.

    ``scale`` is the max-norm of the largest constituent term, so
    ``rel_max`` is resolution-meaningful; ``field_values`` keeps the
    per-site residual for callers that need site diagnostics.
    """

    name: str
    max_norm: float
    l2_norm: float
    scale: float
    details: dict = field(default_factory=dict)
    field_values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def rel_max(self) -> float:
        if self.scale > 0:
            return self.max_norm / self.scale
        return 0.0 if self.max_norm == 0 else float("inf")

    def record(self, tolerance: Optional[float] = None,
               passed: Optional[bool] = None) -> dict:
        rec = {
            "name": self.name,
            "max_norm": float(self.max_norm),
            "l2_norm": float(self.l2_norm),
            "scale": float(self.scale),
            "rel_max": float(self.rel_max) if np.isfinite(self.rel_max) else None,
        }
        for key, val in sorted(self.details.items()):
            if isinstance(val, (str, bool, int, float, type(None))):
                rec[key] = val
            elif np.isscalar(val):
                rec[key] = float(val)
        if tolerance is not None:
            rec["tolerance"] = float(tolerance)
        if passed is not None:
            rec["pass"] = bool(passed)
        return rec


def make_residual_report(name: str, values: np.ndarray,
                         scale_terms: Sequence[np.ndarray] = (),
                         details: Optional[dict] = None) -> ResidualReport:
    vals = np.asarray(values)
    max_norm = float(np.abs(vals).max()) if vals.size else 0.0
    l2 = float(np.sqrt(np.mean(vals**2))) if vals.size else 0.0
    scale = 0.0
    for term in scale_terms:
        t = np.asarray(term)
        if t.size:
            scale = max(scale, float(np.abs(t).max()))
    return ResidualReport(name=name, max_norm=max_norm, l2_norm=l2, scale=scale,
                          details=dict(details or {}), field_values=vals)


# ---------------------------------------------------------------------------
# deterministic JSON / CSV
# ---------------------------------------------------------------------------

def _pyify(obj):
    if isinstance(obj, dict):
        return {str(k): _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _pyify(obj.tolist())
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_pyify(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def base_report(command: str, cfg: dict, seed: int, algebra=None) -> dict:
    conventions = dict(CONVENTIONS)
    if algebra is not None:
        conventions["trace_metric"] = algebra.trace_note
        conventions["algebra"] = algebra.name
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_digest": config_digest(cfg),
        "seed": int(seed),
        "conventions": conventions,
        "checks": [],
    }


def write_report_files(outdir: Path, report: dict) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(canonical_json(report), encoding="utf-8")
    lines = ["name,value,tolerance,pass"]
    for chk in report.get("checks", []):
        val = chk.get("max_norm", chk.get("value", ""))
        tol = chk.get("tolerance", "")
        ok = chk.get("pass", "")
        lines.append(f"{chk.get('name', '')},{val},{tol},{ok}")
    (outdir / "checks.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def print_summary(report: dict, wall_time: float) -> None:
    print(f"== pcmlax {report['command']} (seed {report['seed']}, "
          f"digest {report['config_digest'][:12]}) ==")
    for chk in report.get("checks", []):
        status = chk.get("pass")
        mark = "PASS" if status else ("FAIL" if status is not None else "info")
        val = chk.get("max_norm", chk.get("value", ""))
        extra = f" tol={chk['tolerance']:g}" if "tolerance" in chk else ""
        print(f"  [{mark}] {chk['name']}: {val}{extra}")
    print(f"  wall time: {wall_time:.3f} s")


# ---------------------------------------------------------------------------
# dense field files
# ---------------------------------------------------------------------------

_DTYPES = {"<f8": np.dtype("<f8"), "<c16": np.dtype("<c16")}


def write_dense(path, array: np.ndarray, name: str, order: str,
                algebra: str = "", tags: Optional[dict] = None) -> None:
    """Self-describing dense file: text header, blank line, raw little-endian payload."""
    arr = np.asarray(array)
    dt = "<c16" if np.iscomplexobj(arr) else "<f8"
    payload = np.ascontiguousarray(arr.astype(_DTYPES[dt])).tobytes()
    tagmap = dict(CONVENTIONS)
    tagmap.update(tags or {})
    header = [
        DENSE_MAGIC,
        f"name: {name}",
        f"dtype: {dt}",
        "shape: " + " ".join(str(s) for s in arr.shape),
        f"order: {order}",
        f"algebra: {algebra}",
        "tags: " + ";".join(f"{k}={v}" for k, v in sorted(tagmap.items())),
        f"payload_bytes: {len(payload)}",
        "",
    ]
    with open(path, "wb") as fh:
        fh.write("\n".join(header).encode("utf-8"))
        fh.write(payload)


def read_dense(path) -> tuple[np.ndarray, dict]:
    blob = Path(path).read_bytes()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise ConfigError(f"{path}: missing dense-file header terminator")
    head = blob[:sep].decode("utf-8").splitlines()
    if not head or head[0] != DENSE_MAGIC:
        raise ConfigError(f"{path}: not a dense field file")
    meta = {}
    for line in head[1:]:
        key, _, val = line.partition(":")
        meta[key.strip()] = val.strip()
    shape = tuple(int(s) for s in meta["shape"].split())
    dt = _DTYPES.get(meta["dtype"])
    if dt is None:
        raise ConfigError(f"{path}: unsupported dtype {meta['dtype']!r}")
    payload = blob[sep + 2:]
    expected = int(meta["payload_bytes"])
    if len(payload) != expected:
        raise ConfigError(f"{path}: payload is {len(payload)} bytes, header says {expected}")
    arr = np.frombuffer(payload, dtype=dt).reshape(shape)
    return arr.copy(), meta
