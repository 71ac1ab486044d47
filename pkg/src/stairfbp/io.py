"""Run configuration and text file formats.

Config files are ``key = value`` lines with ``#`` comments; vectors are
comma separated.  Field and curve files are plain text with every float in
its shortest round-trip form, so writing and reading back is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .grid import INNER, MASK_CODES, OUTER, Circle, ConvexRing, Polygon, ScalarField
from .nonlinearity import RegularizationSchedule, ThresholdLadder

KINDS = ("radial", "ring2d", "obstacle", "multiplicity")

# key -> parser; vectors come back as tuples of floats
_FLOAT = float
_INT = int
_STR = str


def _vec(text):
    return tuple(float(t) for t in text.split(","))


KEYS = {
    "kind": _STR, "dim": _INT, "r0": _FLOAT, "R": _FLOAT, "M": _FLOAT, "lam": _FLOAT,
    "mu": _vec, "phi": _FLOAT,
    "outer": _STR, "outer_center": _vec, "outer_radius": _FLOAT, "outer_vertices": _vec,
    "inner": _STR, "inner_center": _vec, "inner_radius": _FLOAT, "inner_vertices": _vec,
    "eps": _vec, "decay": _FLOAT, "floor": _FLOAT,
    "h": _FLOAT, "tol": _FLOAT, "lin_tol": _FLOAT, "defect_tol": _FLOAT, "res_tol": _FLOAT,
    "distinct_min": _FLOAT, "levels": _vec, "method": _STR,
    "u0": _FLOAT, "c": _FLOAT, "f0": _FLOAT,
    "alpha": _FLOAT, "m": _INT, "out": _STR,
}

REQUIRED = {
    "radial": ("r0", "R", "mu"),
    "ring2d": ("outer", "inner", "mu", "h"),
    "obstacle": ("outer", "u0", "c", "mu", "f0", "h"),
    "multiplicity": ("r0", "R", "mu", "alpha", "m", "h"),
}


@dataclass
class RunConfig:
    kind: str
    ladder: ThresholdLadder | None
    sched: RegularizationSchedule | None
    h: float
    dim: int = 2
    r0: float | None = None
    R: float | None = None
    phi: float = 1.0
    outer: object = None
    inner: object = None
    tol: float | None = None
    lin_tol: float | None = None
    defect_tol: float | None = None
    res_tol: float | None = None
    distinct_min: float | None = None
    levels: tuple = ()
    method: str = "newton"
    u0: float | None = None
    c: float | None = None
    mu: float | None = None
    f0: float | None = None
    alpha: float | None = None
    m: int | None = None
    out: str | None = None
    problem: object = None
    raw: dict = field(default_factory=dict)

    @property
    def ring(self):
        return ConvexRing(self.outer, self.inner)


def _tokenize(text):
    entries, lines = {}, {}
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(no, "expected 'key = value'")
        key, value = (t.strip() for t in body.split("=", 1))
        if key not in KEYS:
            raise ParseError(no, f"unknown key '{key}'")
        if key in entries:
            raise ParseError(no, f"duplicate key '{key}'")
        if not value:
            raise ParseError(no, f"empty value for '{key}'")
        try:
            entries[key] = KEYS[key](value)
        except ValueError:
            raise ParseError(no, f"cannot parse value for '{key}': {value!r}") from None
        lines[key] = no
    return entries, lines, len(text.splitlines())


def _curve(entries, prefix, lines, last):
    kind = entries.get(prefix)
    if kind == "circle":
        for k in (f"{prefix}_center", f"{prefix}_radius"):
            if k not in entries:
                raise ParseError(last + 1, f"missing key '{k}'")
        center = entries[f"{prefix}_center"]
        if len(center) != 2:
            raise ParseError(lines[f"{prefix}_center"], "center needs two coordinates")
        return Circle(center, entries[f"{prefix}_radius"])
    if kind == "polygon":
        key = f"{prefix}_vertices"
        if key not in entries:
            raise ParseError(last + 1, f"missing key '{key}'")
        v = entries[key]
        if len(v) % 2:
            raise ParseError(lines[key], "vertex list needs x, y pairs")
        return Polygon(tuple(zip(v[::2], v[1::2])))
    raise ParseError(lines.get(prefix, last + 1), f"'{prefix}' must be circle or polygon")


def parse_config(text: str, kind: str | None = None) -> RunConfig:
    """Parse and validate a configuration; ``kind`` may come from the CLI verb."""
    entries, lines, last = _tokenize(text)
    if kind is not None and "kind" in entries and entries["kind"] != kind:
        raise ValidationError(f"config kind '{entries['kind']}' does not match '{kind}'")
    kind = entries.get("kind", kind)
    if kind not in KINDS:
        raise ParseError(lines.get("kind", last + 1), f"kind must be one of {', '.join(KINDS)}")
    for key in REQUIRED[kind]:
        if key not in entries:
            raise ParseError(last + 1, f"missing key '{key}'")
    M = entries.get("M", 1.0)
    cfg = RunConfig(kind=kind, ladder=None, sched=None, h=entries.get("h", 1.0 / 128),
                    raw=dict(entries))
    for key in ("dim", "r0", "R", "phi", "tol", "lin_tol", "defect_tol", "res_tol",
                "distinct_min", "method", "u0", "c", "f0", "alpha", "m", "out"):
        if key in entries:
            setattr(cfg, key, entries[key])
    if not cfg.h > 0:
        raise ValidationError("h must be positive")
    if cfg.method not in ("newton", "picard"):
        raise ValidationError("method must be newton or picard")
    if kind == "obstacle":
        if len(entries["mu"]) != 1:
            raise ValidationError("the obstacle problem takes a single threshold mu")
        cfg.mu = entries["mu"][0]
        cfg.outer = _curve(entries, "outer", lines, last)
        if "eps" in entries:
            cfg.sched = RegularizationSchedule(entries["eps"], entries.get("decay", 0.5),
                                               entries.get("floor", 1e-4))
        from .obstacle import ObstacleProblem
        cfg.problem = ObstacleProblem(cfg.outer, cfg.u0, cfg.c, cfg.mu, cfg.f0, cfg.sched)
        cfg.sched = cfg.problem.sched
        cfg.levels = entries.get("levels", ())
        return cfg
    cfg.ladder = ThresholdLadder(entries["mu"], entries.get("lam", 1.0), M)
    if "eps" in entries:
        cfg.sched = RegularizationSchedule(entries["eps"], entries.get("decay", 0.5),
                                           entries.get("floor", 1e-4))
        cfg.sched.validate(cfg.ladder)
    elif kind == "ring2d":
        raise ParseError(last + 1, "missing key 'eps'")
    cfg.levels = entries.get("levels", tuple(round(0.1 * k * M, 12) for k in range(1, 10)))
    if kind == "ring2d":
        cfg.outer = _curve(entries, "outer", lines, last)
        cfg.inner = _curve(entries, "inner", lines, last)
        cfg.ring  # validates nesting
    if kind in ("radial", "multiplicity"):
        if not 0 < cfg.r0 < cfg.R:
            raise ValidationError("need 0 < r0 < R")
    if kind == "multiplicity":
        if cfg.m < 1:
            raise ValidationError("m must be at least 1")
        if not 0 <= cfg.alpha < 1:
            raise ValidationError("alpha must lie in [0, 1)")
    return cfg


def load_config(path, kind=None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), kind)


# ---------------------------------------------------------------- fields

def write_field(path, fld: ScalarField) -> None:
    nx, ny = fld.shape
    rows = ["FIELD v1", f"{nx} {ny}", f"{fld.origin[0]!r} {fld.origin[1]!r}", repr(fld.h)]
    codes = np.asarray(list(MASK_CODES))[fld.mask]
    vals = fld.values
    for i in range(nx):
        for j in range(ny):
            rows.append(f"{i} {j} {codes[i, j]} {float(vals[i, j])!r}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_field(path) -> ScalarField:
    """Inverse of :func:`write_field`.

    Cut-cell legs are not stored; the reloaded field has unit legs and takes
    its boundary data from the values at the O and N nodes.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "FIELD v1":
        raise ParseError(1, "expected header 'FIELD v1'")
    try:
        nx, ny = (int(t) for t in lines[1].split())
        ox, oy = (float(t) for t in lines[2].split())
        h = float(lines[3])
    except (ValueError, IndexError):
        raise ParseError(2, "malformed field header") from None
    if len(lines) - 4 != nx * ny:
        raise ParseError(len(lines), f"expected {nx * ny} rows, found {len(lines) - 4}")
    mask = np.empty((nx, ny), dtype=np.int8)
    values = np.empty((nx, ny))
    lookup = {c: k for k, c in enumerate(MASK_CODES)}
    for no, line in enumerate(lines[4:], 5):
        parts = line.split()
        if len(parts) != 4 or parts[2] not in lookup:
            raise ParseError(no, "expected 'i j mask value'")
        i, j = int(parts[0]), int(parts[1])
        mask[i, j] = lookup[parts[2]]
        values[i, j] = float(parts[3])
    outer = values[mask == OUTER]
    inner = values[mask == INNER]
    return ScalarField((ox, oy), h, mask, values, np.ones((nx, ny, 4)),
                       float(outer[0]) if outer.size else 0.0,
                       float(inner[0]) if inner.size else 0.0)


# ---------------------------------------------------------------- curves

def write_curves(path, curves) -> None:
    """``curves`` is an iterable of ``(level, vertices)`` pairs, one per component."""
    rows = ["CURVES v1"]
    for level, pts in curves:
        rows.append(f"LEVEL {float(level)!r}")
        rows.extend(f"{float(x)!r} {float(y)!r}" for x, y in np.asarray(pts))
        rows.append("")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_curves(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "CURVES v1":
        raise ParseError(1, "expected header 'CURVES v1'")
    out, level, pts = [], None, []
    for no, line in enumerate(lines[1:], 2):
        line = line.strip()
        if line.startswith("LEVEL"):
            level, pts = float(line.split()[1]), []
        elif not line:
            if level is not None:
                out.append((level, np.asarray(pts).reshape(-1, 2)))
                level = None
        else:
            if level is None:
                raise ParseError(no, "vertex outside a LEVEL block")
            x, y = line.split()
            pts.append((float(x), float(y)))
    if level is not None:
        out.append((level, np.asarray(pts).reshape(-1, 2)))
    return out


# ---------------------------------------------------------------- reports

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(path, report: dict) -> None:
    """JSON in insertion order (callers build dicts in a fixed order)."""
    Path(path).write_text(json.dumps(_plain(report), indent=2) + "\n", encoding="utf-8")
