"""Serialization: grid CSV, causal-sample CSV, light-line JSON, OBJ meshes.

All writers are deterministic (shortest round-trip float formatting, fixed
row-major node order, no timestamps) so identical inputs give byte-identical
files.
"""

from __future__ import annotations

import io
import json

import numpy as np

from .errors import NonFiniteValueError
from .exprfield import SampledGrid
from .geometry import CausalSample, LightLine

__all__ = [
    "grid_csv",
    "causal_csv",
    "lightlines_payload",
    "obj_text",
    "read_grid_csv",
]

GRID_HEADER = "x,y,value"
CAUSAL_HEADER = "x,y,b,bx,by,class"


def _fmt(v: float) -> str:
    return repr(float(v))


def grid_csv(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> str:
    """Grid CSV, header ``x,y,value``; rows row-major (x index outermost)."""
    buf = io.StringIO()
    buf.write(GRID_HEADER + "\n")
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            buf.write(f"{_fmt(x)},{_fmt(y)},{_fmt(values[i, j])}\n")
    return buf.getvalue()


def read_grid_csv(text: str) -> SampledGrid:
    """Rebuild a SampledGrid from grid CSV produced by ``grid_csv``."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0].strip() != GRID_HEADER:
        raise ValueError(f"expected header {GRID_HEADER!r}")
    rows = np.array([[float(tok) for tok in ln.split(",")]
                     for ln in lines[1:]])
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    if rows.shape[0] != xs.size * ys.size:
        raise ValueError("rows do not form a complete lattice")
    values = rows[:, 2].reshape(xs.size, ys.size)
    return SampledGrid(xs, ys, values)


def causal_csv(samples: list[CausalSample]) -> str:
    """Causal-sample CSV, header ``x,y,b,bx,by,class``."""
    buf = io.StringIO()
    buf.write(CAUSAL_HEADER + "\n")
    for s in samples:
        buf.write(f"{_fmt(s.x)},{_fmt(s.y)},{_fmt(s.b)},{_fmt(s.bx)},"
                  f"{_fmt(s.by)},{s.cls.value}\n")
    return buf.getvalue()


def lightlines_payload(lines: list[LightLine]) -> dict:
    """JSON-ready report of fitted light-like lines."""
    return {
        "schema": 1,
        "lines": [
            {
                "base": [ln.base[0], ln.base[1]],
                "direction": [ln.direction[0], ln.direction[1]],
                "lifted": [ln.lifted[0], ln.lifted[1], ln.lifted[2]],
                "sample_count": len(ln.samples),
                "perp_residual": ln.perp_residual,
                "lightlike_defect": ln.lightlike_defect,
                "verified": ln.verified,
            }
            for ln in lines
        ],
    }


def obj_text(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> str:
    """OBJ mesh of a height field: one ``v x y t`` line per node (row-major,
    x index outermost), each lattice cell split into two triangles wound
    counter-clockwise as seen from +t."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValueError(
            f"refusing OBJ export: non-finite value at node "
            f"({int(bad[0])}, {int(bad[1])})")
    nx, ny = values.shape
    buf = io.StringIO()
    for i in range(nx):
        for j in range(ny):
            buf.write(f"v {_fmt(xs[i])} {_fmt(ys[j])} {_fmt(values[i, j])}\n")

    def node(i, j):
        return i * ny + j + 1  # OBJ indices are 1-based

    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b = node(i, j), node(i + 1, j)
            c, d = node(i + 1, j + 1), node(i, j + 1)
            buf.write(f"f {a} {b} {c}\n")
            buf.write(f"f {a} {c} {d}\n")
    return buf.getvalue()


def dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
