"""CSV and JSON serialization for fields, regions, covers and reports."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Grid, RegionMask, SampledField
from .operators import UpperHalfField
from .whitney import Cube


class ParseError(ValueError):
    """Malformed input file; the message carries the file and line."""


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def digest(obj) -> str:
    blob = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_json(path: Path | str, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def _axis_names(dim: int) -> list[str]:
    return ["x", "y"][:dim]


def field_rows(f: SampledField) -> Iterable[list]:
    pts = f.grid.centers()
    for p, v in zip(pts, f.values.ravel()):
        yield [*p, v]


def write_field_csv(path, f: SampledField) -> Path:
    """Rows ``x[,y],value``."""
    return _write_csv(path, _axis_names(f.grid.dim) + ["value"], field_rows(f))


def write_upper_half_csv(path, u: UpperHalfField) -> Path:
    """Rows ``x[,y],t,value``."""
    pts = u.grid.centers()

    def rows():
        for j, t in enumerate(u.ladder.values):
            for p, v in zip(pts, u.values[j].ravel()):
                yield [*p, t, v]

    return _write_csv(path, _axis_names(u.grid.dim) + ["t", "value"], rows())


def write_cover_csv(path, cubes: Sequence[Cube], dim: int) -> Path:
    """Rows ``center_x[,center_y],side``."""
    header = [f"center_{a}" for a in _axis_names(dim)] + ["side"]
    return _write_csv(path, header, ([*c.center, c.side] for c in cubes))


def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return _write_csv(path, list(header), rows)


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def read_cover_csv(path) -> list[Cube]:
    cubes = []
    for lineno, row in _read_numeric(path, min_cols=2):
        cubes.append(Cube(tuple(row[:-1]), row[-1]))
    return cubes


def read_region_csv(path, grid: Grid) -> RegionMask:
    """Region file: rows ``x[,y],value``; a cell belongs to the region when value > 0.

    Each row is snapped to the cell containing its point; points outside the box
    are a parse error.
    """
    member = np.zeros(grid.shape, dtype=bool)
    seen = 0
    for lineno, row in _read_numeric(path, min_cols=grid.dim + 1):
        if len(row) != grid.dim + 1:
            raise ParseError(f"{path}:{lineno}: expected {grid.dim + 1} columns, got {len(row)}")
        p = np.asarray(row[:-1])
        if np.any(p < np.asarray(grid.lo)) or np.any(p > np.asarray(grid.hi)):
            raise ParseError(f"{path}:{lineno}: point {tuple(p)} lies outside the grid box")
        if row[-1] > 0:
            member[grid.index_of(p)] = True
        seen += 1
    if seen == 0:
        raise ParseError(f"{path}: no data rows")
    return RegionMask(grid, member)


def region_from_intervals(grid: Grid, boxes: Sequence[Sequence[Sequence[float]]]) -> RegionMask:
    """Union of open boxes ``[[lo_0, hi_0], ...]`` rasterized by cell centers."""
    pts = grid.centers()
    member = np.zeros(grid.cell_count, dtype=bool)
    for box in boxes:
        box = np.asarray(box, float).reshape(grid.dim, 2)
        member |= np.all((pts > box[:, 0]) & (pts < box[:, 1]), axis=1)
    return RegionMask(grid, member.reshape(grid.shape))


def _read_numeric(path, min_cols: int):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = csv.reader(text.splitlines())
    header_seen = False
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            if not header_seen and lineno == 1:
                header_seen = True
                continue
            raise ParseError(f"{path}:{lineno}: non-numeric entry in {row!r}") from None
        if len(vals) < min_cols:
            raise ParseError(f"{path}:{lineno}: expected at least {min_cols} columns, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}:{lineno}: non-finite entry")
        yield lineno, vals
