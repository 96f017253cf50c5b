"""Whitney decomposition of grid regions into dyadic cubes.

Dyadic cubes are anchored to the grid: a level-l cube is a block of 2^l x ... x 2^l
cells aligned to ``grid.lo``. Distances to the complement are measured to
complement cell centers, so the smallest (single-cell) cubes sit at distance
h/2 from the boundary at best; bracket checks therefore carry a tolerance of h.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion, distance_transform_edt
from scipy.spatial import cKDTree

from .grid import Grid, RegionMask, SampledField


class WhitneyError(ValueError):
    """The region cannot be decomposed (empty, or with empty complement)."""


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube Q(c, r): center c, side r, corners c +/- r/2."""

    center: tuple[float, ...]
    side: float
    level: int | None = None

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2

    @property
    def volume(self) -> float:
        return self.side**self.dim

    @property
    def diameter(self) -> float:
        return self.side * np.sqrt(self.dim)

    def scaled(self, a: float) -> "Cube":
        """Q(c, a r)."""
        return Cube(self.center, a * self.side)

    def contains_points(self, pts: np.ndarray, closed: bool = True) -> np.ndarray:
        d = np.abs(np.asarray(pts) - np.asarray(self.center))
        half = self.side / 2
        return np.all(d <= half * (1 + 1e-12), axis=-1) if closed else np.all(d < half, axis=-1)

    def mask(self, grid: Grid) -> RegionMask:
        """Cells whose centers lie in the closed cube."""
        return RegionMask(grid, self.contains_points(grid.centers()).reshape(grid.shape))

    def fits(self, grid: Grid) -> bool:
        tol = 1e-9 * grid.spacing
        return bool(np.all(self.lower >= np.asarray(grid.lo) - tol) and np.all(self.upper <= np.asarray(grid.hi) + tol))


def side_factors(dim: int, dist_lo: float, dist_hi: float, convention: str) -> tuple[float, float]:
    """Bracket constants expressed against the side length (diam = sqrt(n) * side)."""
    if convention == "side":
        return dist_lo, dist_hi
    if convention == "diam":
        return dist_lo * np.sqrt(dim), dist_hi * np.sqrt(dim)
    raise ValueError(f"convention must be 'side' or 'diam', got {convention!r}")


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    cubes: tuple[Cube, ...]
    source: RegionMask = field(repr=False)
    dist_lo: float
    dist_hi: float
    convention: str = "side"

    @property
    def grid(self) -> Grid:
        return self.source.grid

    @property
    def bracket(self) -> tuple[float, float]:
        return side_factors(self.grid.dim, self.dist_lo, self.dist_hi, self.convention)

    def __len__(self):
        return len(self.cubes)


def _default_bracket(dim: int) -> tuple[float, float]:
    return np.sqrt(dim), 4 * np.sqrt(dim)


def whitney_decompose(region: RegionMask, dist_lo: float | None = None, dist_hi: float | None = None,
                      convention: str = "side") -> WhitneyCover:
    """Maximal dyadic cubes of the grid whose distance to the complement is within the bracket.

    Each region cell x with distance d(x) to the nearest complement center picks
    the largest level l with ``(lo + sqrt(n)) h 2^l < d(x)``; the dyadic cube of
    that level containing x lies in the region and satisfies the bracket. The
    maximal cubes among these candidates form the cover.
    """
    grid = region.grid
    n, h, N = grid.dim, grid.spacing, grid.cells_per_axis
    if region.is_empty():
        raise WhitneyError("region is empty")
    if region.is_full():
        raise WhitneyError("region is the whole grid; its complement is empty")
    dl, dh = _default_bracket(n) if dist_lo is None else (dist_lo, dist_hi)
    if dh is None or dh < 4 * dl:
        raise WhitneyError(f"need dist_hi >= 4 * dist_lo, got ({dl}, {dh})")
    lo_s, _ = side_factors(n, dl, dh, convention)
    A = lo_s + np.sqrt(n)

    d = distance_transform_edt(region.member, sampling=h)
    idx = np.argwhere(region.member)
    dist = d[region.member]
    with np.errstate(divide="ignore"):
        level = np.ceil(np.log2(dist / (A * h)) - 1e-12).astype(int) - 1
    level = np.clip(level, 0, None)
    # shrink cubes that would run past the grid (only when N is not a power of two)
    while True:
        size = 1 << level
        end = ((idx >> level[:, None]) + 1) * size[:, None]
        bad = np.any(end > N, axis=1) & (level > 0)
        if not bad.any():
            break
        level[bad] -= 1

    covered = np.zeros(grid.shape, dtype=bool)
    cubes: list[Cube] = []
    for lv in range(int(level.max()), -1, -1):
        sel = level == lv
        if not sel.any():
            continue
        anchors = np.unique(idx[sel] >> lv, axis=0)
        size = 1 << lv
        for a in anchors:
            start = a * size
            block = tuple(slice(s, s + size) for s in start)
            if covered[tuple(start)]:
                continue
            covered[block] = True
            center = np.asarray(grid.lo) + (start + size / 2) * h
            cubes.append(Cube(tuple(center), size * h, lv))
    return WhitneyCover(tuple(cubes), region, float(dl), float(dh), convention)


def _box_distance(points: np.ndarray, center: np.ndarray, half: float) -> np.ndarray:
    gap = np.clip(np.abs(points - center) - half, 0.0, None)
    return np.sqrt((gap**2).sum(axis=-1))


class _ComplementIndex:
    def __init__(self, region: RegionMask):
        comp = ~region.member
        if not comp.any():
            raise WhitneyError("region complement is empty; distance undefined")
        self.points = region.grid.centers()[comp.ravel()]
        self.tree = cKDTree(self.points)

    def distance(self, cube: Cube) -> float:
        c = np.asarray(cube.center)
        half = cube.side / 2
        d_center, _ = self.tree.query(c)
        near = self.tree.query_ball_point(c, d_center + half * np.sqrt(len(c)) + 1e-12)
        return float(_box_distance(self.points[near], c, half).min())

    def distances(self, cubes: Sequence[Cube]) -> np.ndarray:
        """Batched :meth:`distance`; the KD-tree queries run once for all cubes."""
        if not cubes:
            return np.zeros(0)
        ctr = np.array([c.center for c in cubes])
        half = np.array([c.side / 2 for c in cubes])
        d_center, _ = self.tree.query(ctr)
        reach = d_center + half * np.sqrt(ctr.shape[1]) + 1e-12
        near = self.tree.query_ball_point(ctr, reach)
        return np.array([_box_distance(self.points[ix], c, hf).min() for ix, c, hf in zip(near, ctr, half)])


def cube_dist_to_complement(cube: Cube, region: RegionMask) -> float:
    """Euclidean distance from the closed cube to the nearest complement cell center."""
    return _ComplementIndex(region).distance(cube)


def _pairs(cubes: Sequence[Cube], tol: float):
    """Index pairs (i < j) with overlapping interiors, and with touching boundaries.

    Candidates come from Chebyshev-ball queries between KD-trees, one tree per
    distinct side length; each candidate is then classified exactly.
    """
    lo = np.array([c.lower for c in cubes])
    hi = np.array([c.upper for c in cubes])
    ctr = np.array([c.center for c in cubes])
    sides = np.array([c.side for c in cubes])
    groups = {s: np.flatnonzero(sides == s) for s in np.unique(sides)}
    trees = {s: cKDTree(ctr[ix]) for s, ix in groups.items()}
    cand = []
    keys = sorted(groups)
    for a, sa in enumerate(keys):
        for sb in keys[a:]:
            hits = trees[sa].query_ball_tree(trees[sb], r=(sa + sb) / 2 + 2 * tol, p=np.inf)
            ia, ib = groups[sa], groups[sb]
            for k, js in enumerate(hits):
                if js:
                    cand.append(np.stack([np.full(len(js), ia[k]), ib[js]], axis=1))
    empty = np.zeros((0, 2), int)
    if not cand:
        return empty, empty
    pairs = np.concatenate(cand)
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    i, j = pairs[:, 0], pairs[:, 1]
    ov = np.minimum(hi[i], hi[j]) - np.maximum(lo[i], lo[j])
    inter = np.all(ov > tol, axis=-1)
    meet = np.all(ov >= -tol, axis=-1) & ~inter
    return pairs[inter], pairs[meet]


def rasterize_count(cubes: Sequence[Cube], grid: Grid) -> np.ndarray:
    """Per cell, the number of cubes whose interior contains the cell center."""
    n, h, N = grid.dim, grid.spacing, grid.cells_per_axis
    if not cubes:
        return np.zeros(grid.shape, dtype=int)
    ctr = np.array([c.center for c in cubes])
    half = np.array([c.side / 2 for c in cubes])[:, None]
    # open interior |x - c| < half on each axis, as a range of center indices [first, last]
    u = (ctr - np.asarray(grid.lo)) / h - 0.5
    axes = grid.axis()
    # start one index outside and step in, so float ties settle exactly as contains_points(closed=False)
    first = np.clip(np.floor(u - half / h).astype(int), 0, N - 1)
    last = np.clip(np.ceil(u + half / h).astype(int), 0, N - 1)
    for _ in range(3):
        first += (np.abs(axes[first] - ctr) >= half) & (first < N - 1)
        last -= (np.abs(axes[last] - ctr) >= half) & (last > 0)
    first[np.abs(axes[first] - ctr) >= half] = N
    ok = np.all(last >= first, axis=1)
    first, last = first[ok], last[ok] + 1
    diff = np.zeros((N + 1,) * n, dtype=int)
    if n == 1:
        np.add.at(diff, first[:, 0], 1)
        np.add.at(diff, last[:, 0], -1)
        return np.cumsum(diff)[:-1]
    np.add.at(diff, (first[:, 0], first[:, 1]), 1)
    np.add.at(diff, (last[:, 0], first[:, 1]), -1)
    np.add.at(diff, (first[:, 0], last[:, 1]), -1)
    np.add.at(diff, (last[:, 0], last[:, 1]), 1)
    return np.cumsum(np.cumsum(diff, axis=0), axis=1)[:-1, :-1]


@dataclass
class WhitneyReport:
    disjoint: bool
    coverage: bool
    dist_bracket: bool
    side_ratio: bool
    touching: bool
    spacing: float
    cube_count: int
    max_neighbors: int
    witnesses: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.disjoint and self.coverage and self.dist_bracket and self.side_ratio and self.touching

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "invariants": {
                "disjoint_interiors": self.disjoint,
                "coverage": self.coverage,
                "dist_bracket": self.dist_bracket,
                "side_ratio": self.side_ratio,
                "touching_neighbors": self.touching,
            },
            "spacing": self.spacing,
            "cube_count": self.cube_count,
            "max_neighbors": self.max_neighbors,
            "measured": self.measured,
            "witnesses": self.witnesses,
        }


def verify_whitney(cover: WhitneyCover, max_witnesses: int = 10) -> WhitneyReport:
    """Check the five geometric guarantees of a Whitney family at grid resolution."""
    grid = cover.grid
    n, h = grid.dim, grid.spacing
    cubes = list(cover.cubes)
    wit: dict[str, list] = {}
    tol = 1e-9 * h

    overlap, touch = _pairs(cubes, tol) if cubes else (np.zeros((0, 2), int),) * 2
    disjoint = len(overlap) == 0
    if not disjoint:
        wit["disjoint_interiors"] = [
            {"pair": [int(i), int(j)], "cubes": [_cube_dict(cubes[i]), _cube_dict(cubes[j])]}
            for i, j in overlap[:max_witnesses]
        ]

    count = rasterize_count(cubes, grid)
    region = cover.source.member
    wrong = (count != region.astype(int))
    layer = binary_dilation(region) & ~binary_erosion(region, border_value=1)
    coverage = not np.any(wrong & ~layer)
    if wrong.any():
        wit["coverage"] = [
            {"cell": [int(v) for v in ix], "times_covered": int(count[tuple(ix)]), "in_region": bool(region[tuple(ix)])}
            for ix in np.argwhere(wrong)[:max_witnesses]
        ]

    lo_s, hi_s = cover.bracket
    index = _ComplementIndex(cover.source)
    bad_bracket = []
    ratios = []
    dists = index.distances(cubes)
    for k, (c, d) in enumerate(zip(cubes, dists)):
        d = float(d)
        ratios.append(d / c.side)
        if not (lo_s * c.side - h <= d <= hi_s * c.side + h):
            bad_bracket.append({"cube": k, **_cube_dict(c), "distance": d,
                                "bracket": [lo_s * c.side, hi_s * c.side]})
    bracket_ok = not bad_bracket
    if bad_bracket:
        wit["dist_bracket"] = bad_bracket[:max_witnesses]

    sides = np.array([c.side for c in cubes])
    bad_ratio = []
    for i, j in touch:
        q = sides[i] / sides[j]
        if not 0.25 - 1e-12 <= q <= 4 + 1e-12:
            bad_ratio.append({"pair": [int(i), int(j)], "ratio": float(q)})
    ratio_ok = not bad_ratio
    if bad_ratio:
        wit["side_ratio"] = bad_ratio[:max_witnesses]

    neighbors = np.zeros(len(cubes), int)
    np.add.at(neighbors, touch[:, 0], 1)
    np.add.at(neighbors, touch[:, 1], 1)
    limit = 12**n
    over = np.flatnonzero(neighbors > limit)
    touching_ok = over.size == 0
    if over.size:
        wit["touching_neighbors"] = [{"cube": int(k), "neighbors": int(neighbors[k]), "limit": limit}
                                     for k in over[:max_witnesses]]

    measured = {
        "dist_over_side_min": float(min(ratios)) if ratios else None,
        "dist_over_side_max": float(max(ratios)) if ratios else None,
        "bracket_side_units": [lo_s, hi_s],
        "touching_pairs": int(len(touch)),
    }
    return WhitneyReport(disjoint, coverage, bracket_ok, ratio_ok, touching_ok, h, len(cubes),
                         int(neighbors.max(initial=0)), wit, measured)


def _cube_dict(c: Cube) -> dict:
    return {"center": list(c.center), "side": c.side}


# -- exact rasterization of cube unions ---------------------------------------------------


def union_coverage(cubes: Sequence[Cube], grid: Grid) -> SampledField:
    """Fraction of each cell covered by the union of the cubes (exact, clipped to the box)."""
    n, h = grid.dim, grid.spacing
    cover = np.zeros(grid.shape)
    if not cubes:
        return SampledField(grid, cover)
    lo = np.array([c.lower for c in cubes])
    hi = np.array([c.upper for c in cubes])
    lo = np.clip(lo, grid.lo, grid.hi)
    hi = np.clip(hi, grid.lo, grid.hi)
    keep = np.all(hi > lo, axis=1)
    lo, hi = lo[keep], hi[keep]
    if not len(lo):
        return SampledField(grid, cover)
    breaks = []
    for ax in range(n):
        edges = grid.lo[ax] + np.arange(grid.cells_per_axis + 1) * h
        breaks.append(np.unique(np.concatenate([edges, lo[:, ax], hi[:, ax]])))
    diff = np.zeros(tuple(len(b) for b in breaks), dtype=np.int64)
    pos_lo = [np.searchsorted(breaks[ax], lo[:, ax]) for ax in range(n)]
    pos_hi = [np.searchsorted(breaks[ax], hi[:, ax]) for ax in range(n)]
    if n == 1:
        np.add.at(diff, pos_lo[0], 1)
        np.add.at(diff, pos_hi[0], -1)
        covered = np.cumsum(diff)[:-1] > 0
    else:
        np.add.at(diff, (pos_lo[0], pos_lo[1]), 1)
        np.add.at(diff, (pos_hi[0], pos_lo[1]), -1)
        np.add.at(diff, (pos_lo[0], pos_hi[1]), -1)
        np.add.at(diff, (pos_hi[0], pos_hi[1]), 1)
        covered = np.cumsum(np.cumsum(diff, axis=0), axis=1)[:-1, :-1] > 0
    widths = [np.diff(b) for b in breaks]
    mids = [(b[:-1] + b[1:]) / 2 for b in breaks]
    cell = [np.clip(((m - grid.lo[ax]) // h).astype(int), 0, grid.cells_per_axis - 1) for ax, m in enumerate(mids)]
    if n == 1:
        np.add.at(cover, cell[0], widths[0] * covered)
    else:
        area = np.outer(widths[0], widths[1]) * covered
        I, J = np.meshgrid(cell[0], cell[1], indexing="ij")
        np.add.at(cover, (I, J), area)
    return SampledField(grid, np.clip(cover / h**n, 0.0, 1.0))


def union_measure(cubes: Sequence[Cube], grid: Grid) -> float:
    return float(union_coverage(cubes, grid).values.sum() * grid.cell_volume)


def doubling_union_check(cubes: Sequence[Cube], a: float, grid: Grid, constant: float | None = None) -> dict:
    """|union Q(x_j, a r_j)| <= C |union Q(x_j, r_j)| with C = a^n for Lebesgue measure.

    Unions are rasterized exactly onto the grid. ``constant`` overrides a^n
    (used to exercise the failure path).
    """
    if not a > 1:
        raise ValueError(f"dilation factor must exceed 1, got {a}")
    dil = [c.scaled(a) for c in cubes]
    if not all(c.fits(grid) for c in dil):
        raise ValueError("dilated cubes must fit inside the grid box")
    n, h = grid.dim, grid.spacing
    C = a**n if constant is None else float(constant)
    lhs = union_measure(dil, grid)
    base = union_measure(cubes, grid)
    rhs = C * base
    perimeter = sum(2 * n * c.side ** (n - 1) for c in cubes)
    eps = 4 * h * perimeter / rhs if rhs > 0 else 0.0
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs * (1 + eps)), "slack": eps, "constant": C,
            "ratio": lhs / rhs if rhs > 0 else np.inf}
