"""Nonnegative test functions defined in continuous coordinates.

Each member is a callable on mesh arrays, so the same function can be sampled
on a grid and on its refinement. ``sample`` rescales to unit L1 mass on the
grid it is sampled on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid, SampledField, norm

DEFAULT_BOX = {1: (-8.0, 8.0), 2: (-4.0, 4.0)}


@dataclass(frozen=True)
class TestFunction:
    name: str
    kind: str
    fn: Callable = None

    __test__ = False  # not a pytest class

    def sample(self, grid: Grid, normalize: bool = True) -> SampledField:
        v = np.broadcast_to(self.fn(*grid.mesh()), grid.shape).astype(float)
        f = SampledField(grid, v)
        if normalize:
            m = norm(f, 1)
            if m == 0:
                raise ValueError(f"{self.name} vanishes on this grid")
            f = f * (1.0 / m)
        return f


def _r2(center, coords):
    return sum((x - c) ** 2 for x, c in zip(coords, center))


def spike(center, width, dim):
    c = tuple(center)
    return lambda *x: np.exp(-_r2(c, x) / width**2)


def box_indicator(center, side, dim):
    c = tuple(center)
    return lambda *x: np.prod([np.abs(xi - ci) < side / 2 for xi, ci in zip(x, c)], axis=0).astype(float)


def ball_indicator(center, radius, dim):
    c = tuple(center)
    return lambda *x: (_r2(c, x) < radius**2).astype(float)


def bump_mixture(centers, widths, heights):
    parts = [(tuple(c), w, a) for c, w, a in zip(centers, widths, heights)]
    return lambda *x: sum(a * np.exp(-_r2(c, x) / w**2) for c, w, a in parts)


def random_bump_mixture(rng: np.random.Generator, dim: int, count: int, spread: float = 2.0):
    centers = rng.uniform(-spread, spread, size=(count, dim))
    widths = rng.uniform(0.15, 0.8, size=count)
    heights = rng.uniform(0.5, 2.0, size=count)
    return bump_mixture(centers, widths, heights)


def standard_family(dim: int, seed: int = 0) -> list[TestFunction]:
    """Twelve functions: four spikes, four indicators, four bump mixtures."""
    rng = np.random.default_rng(seed)
    o = (0.0,) * dim
    e = (1.0,) + (0.0,) * (dim - 1)
    fam = [
        TestFunction("spike_w0.05", "spike", spike(o, 0.05, dim)),
        TestFunction("spike_w0.1_offset", "spike", spike(e, 0.1, dim)),
        TestFunction("spike_w0.2", "spike", spike(o, 0.2, dim)),
        TestFunction("spike_pair", "spike", bump_mixture([o, tuple(-2 * v for v in e)], [0.05, 0.08], [1.0, 0.5])),
        TestFunction("indicator_cube_1", "indicator", box_indicator(o, 1.0, dim)),
        TestFunction("indicator_cube_0.25", "indicator", box_indicator(e, 0.25, dim)),
        TestFunction("indicator_ball_1.5", "indicator", ball_indicator(o, 1.5, dim)),
        TestFunction("indicator_two_cubes", "indicator",
                     lambda *x, a=box_indicator(e, 0.5, dim), b=box_indicator(tuple(-v for v in e), 1.0, dim):
                     a(*x) + 2 * b(*x)),
    ]
    for k in range(4):
        fam.append(TestFunction(f"bumps_{k}", "bump_mixture", random_bump_mixture(rng, dim, 3 + k)))
    return fam


def bump_family(dim: int, seed: int = 0, count: int = 6) -> list[TestFunction]:
    rng = np.random.default_rng(seed + 1000)
    return [TestFunction(f"bumps_{k}", "bump_mixture", random_bump_mixture(rng, dim, 2 + k % 4))
            for k in range(count)]


def family_by_name(name: str, dim: int, seed: int = 0) -> list[TestFunction]:
    if name == "standard":
        return standard_family(dim, seed)
    if name == "bumps":
        return bump_family(dim, seed)
    if name == "spikes":
        return [f for f in standard_family(dim, seed) if f.kind == "spike"]
    if name == "indicators":
        return [f for f in standard_family(dim, seed) if f.kind == "indicator"]
    raise ValueError(f"unknown family {name!r}; expected standard, bumps, spikes or indicators")


class GridSpike:
    """Unit-mass spike whose width is a fixed number of cells (so it sharpens under refinement)."""

    kind = "grid_spike"

    def __init__(self, center, width_cells: float = 2.0):
        self.center = tuple(center)
        self.width_cells = width_cells
        self.name = f"grid_spike_{width_cells}h"

    def sample(self, grid: Grid, normalize: bool = True) -> SampledField:
        w = self.width_cells * grid.spacing
        return TestFunction(self.name, self.kind, spike(self.center, w, grid.dim)).sample(grid, normalize)


def random_region(grid: Grid, rng: np.random.Generator, max_pieces: int):
    """Union of 1..max_pieces random open intervals/rectangles, neither empty nor the whole grid."""
    from .grid import RegionMask

    lo, hi = grid.lo[0], grid.hi[0]
    side = hi - lo
    pts = grid.centers()
    while True:
        k = int(rng.integers(1, max_pieces + 1))
        member = np.zeros(grid.cell_count, dtype=bool)
        for _ in range(k):
            a = rng.uniform(lo, hi - 0.02 * side, size=grid.dim)
            w = rng.uniform(0.01, 0.4, size=grid.dim) * side
            member |= np.all((pts > a) & (pts < a + w), axis=1)
        m = RegionMask(grid, member.reshape(grid.shape))
        if not m.is_empty() and not m.is_full():
            return m


def random_cube_family(grid: Grid, rng: np.random.Generator, a: float, max_count: int = 12):
    """Random cubes whose a-fold dilations stay inside the grid box."""
    from .whitney import Cube

    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    side = grid.side
    count = int(rng.integers(1, max_count + 1))
    cubes = []
    for _ in range(count):
        r = rng.uniform(0.01, 0.15) * side
        margin = a * r / 2
        c = rng.uniform(lo + margin, hi - margin)
        cubes.append(Cube(tuple(c), r))
    return cubes


def _cube_bump(center, r, dim):
    c = np.asarray(center, float)

    def fn(*x):
        s2 = sum(((xi - ci) / (r / 2)) ** 2 for xi, ci in zip(x, c))
        out = np.zeros(np.shape(s2))
        inside = s2 < 1
        out[inside] = np.exp(-1.0 / (1.0 - s2[inside]))
        return out

    return fn


@dataclass(frozen=True)
class MeanZeroInput:
    """p - (int p / int q) q with p, q smooth bumps inside Q(center, side); mean zero on any grid."""

    center: tuple
    side: float
    p_center: tuple
    q_center: tuple
    p_radius: float
    q_radius: float
    zero_mean: bool = True

    def sample(self, grid: Grid) -> SampledField:
        p = grid.sample(_cube_bump(self.p_center, self.p_radius, grid.dim)).values
        q = grid.sample(_cube_bump(self.q_center, self.q_radius, grid.dim)).values
        if not p.any() or not q.any():
            raise ValueError("bumps are narrower than the grid spacing")
        v = p - (p.sum() / q.sum()) * q if self.zero_mean else p
        return SampledField(grid, v)


def mean_zero_inputs(dim: int, count: int, seed: int = 0, side_range=(0.125, 0.25)) -> list[MeanZeroInput]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        r = rng.uniform(*side_range)
        c = rng.uniform(-1.0, 1.0, size=dim)
        rp, rq = rng.uniform(0.25, 0.5, size=2) * r
        # keep both bumps inside the cube
        pc = c + rng.uniform(-1, 1, size=dim) * (r / 2 - rp / 2)
        qc = c + rng.uniform(-1, 1, size=dim) * (r / 2 - rq / 2)
        out.append(MeanZeroInput(tuple(c), r, tuple(pc), tuple(qc), rp, rq))
    return out
