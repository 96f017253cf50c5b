"""Good/bad splitting of a nonnegative field at level rho and the weak-type accounting.

Omega = {f > rho} is Whitney-decomposed (bracket 6 sqrt(n) diam .. 24 sqrt(n) diam
by default); g = f on the complement of Omega and b_i = f on each cube Q_i.
Each bad piece is compensated by rho times the indicator of the cube
E_i = Q(c_i, r_i) with r_i^n = a_i / rho, so b_i - rho 1_{E_i} has mean zero.
Cube indicators are rasterized by exact cell-overlap fractions, which keeps
the mean-zero identity exact on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import RegionMask, SampledField, integrate, norm, superlevel_mask
from .kernel import KernelSpec
from .operators import TLadder, psi_transform, square_function
from .whitney import Cube, WhitneyCover, union_coverage, whitney_decompose

SECTION4_BRACKET = (6.0, 24.0)  # times sqrt(n) diam


class EmptySuperlevelSet(ValueError):
    """f <= rho everywhere: the split is pure good part."""

    def __init__(self, f: SampledField, rho: float):
        super().__init__(f"no cell exceeds rho = {rho}; f is its own good part")
        self.good = f


@dataclass(frozen=True, eq=False)
class BadPart:
    """f restricted to one Whitney cube, stored as the block of cells under the cube."""

    cube: Cube
    index: tuple[slice, ...]
    block: np.ndarray = field(repr=False)
    grid: object = field(repr=False)

    @property
    def mass(self) -> float:
        return float(self.block.sum() * self.grid.cell_volume)

    @property
    def field(self) -> SampledField:
        v = np.zeros(self.grid.shape)
        v[self.index] = self.block
        return SampledField(self.grid, v)


@dataclass(frozen=True, eq=False)
class GoodBadSplit:
    f: SampledField = field(repr=False)
    rho: float
    good: SampledField = field(repr=False)
    bad_parts: tuple[BadPart, ...]
    omega: RegionMask = field(repr=False)
    cover: WhitneyCover = field(repr=False)

    @cached_property
    def bad(self) -> SampledField:
        v = np.zeros(self.f.grid.shape)
        for p in self.bad_parts:
            v[p.index] += p.block
        return SampledField(self.f.grid, v)

    def invariants(self) -> dict:
        """The split properties with measured values; ``boundary_slack`` is one cell layer of Omega."""
        f, g = self.f, self.good
        grid = f.grid
        recon = np.max(np.abs(g.values + self.bad.values - f.values), initial=0.0)
        cube_measure = sum(p.cube.volume for p in self.bad_parts)
        l1 = norm(f, 1)
        slack = _boundary_cells(self.omega) * grid.cell_volume
        return {
            "reconstruction_error": float(recon),
            "reconstruction_ok": bool(recon == 0.0),
            "good_sup": norm(g, np.inf),
            "good_sup_ok": bool(norm(g, np.inf) <= self.rho),
            "cube_measure": cube_measure,
            "cube_measure_bound": l1 / self.rho + slack,
            "cube_measure_ok": bool(cube_measure <= l1 / self.rho + slack),
            "bad_l1": norm(self.bad, 1),
            "bad_l1_ok": bool(norm(self.bad, 1) <= l1 * (1 + 1e-12)),
            "bad_parts": len(self.bad_parts),
        }


def _boundary_cells(mask: RegionMask) -> int:
    from scipy.ndimage import binary_erosion

    m = mask.member
    return int((m & ~binary_erosion(m, border_value=0)).sum())


def good_bad_split(f: SampledField, rho: float, dist_lo: float | None = None, dist_hi: float | None = None,
                   convention: str = "diam") -> GoodBadSplit:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if np.any(f.values < 0):
        raise ValueError("f must be nonnegative")
    omega = superlevel_mask(f, rho)
    if omega.is_empty():
        raise EmptySuperlevelSet(f, rho)
    if omega.is_full():
        raise ValueError("f exceeds rho on the whole box; enlarge the box")
    grid = f.grid
    lo, hi = SECTION4_BRACKET if dist_lo is None else (dist_lo, dist_hi)
    root_n = np.sqrt(grid.dim)
    cover = whitney_decompose(omega, lo * root_n, hi * root_n, convention)
    parts = []
    for q in cover.cubes:
        start = np.asarray(grid.index_of(q.lower + grid.spacing / 2))
        size = int(round(q.side / grid.spacing))
        index = tuple(slice(s, s + size) for s in start)
        parts.append(BadPart(q, index, np.array(f.values[index]), grid))
    good = f.restricted(~omega)
    return GoodBadSplit(f, float(rho), good, tuple(parts), omega, cover)


@dataclass(frozen=True)
class EEntry:
    mass: float
    radius: float
    cube: Cube | None
    clipped: bool


@dataclass(frozen=True, eq=False)
class EFamily:
    rho: float
    entries: tuple[EEntry, ...]
    coverage: SampledField = field(repr=False)  # fraction of each cell inside E
    star_coverage: SampledField = field(repr=False)
    enlargement: float

    @property
    def cubes(self) -> list[Cube]:
        return [e.cube for e in self.entries if e.cube is not None]

    @property
    def E_union(self) -> RegionMask:
        return RegionMask(self.coverage.grid, self.coverage.values > 0)

    @property
    def E_star(self) -> RegionMask:
        """Cells whose centers lie in some enlarged cube Q(c_i, 6n r_i)."""
        grid = self.coverage.grid
        pts = grid.centers()
        m = np.zeros(grid.cell_count, bool)
        for q in self.cubes:
            m |= q.scaled(self.enlargement).contains_points(pts)
        return RegionMask(grid, m.reshape(grid.shape))

    def measure(self) -> float:
        return integrate(self.coverage)

    def indicator(self, i: int) -> SampledField:
        e = self.entries[i]
        grid = self.coverage.grid
        if e.cube is None:
            return grid.zeros()
        return union_coverage([e.cube], grid)


def build_e_family(split: GoodBadSplit, enlargement: float | None = None, radius_scale: float = 1.0) -> EFamily:
    """E_i = Q(c_i, r_i), r_i = (a_i / rho)^(1/n); ``radius_scale`` perturbs r_i (failure fixtures only)."""
    grid = split.f.grid
    n = grid.dim
    entries = []
    for p in split.bad_parts:
        a = p.mass
        if a <= 0:
            entries.append(EEntry(0.0, 0.0, None, False))
            continue
        r = radius_scale * (a / split.rho) ** (1.0 / n)
        q = Cube(p.cube.center, r)
        entries.append(EEntry(a, r, q, not q.fits(grid)))
    k = 6.0 * n if enlargement is None else float(enlargement)
    cubes = [e.cube for e in entries if e.cube is not None]
    cov = union_coverage(cubes, grid)
    star = union_coverage([q.scaled(k) for q in cubes], grid)
    return EFamily(split.rho, tuple(entries), cov, star, k)


def mean_zero_residuals(split: GoodBadSplit, family: EFamily) -> np.ndarray:
    """|integral(b_i - rho 1_{E_i})| / a_i for every bad part with positive mass."""
    out = []
    for i, (p, e) in enumerate(zip(split.bad_parts, family.entries)):
        if e.cube is None:
            continue
        resid = p.mass - split.rho * integrate(family.indicator(i))
        out.append(abs(resid) / e.mass)
    return np.asarray(out)


@dataclass
class AccountingReport:
    rho: float
    I: float
    II: float
    III: float
    good_term: float
    distribution: float
    l1: float
    grid: dict
    kernel: dict
    ladder: dict
    bad_parts: int = 0
    omega_measure: float = 0.0
    E_measure: float = 0.0

    @property
    def total(self) -> float:
        return self.I + self.II + self.III

    @property
    def bound(self) -> float:
        """good + I + II + III, which dominates |{S f > rho}| on the grid."""
        return self.good_term + self.total

    @property
    def ratio(self) -> float:
        return self.total * self.rho / self.l1 if self.l1 > 0 else 0.0

    @property
    def decomposition_ok(self) -> bool:
        return self.distribution <= self.bound + 1e-12

    def to_dict(self) -> dict:
        return {
            "rho": self.rho, "I": self.I, "II": self.II, "III": self.III, "total": self.total,
            "good_term": self.good_term, "distribution": self.distribution, "bound": self.bound,
            "ratio": self.ratio, "decomposition_ok": self.decomposition_ok, "bad_parts": self.bad_parts,
            "omega_measure": self.omega_measure, "E_measure": self.E_measure,
            "grid": self.grid, "kernel": self.kernel, "ladder": self.ladder,
        }


def weak_type_accounting(f: SampledField, rho: float, kernel: KernelSpec, ladder: TLadder,
                         c2: float = 1.0, C2: float = 1.0) -> AccountingReport:
    """Measure the terms of the good/bad weak-type argument for S_1 at level rho.

    good = |{S g >= rho/(2 sqrt c2)}|, I = |Omega u E*|,
    II = |{x outside Omega u E*: S(b - rho 1_E) >= rho/(4 sqrt C2)}|,
    III = |{S 1_E >= 1/(4 sqrt C2)}|.
    """
    grid = f.grid
    S = lambda u: square_function(psi_transform(kernel, u, ladder), 1.0).values
    Sf = S(f)
    dist = float((Sf > rho).sum() * grid.cell_volume)
    common = dict(grid=grid.describe(), kernel=kernel.describe(), ladder=ladder.describe())
    try:
        split = good_bad_split(f, rho)
    except EmptySuperlevelSet:
        good_term = float((Sf >= rho / (2 * np.sqrt(c2))).sum() * grid.cell_volume)
        return AccountingReport(rho, 0.0, 0.0, 0.0, good_term, dist, norm(f, 1), **common)
    fam = build_e_family(split)
    vol = grid.cell_volume
    Sg = S(split.good)
    outside = ~(split.omega | fam.E_star).member
    resid = split.bad - rho * fam.coverage
    S_res = S(resid)
    S_E = S(fam.coverage)
    good_term = float((Sg >= rho / (2 * np.sqrt(c2))).sum() * vol)
    I = float((~outside).sum() * vol)
    II = float(((S_res >= rho / (4 * np.sqrt(C2))) & outside).sum() * vol)
    III = float((S_E >= 1 / (4 * np.sqrt(C2))).sum() * vol)
    return AccountingReport(rho, I, II, III, good_term, dist, norm(f, 1), bad_parts=len(split.bad_parts),
                            omega_measure=split.omega.measure(), E_measure=fam.measure(), **common)


def mean_zero_tail_check(kernel: KernelSpec, c, r: float, f_on_cube: SampledField, ladder: TLadder,
                         mean_tol: float = 1e-8, require_mean_zero: bool = True) -> tuple[float, float]:
    """(tail L1 of S_1 f outside Q(c, 6nr), that tail divided by ||f||_1)."""
    grid = f_on_cube.grid
    n = grid.dim
    c = np.atleast_1d(np.asarray(c, float))
    if not r > 0:
        raise ValueError("r must be positive")
    l1 = norm(f_on_cube, 1)
    if l1 == 0:
        return 0.0, 0.0
    pts = grid.centers()
    home = Cube(tuple(c), r)
    nz = f_on_cube.values.ravel() != 0
    if not np.all(home.contains_points(pts[nz])):
        raise ValueError("f is not supported in Q(c, r)")
    mean = integrate(f_on_cube)
    if require_mean_zero and abs(mean) > mean_tol * l1:
        raise ValueError(f"f must have mean zero: integral {mean:.3e} vs tolerance {mean_tol * l1:.3e}")
    S1 = square_function(psi_transform(kernel, f_on_cube, ladder), 1.0).values.ravel()
    tail = ~home.scaled(6 * n * 1.0).contains_points(pts, closed=True)
    tail_l1 = float(S1[tail].sum() * grid.cell_volume)
    return tail_l1, tail_l1 / l1
