"""psi_t f on the upper half-space, the cone square function, g*_lambda and M.

The scale variable t runs over a geometric ladder t_j = t_min 2^(j/m); the
measure dt/t^(n+1) becomes the weight ``w_j / t_j^(n+1)`` with
``w_j = t_j ln 2 / m`` (midpoint rule in log t). f is extended by zero outside
the box and the spatial variable y runs over cell centers of the box.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import fftconvolve

from .grid import Grid, RegionMask, SampledField
from .kernel import KernelSpec

# points exactly on a sphere |k| = s are outside the open ball
_STRICT = 1.0 - 1e-12


@dataclass(frozen=True)
class TLadder:
    t_min: float
    t_max: float
    levels_per_octave: int = 8

    def __post_init__(self):
        if not self.t_min > 0:
            raise ValueError(f"t_min must be positive, got {self.t_min}")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.levels_per_octave < 1:
            raise ValueError("levels_per_octave must be >= 1")

    @cached_property
    def values(self) -> np.ndarray:
        m = self.levels_per_octave
        count = int(np.floor(m * np.log2(self.t_max / self.t_min) + 1e-9)) + 1
        return self.t_min * 2.0 ** (np.arange(count) / m)

    @property
    def weights(self) -> np.ndarray:
        return self.values * np.log(2.0) / self.levels_per_octave

    @property
    def ratio(self) -> float:
        return 2.0 ** (1.0 / self.levels_per_octave)

    def __len__(self):
        return len(self.values)

    def with_t_max(self, t_max: float) -> "TLadder":
        return TLadder(self.t_min, t_max, self.levels_per_octave)

    def describe(self) -> dict:
        return {"t_min": float(self.t_min), "t_max": float(self.t_max), "levels_per_octave": self.levels_per_octave,
                "levels": len(self)}


def default_ladder(grid: Grid, levels_per_octave: int = 8, t_min=None, t_max=None) -> TLadder:
    """t_min = h and t_max = box diameter unless given."""
    return TLadder(float(grid.spacing if t_min is None else t_min),
                   float(grid.diameter if t_max is None else t_max),
                   levels_per_octave)


@dataclass(frozen=True, eq=False)
class UpperHalfField:
    grid: Grid
    ladder: TLadder
    values: np.ndarray = field(repr=False)  # shape (levels,) + grid.shape

    def __post_init__(self):
        v = np.asarray(self.values, float)
        expected = (len(self.ladder),) + self.grid.shape
        if v.shape != expected:
            raise ValueError(f"expected shape {expected}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("upper half-space values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def energy(self) -> np.ndarray:
        return self.values**2


@dataclass(frozen=True)
class ConeSpec:
    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError(f"cone aperture must be >= 1, got {self.alpha}")


def psi_transform(spec: KernelSpec, f: SampledField, ladder: TLadder) -> UpperHalfField:
    """psi_t f(y) = t^-n sum_z psi(y/t, z/t) f(z) h^n at every cell center and ladder level."""
    grid = f.grid
    if spec.dim != grid.dim:
        raise ValueError(f"kernel dimension {spec.dim} does not match grid dimension {grid.dim}")
    n, h = grid.dim, grid.spacing
    out = np.zeros((len(ladder),) + grid.shape)
    if not np.any(f.values):
        return UpperHalfField(grid, ladder, out)
    if spec.is_convolution:
        off = grid.offsets()
        for j, t in enumerate(ladder.values):
            ker = spec.profile(off / t) * (h / t) ** n
            out[j] = fftconvolve(f.values, ker, mode="same")
    else:
        pts = grid.centers()
        fv = f.values.ravel()
        nz = np.flatnonzero(fv)
        src, fv = pts[nz], fv[nz]
        for j, t in enumerate(ladder.values):
            col = np.empty(len(pts))
            for s in range(0, len(pts), 512):
                block = spec.evaluate(pts[s : s + 512, None, :] / t, src[None, :, :] / t)
                col[s : s + 512] = block @ fv
            out[j] = (col * (h / t) ** n).reshape(grid.shape)
    return UpperHalfField(grid, ladder, out)


def _level_scale(grid: Grid, ladder: TLadder) -> np.ndarray:
    n = grid.dim
    return grid.cell_volume * ladder.weights / ladder.values ** (n + 1)


def ball_footprint(grid: Grid, radius: float) -> np.ndarray:
    """Indicator of offsets k with |k| h < radius over the ``(2N-1)^n`` offset window."""
    s = radius / grid.spacing
    return (grid.lattice_sq() < s * s * _STRICT).astype(float)


def _accumulate(field: UpperHalfField, kernel_for_t) -> np.ndarray:
    grid = field.grid
    scale = _level_scale(grid, field.ladder)
    acc = np.zeros(grid.shape)
    energy = field.energy()
    for j, t in enumerate(field.ladder.values):
        e = energy[j]
        if not e.any():
            continue
        acc += scale[j] * fftconvolve(e, kernel_for_t(t), mode="same")
    return np.sqrt(np.clip(acc, 0.0, None))


def square_function(field: UpperHalfField, cone: ConeSpec | float = 1.0) -> SampledField:
    """S_alpha f(x): sum of |psi_t f(y)|^2 over cell centers y with |x - y| < alpha t."""
    alpha = cone.alpha if isinstance(cone, ConeSpec) else ConeSpec(float(cone)).alpha
    grid = field.grid
    return SampledField(grid, _accumulate(field, lambda t: ball_footprint(grid, alpha * t)))


def square_functions(field: UpperHalfField, alphas: Sequence[float]) -> dict[float, SampledField]:
    return {float(a): square_function(field, ConeSpec(float(a))) for a in alphas}


def g_star(field: UpperHalfField, lam: float) -> SampledField:
    """g*_lambda f(x): every (y, t) weighted by (t / (t + |x - y|))^(n lambda)."""
    if not lam > 1:
        raise ValueError(f"g* needs lambda > 1, got {lam}")
    grid = field.grid
    dist = grid.offset_norms()
    p = grid.dim * lam
    return SampledField(grid, _accumulate(field, lambda t: (t / (t + dist)) ** p))


def s_alpha_series_majorant(field: UpperHalfField, lam: float, K: int) -> SampledField:
    """sum_{k=0}^{K} 2^(-k lambda n / 2) S_{2^k} f."""
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    if K < 0:
        raise ValueError("K must be >= 0")
    n = field.grid.dim
    total = np.zeros(field.grid.shape)
    for k in range(K + 1):
        total += 2.0 ** (-k * lam * n / 2) * square_function(field, ConeSpec(2.0**k)).values
    return SampledField(field.grid, total)


# -- Hardy-Littlewood maximal operator ---------------------------------------------------


def _half_widths(s: float, m: int) -> np.ndarray:
    """For row offsets i in [-m, m], the largest k with i^2 + k^2 < s^2 (or -1)."""
    i = np.arange(-m, m + 1)
    rem = s * s * _STRICT - i * i
    w = np.full(i.shape, -1)
    pos = rem > 0
    k = np.floor(np.sqrt(rem[pos])).astype(int)
    k[k * k >= rem[pos]] -= 1
    w[pos] = k
    return w


def _radius_index(s: float) -> int:
    """Largest integer k >= 0 with k^2 < s^2, or -1."""
    return int(_half_widths(s, 0)[0])


def lattice_ball_count(dim: int, s: float) -> int:
    """Number of integer points k with |k| < s."""
    if dim == 1:
        return 2 * _radius_index(s) + 1 if _radius_index(s) >= 0 else 0
    w = _half_widths(s, max(int(np.ceil(s)), 0))
    return int(np.sum(2 * w[w >= 0] + 1))


def default_radii(grid: Grid) -> np.ndarray:
    """Every distinct centered interval in 1-D; a 2^(1/8) geometric ladder in 2-D."""
    h = grid.spacing
    if grid.dim == 1:
        return (np.arange(grid.cells_per_axis + 1) + 0.5) * h
    top = grid.diameter + h
    count = int(np.ceil(8 * np.log2(top / h))) + 1
    return h * 2.0 ** (np.arange(count) / 8)


def ladder_radii(ladder: TLadder, factors: Iterable[float] = (1.0,)) -> np.ndarray:
    return np.unique(np.concatenate([ladder.values * a for a in factors]))


def maximal_function(source: RegionMask | SampledField, radii=None) -> SampledField:
    """Uncentered maximal function over balls B(y, r) with y a cell center and r in ``radii``.

    A ball is the set of lattice points with |c - y| < r; the average divides by
    the full lattice count of the ball (values outside the box are zero). The
    result is a lower bound of the continuum supremum.
    """
    grid = source.grid
    if isinstance(source, RegionMask):
        vals = source.member.astype(float)
        exact = True
    else:
        vals = np.abs(source.values)
        exact = False
    radii = default_radii(grid) if radii is None else np.atleast_1d(np.asarray(radii, float))
    h, N = grid.spacing, grid.cells_per_axis
    best = np.zeros(grid.shape)
    if not vals.any():
        return SampledField(grid, best)
    seen = set()
    if grid.dim == 1:
        csum = np.concatenate([[0.0], np.cumsum(vals)])
        for r in radii:
            m = _radius_index(r / h)  # |k| <= m
            if m < 0 or m in seen:
                continue
            seen.add(m)
            idx = np.arange(N)
            hi = np.minimum(idx + m + 1, N)
            lo = np.maximum(idx - m, 0)
            avg = (csum[hi] - csum[lo]) / (2 * m + 1)
            np.maximum(best, maximum_filter1d(avg, 2 * m + 1, mode="constant", cval=0.0), out=best)
        return SampledField(grid, best)

    sq = grid.lattice_sq()
    for r in radii:
        s = r / h
        m = int(np.ceil(s)) - 1
        w = _half_widths(s, max(m, 0))
        key = tuple(w)
        if m < 0 or key in seen or w.max() < 0:
            continue
        seen.add(key)
        count = int(np.sum(2 * w[w >= 0] + 1))
        fp = (sq < s * s * _STRICT).astype(float)
        sums = fftconvolve(vals, fp, mode="same")
        if exact:
            sums = np.rint(sums)
        avg = np.clip(sums, 0.0, None) / count
        spread = np.zeros(grid.shape)
        rows = {}
        for i, wi in zip(range(-m, m + 1), w):
            if wi < 0 or abs(i) >= N:
                continue
            if wi not in rows:
                rows[wi] = maximum_filter1d(avg, 2 * wi + 1, axis=1, mode="constant", cval=0.0)
            rw = rows[wi]
            # x0 receives centers at rows x0 + i
            if i >= 0:
                np.maximum(spread[: N - i], rw[i:], out=spread[: N - i])
            else:
                np.maximum(spread[-i:], rw[: N + i], out=spread[-i:])
        np.maximum(best, spread, out=best)
    return SampledField(grid, best)


def ball_counts(mask: RegionMask, radius: float) -> tuple[np.ndarray, int]:
    """Per cell center y: number of mask cells in B(y, radius), and the full lattice count."""
    grid = mask.grid
    s = radius / grid.spacing
    if grid.dim == 1:
        m = _radius_index(s)
        if m < 0:
            return np.zeros(grid.shape), 0
        csum = np.concatenate([[0], np.cumsum(mask.member.astype(np.int64))])
        idx = np.arange(grid.cells_per_axis)
        hi = np.minimum(idx + m + 1, grid.cells_per_axis)
        lo = np.maximum(idx - m, 0)
        return (csum[hi] - csum[lo]).astype(float), 2 * m + 1
    fp = ball_footprint(grid, radius)
    inside = np.rint(fftconvolve(mask.member.astype(float), fp, mode="same"))
    return inside, lattice_ball_count(2, s)
