"""Uniform grids on square boxes in R^n (n = 1, 2), sampled fields and region masks.

Every integral in the package is a midpoint rule on cell centers: a field
holds one value per cell and ``integrate`` returns ``sum(values) * h**n``.
Values are stored as n-dimensional arrays of shape ``grid.shape`` (row-major,
axis 0 first).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class GridError(ValueError):
    """Raised when a grid, field or mask violates its construction constraints."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    dim: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lo) != self.dim or len(self.hi) != self.dim:
            raise GridError("lo and hi must have one entry per axis")
        if self.cells_per_axis < 2:
            raise GridError(f"cells_per_axis must be >= 2, got {self.cells_per_axis}")
        sides = np.subtract(self.hi, self.lo)
        if np.any(sides <= 0):
            raise GridError("hi must exceed lo on every axis")
        if not np.allclose(sides, sides[0], rtol=1e-12, atol=0.0):
            raise GridError(f"box must be square (equal side on all axes), got sides {tuple(sides)}")

    @property
    def side(self) -> float:
        return float(self.hi[0] - self.lo[0])

    @property
    def spacing(self) -> float:
        return self.side / self.cells_per_axis

    h = spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def diameter(self) -> float:
        return self.side * np.sqrt(self.dim)

    def axis(self, i: int = 0) -> np.ndarray:
        """Cell-center coordinates along axis ``i``."""
        return self.lo[i] + (np.arange(self.cells_per_axis) + 0.5) * self.spacing

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.axis(i) for i in range(self.dim)), indexing="ij"))

    def centers(self) -> np.ndarray:
        """All cell centers as a ``(cell_count, dim)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def offsets(self) -> np.ndarray:
        """Displacement vectors ``k*h`` for ``k`` in ``[-(N-1), N-1]^n``; shape ``(2N-1,)*n + (n,)``."""
        k = np.arange(-(self.cells_per_axis - 1), self.cells_per_axis) * self.spacing
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"), axis=-1)

    def offset_norms(self) -> np.ndarray:
        return np.linalg.norm(self.offsets(), axis=-1)

    def lattice_sq(self) -> np.ndarray:
        """Integer ``|k|^2`` for ``k`` in ``[-(N-1), N-1]^n`` (offsets in units of h)."""
        k = np.arange(-(self.cells_per_axis - 1), self.cells_per_axis)
        return sum(m**2 for m in np.meshgrid(*([k] * self.dim), indexing="ij"))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.lo, self.hi, self.cells_per_axis * factor)

    def doubled_box(self) -> "Grid":
        """Same spacing, box side doubled about the same center."""
        c = np.add(self.lo, self.hi) / 2
        half = self.side
        return Grid(self.dim, tuple(c - half), tuple(c + half), self.cells_per_axis * 2)

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing ``point`` (clipped to the grid)."""
        idx = np.floor((np.asarray(point, float) - np.asarray(self.lo)) / self.spacing).astype(int)
        return tuple(np.clip(idx, 0, self.cells_per_axis - 1))

    def sample(self, fn: Callable[..., np.ndarray]) -> "SampledField":
        """Evaluate ``fn(*mesh)`` at the cell centers."""
        return SampledField(self, np.broadcast_to(fn(*self.mesh()), self.shape))

    def zeros(self) -> "SampledField":
        return SampledField(self, np.zeros(self.shape))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "lo": list(self.lo),
            "hi": list(self.hi),
            "cells_per_axis": self.cells_per_axis,
            "spacing": self.spacing,
        }


def make_grid(dim: int, lo, hi, cells_per_axis: int) -> Grid:
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    return Grid(int(dim), lo, hi, int(cells_per_axis))


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.cell_count:
            raise GridError(f"expected {self.grid.cell_count} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values)

    def _check(self, other: "SampledField"):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledField):
            self._check(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, SampledField):
            self._check(other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, c):
        if isinstance(c, SampledField):
            self._check(c)
            return self.with_values(self.values * c.values)
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def abs(self) -> "SampledField":
        return self.with_values(np.abs(self.values))

    def restricted(self, mask: "RegionMask") -> "SampledField":
        """The field times the indicator of ``mask``."""
        return self.with_values(np.where(mask.member, self.values, 0.0))

    def support(self) -> "RegionMask":
        return RegionMask(self.grid, self.values != 0)


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: Grid
    member: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.member, dtype=bool)
        if m.size != self.grid.cell_count:
            raise GridError(f"expected {self.grid.cell_count} mask entries, got {m.size}")
        object.__setattr__(self, "member", _freeze(m.reshape(self.grid.shape)))

    @property
    def count(self) -> int:
        return int(self.member.sum())

    def measure(self) -> float:
        return self.count * self.grid.cell_volume

    def is_empty(self) -> bool:
        return not self.member.any()

    def is_full(self) -> bool:
        return bool(self.member.all())

    def __or__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.member | other.member)

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.member & other.member)

    def __invert__(self) -> "RegionMask":
        return RegionMask(self.grid, ~self.member)

    def __sub__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.member & ~other.member)

    def issubset(self, other: "RegionMask") -> bool:
        return not np.any(self.member & ~other.member)

    def indicator(self) -> SampledField:
        return SampledField(self.grid, self.member.astype(float))

    def __eq__(self, other):
        return (
            isinstance(other, RegionMask)
            and other.grid == self.grid
            and np.array_equal(other.member, self.member)
        )

    __hash__ = None


def integrate(f: SampledField) -> float:
    return float(f.values.sum() * f.grid.cell_volume)


def norm(f: SampledField, p) -> float:
    if p in (np.inf, "inf", "∞"):
        return float(np.abs(f.values).max(initial=0.0))
    if p == 1:
        return float(np.abs(f.values).sum() * f.grid.cell_volume)
    if p == 2:
        return float(np.sqrt((f.values**2).sum() * f.grid.cell_volume))
    raise ValueError(f"p must be 1, 2 or inf, got {p!r}")


def superlevel_mask(f: SampledField, rho: float) -> RegionMask:
    """Cells where ``|f| > rho`` (strict)."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return RegionMask(f.grid, np.abs(f.values) > rho)


def superlevel_measure(f: SampledField, rho: float) -> float:
    return superlevel_mask(f, rho).measure()


def distribution_function(f: SampledField, rhos) -> np.ndarray:
    """``superlevel_measure`` evaluated on an array of levels in one pass."""
    rhos = np.asarray(rhos, dtype=float)
    if np.any(rhos <= 0):
        raise ValueError("all levels must be positive")
    a = np.sort(np.abs(f.values).ravel())
    above = a.size - np.searchsorted(a, rhos, side="right")
    return above * f.grid.cell_volume
