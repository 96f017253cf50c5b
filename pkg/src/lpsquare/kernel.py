"""Kernels psi(x, y) with the size and smoothness decay used throughout.

Built-in kernels are of convolution type, psi(x, y) = phi(x - y) with a
mean-zero profile phi. The implied constants of the size and smoothness
conditions are never inputs; they are measured with deterministic Halton
point sets (nested prefixes, so estimates only grow with ``sample_count``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

BUILTIN_KERNELS = ("gauss_derivative", "mexican_hat", "compact_bump_difference")

DEFAULT_DELTA = {1: 0.4, 2: 0.75}
DEFAULT_GAMMA = 0.5


class KernelError(ValueError):
    """Bad kernel name or parameters."""


class KernelInvalid(ValueError):
    """The kernel produced a non-finite value."""


@dataclass(frozen=True)
class KernelSpec:
    """A kernel on R^n x R^n.

    ``evaluate(x, y)`` takes arrays of shape ``(..., dim)`` and returns shape
    ``(...)``. ``profile`` is set for convolution kernels, in which case
    ``evaluate(x, y) == profile(x - y)`` and the operators use FFT convolution.
    """

    dim: int
    delta: float
    gamma: float
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    label: str = "custom"
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    support_radius: float = np.inf

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise KernelError(f"dim must be 1 or 2, got {self.dim}")
        if not 0 < self.delta < 1:
            raise KernelError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.gamma < 1:
            raise KernelError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def is_convolution(self) -> bool:
        return self.profile is not None

    def describe(self) -> dict:
        return {"label": self.label, "dim": self.dim, "delta": self.delta, "gamma": self.gamma}


def convolution_kernel(profile, dim, delta, gamma, label="custom", support_radius=np.inf) -> KernelSpec:
    def evaluate(x, y):
        return profile(np.asarray(x, float) - np.asarray(y, float))

    return KernelSpec(dim, delta, gamma, evaluate, label, profile, support_radius)


def _sq(u):
    return np.sum(np.asarray(u, float) ** 2, axis=-1)


def _gauss_derivative(u):
    u = np.asarray(u, float)
    return u[..., 0] * np.exp(-_sq(u))


def _mexican_hat(dim):
    def phi(u):
        r2 = _sq(u)
        return (dim - r2) * np.exp(-r2 / 2)

    return phi


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def _bump_difference(dim):
    # integral of 2^n beta(2u) equals integral of beta(u)
    def phi(u):
        r2 = _sq(u)
        return _bump(r2) - 2.0**dim * _bump(4.0 * r2)

    return phi


def builtin_kernel(name: str, dim: int, delta: float | None = None, gamma: float | None = None) -> KernelSpec:
    """One of the three mean-zero convolution kernels.

    For ``dim == 1`` the decay exponent must satisfy ``delta < 1/2``; the tail
    series controlling the mean-zero estimate only converges there.
    """
    if name not in BUILTIN_KERNELS:
        raise KernelError(f"unknown kernel {name!r}; expected one of {BUILTIN_KERNELS}")
    if dim not in (1, 2):
        raise KernelError(f"dim must be 1 or 2, got {dim}")
    delta = DEFAULT_DELTA[dim] if delta is None else float(delta)
    gamma = DEFAULT_GAMMA if gamma is None else float(gamma)
    if dim == 1 and delta >= 0.5:
        raise KernelError(f"built-in kernels in dimension 1 need delta < 1/2, got {delta}")
    if name == "gauss_derivative":
        return convolution_kernel(_gauss_derivative, dim, delta, gamma, name)
    if name == "mexican_hat":
        return convolution_kernel(_mexican_hat(dim), dim, delta, gamma, name)
    return convolution_kernel(_bump_difference(dim), dim, delta, gamma, name, support_radius=1.0)


def zero_kernel(dim: int = 1, delta: float = 0.4, gamma: float = 0.5) -> KernelSpec:
    return convolution_kernel(lambda u: np.zeros(np.shape(u)[:-1]), dim, delta, gamma, "zero")


def _halton(d: int, count: int) -> np.ndarray:
    return qmc.Halton(d, scramble=False).random(count)


def _finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise KernelInvalid(f"kernel produced non-finite values while estimating the {what} constant")
    return values


def estimate_size_constant(spec: KernelSpec, sample_count: int = 4096, radius: float = 10.0) -> float:
    """sup of ``|psi(x,y)| (1+|x-y|)^(n+delta)`` over sampled pairs with ``|x-y| <= radius``."""
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    if not radius > 0:
        raise ValueError("radius must be positive")
    n = spec.dim
    pts = _halton(2 * n, sample_count)
    x = (2.0 * pts[:, :n] - 1.0) * radius
    u = (2.0 * pts[:, n:] - 1.0) * radius
    keep = np.linalg.norm(u, axis=-1) <= radius
    x, u = x[keep], u[keep]
    vals = _finite(np.abs(spec.evaluate(x, x - u)), "size")
    d = np.linalg.norm(u, axis=-1)
    return float(np.max(vals * (1.0 + d) ** (n + spec.delta), initial=0.0))


def estimate_smoothness_constant(
    spec: KernelSpec, which: str = "first_slot", sample_count: int = 4096, radius: float = 10.0
) -> float:
    """sup of ``|psi(x,y) - psi(x+h,y)|`` (or the second slot) over the smoothness bound.

    Samples obey ``|h| < |x-y|/2``; pairs with ``h = 0`` contribute zero.
    """
    if which not in ("first_slot", "second_slot"):
        raise ValueError(f"which must be 'first_slot' or 'second_slot', got {which!r}")
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    n = spec.dim
    pts = _halton(3 * n, sample_count)
    x = (2.0 * pts[:, :n] - 1.0) * radius
    u = (2.0 * pts[:, n : 2 * n] - 1.0) * radius
    v = 2.0 * pts[:, 2 * n :] - 1.0
    keep = (np.linalg.norm(u, axis=-1) <= radius) & (np.linalg.norm(v, axis=-1) < 1.0)
    x, u, v = x[keep], u[keep], v[keep]
    d = np.linalg.norm(u, axis=-1)
    step = v * (d / 2.0)[:, None]
    y = x - u
    base = spec.evaluate(x, y)
    moved = spec.evaluate(x + step, y) if which == "first_slot" else spec.evaluate(x, y + step)
    diff = _finite(np.abs(base - moved), "smoothness")
    hn = np.linalg.norm(step, axis=-1)
    bound = (1.0 + d) ** (-n - spec.delta) * (hn / (1.0 + d)) ** spec.gamma
    ratio = np.divide(diff, bound, out=np.zeros_like(diff), where=bound > 0)
    return float(np.max(ratio, initial=0.0))


def size_constant_convergence(
    spec: KernelSpec, radii=(4.0, 8.0, 16.0, 32.0, 64.0), sample_count: int = 4096, tol: float = 0.05
) -> dict:
    """Size-constant estimates over growing radii; converged when the last doubling moves < ``tol``."""
    est = [estimate_size_constant(spec, sample_count, r) for r in radii]
    last, prev = est[-1], est[-2]
    change = abs(last - prev) / prev if prev > 0 else (0.0 if last == 0 else np.inf)
    return {"radii": list(radii), "estimates": est, "relative_change": change, "converged": change < tol}


def profile_integral(spec: KernelSpec, half_width: float = 8.0, cells: int = 2048) -> float:
    """Midpoint-rule integral of the profile over ``[-half_width, half_width]^n``."""
    if spec.profile is None:
        raise ValueError("only convolution kernels have a profile")
    h = 2 * half_width / cells
    ax = -half_width + (np.arange(cells) + 0.5) * h
    mesh = np.meshgrid(*([ax] * spec.dim), indexing="ij")
    u = np.stack(mesh, axis=-1)
    return float(spec.profile(u).sum() * h**spec.dim)
