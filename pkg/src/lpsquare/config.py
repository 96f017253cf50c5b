"""Experiment configuration: nested dataclasses loaded from YAML (JSON is accepted too)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .grid import Grid, make_grid
from .kernel import BUILTIN_KERNELS, KernelError, KernelSpec, builtin_kernel
from .operators import TLadder, default_ladder


class ConfigError(ValueError):
    """Invalid or incomplete configuration (CLI exit code 2)."""


@dataclass
class GridConfig:
    dim: int = 1
    lo: float = -8.0
    hi: float = 8.0
    cells: int = 2048

    def build(self) -> Grid:
        return make_grid(self.dim, [self.lo] * self.dim, [self.hi] * self.dim, self.cells)


@dataclass
class KernelConfig:
    name: str = "gauss_derivative"
    delta: float | None = None
    gamma: float | None = None
    sample_count: int = 4096
    radii: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0, 64.0])


@dataclass
class LadderConfig:
    t_min: float | None = None
    t_max: float | None = None
    levels_per_octave: int = 8


@dataclass
class OperatorConfig:
    alphas: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    lam: float = 3.0
    K: int = 8


@dataclass
class RhoConfig:
    values: list | None = None
    log10_start: float = -2.0
    log10_stop: float = 1.5
    count: int = 16

    def ladder(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, float)
        return np.logspace(self.log10_start, self.log10_stop, self.count)


@dataclass
class FamilyConfig:
    name: str = "standard"
    members: list | None = None  # subset of names; [] means an empty family


@dataclass
class SlackConfig:
    weak_stability: float = 0.3
    cone_energy: float = 0.05
    tail_refine: float = 0.25
    tail_box: float = 0.10
    gstar_spread: float = 0.2
    series: float = 0.2
    kernel_convergence: float = 0.05
    ntv_mean: float = 1e-8


@dataclass
class LemmaConfig:
    series_delta: float | None = None
    series_K: int = 64
    j_deltas: list = field(default_factory=lambda: [0.1, 0.25, 0.4, 0.75, 0.9])
    j_dists: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    random_regions: int = 20
    region_cells: int = 512
    doubling_families: int = 50
    tail_inputs: int = 10
    tail_cells: int = 2048
    cone_box: float | None = None  # side of the cone-energy box; 128 (n=1) or 32 (n=2) when unset
    cone_cells: int = 4096
    cone_thresholds: list = field(default_factory=lambda: [0.5, 0.75])


@dataclass
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    ladder: LadderConfig = field(default_factory=LadderConfig)
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    rho: RhoConfig = field(default_factory=RhoConfig)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    slack: SlackConfig = field(default_factory=SlackConfig)
    lemmas: LemmaConfig = field(default_factory=LemmaConfig)
    region: list | None = None  # boxes [[lo, hi], ...] per axis for the whitney command
    seed: int = 0
    output_dir: str = "out"
    counterexample: str | None = None

    def build_grid(self) -> Grid:
        return self.grid.build()

    def build_kernel(self) -> KernelSpec:
        return builtin_kernel(self.kernel.name, self.grid.dim, self.kernel.delta, self.kernel.gamma)

    def build_ladder(self, grid: Grid | None = None) -> TLadder:
        grid = self.build_grid() if grid is None else grid
        return default_ladder(grid, self.ladder.levels_per_octave, self.ladder.t_min, self.ladder.t_max)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "ExperimentConfig":
        """Check every parameter against the preconditions of the modules it feeds."""
        g = self.grid
        if g.dim not in (1, 2):
            raise ConfigError(f"grid.dim must be 1 or 2, got {g.dim}")
        if g.cells < 2:
            raise ConfigError(f"grid.cells must be >= 2, got {g.cells}")
        if not g.hi > g.lo:
            raise ConfigError("grid.hi must exceed grid.lo")
        if self.kernel.name not in BUILTIN_KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel.name!r}; expected one of {BUILTIN_KERNELS}")
        try:
            self.build_kernel()
        except KernelError as exc:
            raise ConfigError(str(exc)) from None
        if self.kernel.sample_count < 1000:
            raise ConfigError("kernel.sample_count must be >= 1000")
        if len(self.kernel.radii) < 2 or any(r <= 0 for r in self.kernel.radii):
            raise ConfigError("kernel.radii needs at least two positive radii")
        if self.ladder.levels_per_octave < 1:
            raise ConfigError("ladder.levels_per_octave must be >= 1")
        try:
            self.build_ladder()
        except ValueError as exc:
            raise ConfigError(f"ladder: {exc}") from None
        if any(a < 1 for a in self.operators.alphas):
            raise ConfigError("operators.alphas must all be >= 1")
        if not self.operators.lam > 1:
            raise ConfigError("operators.lam must exceed 1")
        if self.operators.K < 0:
            raise ConfigError("operators.K must be >= 0")
        rl = self.rho.ladder()
        if rl.size == 0 or np.any(rl <= 0):
            raise ConfigError("rho ladder must be nonempty and positive")
        if self.family.members is not None and len(self.family.members) == 0:
            raise ConfigError("family is empty")
        for k, v in asdict(self.slack).items():
            if not v > 0:
                raise ConfigError(f"slack.{k} must be positive")
        if self.lemmas.series_K < 8:
            raise ConfigError("lemmas.series_K must be >= 8")
        if self.region is not None:
            for box in self.region:
                if np.asarray(box, float).size != 2 * g.dim:
                    raise ConfigError(f"region boxes need {g.dim} [lo, hi] pairs, got {box!r}")
        return self


_REQUIRED = {"grid": ("dim", "lo", "hi", "cells")}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(path + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{path}{name}.")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    data = dict(data or {})
    for section, keys in _REQUIRED.items():
        if section in data:
            missing = [k for k in keys if k not in (data[section] or {})]
            if missing:
                raise ConfigError(f"missing config key(s) {', '.join(f'{section}.{k}' for k in missing)}")
    try:
        cfg = _build(ExperimentConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML/JSON: {exc}") from None
    return config_from_dict(data or {})


def with_overrides(cfg: ExperimentConfig, seed: int | None = None, grid_cells: int | None = None,
                   output_dir: str | None = None) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if grid_cells is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, cells=grid_cells))
    if output_dir is not None:
        cfg = replace(cfg, output_dir=output_dir)
    return cfg
