"""Flat, typed scenario configuration read from JSON or TOML."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..consensus import ConsensusParams
from ..field_env import ScalarField, Trajectory, band_lawnmowers, linear_sweep, read_trajectory_csv
from ..gp_core import KernelSpec
from ..network_sim import CommGraph, weights_from_graph
from ..sparsify import SparsityConfig


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    field_kind: str = "toy_1d"
    field_bumps: list[list[float]] = field(default_factory=list)
    field_csv: str = ""
    workspace_min: list[float] = field(default_factory=lambda: [0.0])
    workspace_max: list[float] = field(default_factory=lambda: [4.0])
    robots: int = 2
    samples_per_robot: int = 300
    trajectory: str = "sweep"
    sweep_starts: list[list[float]] = field(default_factory=list)
    sweep_ends: list[list[float]] = field(default_factory=list)
    band_rows: int = 3
    trajectory_csvs: list[str] = field(default_factory=list)
    signal_variance: float = 1.0
    length_scales: list[float] = field(default_factory=lambda: [0.5])
    noise_variance: float = 0.1
    correction_variance: float = 0.1
    compression: str = "distributed"
    budget: int = 10
    k_phi: float = 0.2
    eval_grid_stride: int = 1
    br_sign: str = "paper"
    removal_mode: str = "exact"
    comm_range: float = 3.0
    edge_weight: float = 0.1
    weight_floor: float = 0.0
    connectivity_period: int = 1
    local_steps_per_round: int = 6
    extra_rounds: int = 0
    grid_resolution: list[int] = field(default_factory=lambda: [100])
    y_bar: float = 0.0
    mu_bar: float = 0.0
    seed: int = 0
    output_dir: str = "out"

    _choices = {
        "field_kind": ("toy_1d", "gaussian_mixture_2d", "tabulated_grid"),
        "trajectory": ("sweep", "bands", "csv"),
        "compression": ("distributed", "local", "none"),
        "br_sign": ("paper", "inverted"),
        "removal_mode": ("exact", "projection"),
    }

    def __post_init__(self):
        if isinstance(self.grid_resolution, int):
            self.grid_resolution = [self.grid_resolution]
        if len(self.grid_resolution) == 1:
            # one entry applies to every axis
            self.grid_resolution = list(self.grid_resolution) * self.dim
        self.sweep_starts = [list(np.atleast_1d(v).astype(float)) for v in self.sweep_starts]
        self.sweep_ends = [list(np.atleast_1d(v).astype(float)) for v in self.sweep_ends]
        if self.weight_floor == 0.0:
            self.weight_floor = self.edge_weight
        for key, allowed in self._choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if len(self.workspace_min) != len(self.workspace_max) or len(self.length_scales) != self.dim:
            raise ConfigError("workspace bounds and length_scales must share the input dimension")
        if len(self.grid_resolution) != self.dim:
            raise ConfigError("grid_resolution needs one entry per input dimension")
        if self.robots < 1 or self.samples_per_robot < 2 or self.local_steps_per_round < 1:
            raise ConfigError("robots >= 1, samples_per_robot >= 2 and local_steps_per_round >= 1 required")
        if self.compression != "none" and self.budget < 1:
            raise ConfigError("compression needs budget >= 1")

    @property
    def dim(self) -> int:
        return len(self.workspace_min)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name: f for f in fields(cls) if not f.name.startswith("_")}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            kind = known[key].type
            try:
                kwargs[key] = _coerce(value, kind)
            except (TypeError, ValueError) as err:
                raise ConfigError(f"bad value for {key}: {value!r} ({err})") from None
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if not k.startswith("_")}

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def kernel(self) -> KernelSpec:
        return KernelSpec(self.signal_variance, tuple(self.length_scales), self.noise_variance)

    def consensus_params(self) -> ConsensusParams:
        return ConsensusParams(self.correction_variance, self.connectivity_period, self.weight_floor, self.robots)

    def sparsity(self) -> SparsityConfig | None:
        if self.compression == "none":
            return None
        eval_grid = None
        if self.eval_grid_stride > 1:
            eval_grid = self.grid()[:: self.eval_grid_stride]
        return SparsityConfig(self.budget, self.k_phi, eval_grid, self.br_sign, self.removal_mode)

    def scalar_field(self) -> ScalarField:
        if self.field_kind == "toy_1d":
            return ScalarField.toy()
        if self.field_kind == "gaussian_mixture_2d":
            return ScalarField.mixture(self.field_bumps) if self.field_bumps else ScalarField.mixture()
        return ScalarField.from_csv(self.field_csv)

    def grid(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(self.workspace_min, self.workspace_max, self.grid_resolution)]
        mesh = np.meshgrid(*axes, indexing="xy")
        return np.column_stack([m.ravel() for m in mesh])

    def trajectories(self) -> list[Trajectory]:
        n = self.samples_per_robot
        if self.trajectory == "sweep":
            if len(self.sweep_starts) != self.robots or len(self.sweep_ends) != self.robots:
                raise ConfigError("sweep trajectories need one start and one end per robot")
            return [linear_sweep(a, b, n) for a, b in zip(self.sweep_starts, self.sweep_ends)]
        if self.trajectory == "bands":
            if self.dim != 2:
                raise ConfigError("band lawnmowers need a 2-D workspace")
            return band_lawnmowers((self.workspace_min, self.workspace_max), self.robots, self.band_rows, n)
        if len(self.trajectory_csvs) != self.robots:
            raise ConfigError("csv trajectories need one file per robot")
        trajs = [read_trajectory_csv(p) for p in self.trajectory_csvs]
        if any(len(t) != n for t in trajs):
            raise ConfigError(f"every trajectory file must hold exactly {n} steps")
        return trajs

    @property
    def rounds(self) -> int:
        return math.ceil(self.samples_per_robot / self.local_steps_per_round) + self.extra_rounds

    def validate(self) -> tuple[list[str], list[str]]:
        """Run load-time checks; returns ``(errors, warnings)``."""
        errors, warns = [], []
        try:
            kernel = self.kernel()
            params = self.consensus_params()
        except ValueError as err:
            return [str(err)], warns
        # worst case is a complete graph
        complete = CommGraph(self.robots, frozenset((i, j) for i in range(self.robots)
                                                    for j in range(self.robots) if i != j))
        try:
            problems = weights_from_graph(complete, self.edge_weight, self.weight_floor).validate(self.weight_floor)
            errors += [f"adjacency: {p}" for p in problems]
        except ValueError as err:
            errors.append(f"adjacency: {err}")
        if not params.satisfies_sigma_rule(kernel):
            warns.append(f"correction_variance {self.correction_variance:g} below bound-guarantee minimum "
                         f"{params.sigma_n_min(kernel):.6g}")
        try:
            self.trajectories()
            self.sparsity()
            self.scalar_field()
        except (ValueError, OSError) as err:
            errors.append(str(err))
        return errors, warns


def _coerce(value, kind: str):
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if kind == "int":
        if isinstance(value, bool) or not float(value).is_integer():
            raise TypeError("expected an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool):
            raise TypeError("expected a number")
        return float(value)
    if kind == "list[float]":
        return [float(v) for v in value]
    if kind == "list[int]":
        if isinstance(value, int):
            return value
        return [int(v) for v in value]
    if kind == "list[str]":
        return [str(v) for v in value]
    if kind == "list[list[float]]":
        return [[float(x) for x in np.atleast_1d(v)] for v in value]
    raise TypeError(f"unsupported field type {kind}")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)
    cfg = ScenarioConfig.from_dict(raw)
    # relative file references resolve against the config's directory
    base = path.parent
    if cfg.field_csv and not Path(cfg.field_csv).is_absolute():
        cfg.field_csv = str(base / cfg.field_csv)
    cfg.trajectory_csvs = [p if Path(p).is_absolute() else str(base / p) for p in cfg.trajectory_csvs]
    return cfg


def dump_config(cfg: ScenarioConfig, path: str | Path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
