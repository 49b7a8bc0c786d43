"""Ground-truth scalar fields, robot sample paths, and noisy sampling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .gp_core import Observation

FieldKind = Literal["toy_1d", "gaussian_mixture_2d", "tabulated_grid"]

# two bright regions in a 7.5 m x 5 m workspace: (cx, cy, amplitude, width)
TWO_LAMP_BUMPS = ((2.0, 3.5, 2.0, 1.2), (5.8, 1.5, 1.6, 1.0))


def toy_field(x):
    x = np.asarray(x, dtype=float)
    return np.sin(2 * x) + np.cos(6 * x) + 0.5


def gaussian_mixture_field(x, bumps: Sequence[Sequence[float]]):
    """Sum of isotropic bumps ``amp * exp(-|x - c|^2 / w^2)``; ``bumps`` rows are ``(*center, amp, width)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, -1) if single else x
    out = np.zeros(pts.shape[0])
    for b in bumps:
        *center, amp, width = b
        if width <= 0:
            raise ValueError("bump widths must be > 0")
        d2 = ((pts - np.asarray(center)) ** 2).sum(1)
        out += amp * np.exp(-d2 / width ** 2)
    return float(out[0]) if single else out


@dataclass
class ScalarField:
    kind: FieldKind
    bumps: tuple[tuple[float, ...], ...] = ()
    table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "tabulated_grid":
            if self.table is None:
                raise ValueError("tabulated_grid field needs a table")
            xs, ys, vals = self.table
            self._interp = RegularGridInterpolator((xs, ys), vals, method="linear", bounds_error=False,
                                                   fill_value=None)
        elif self.kind not in ("toy_1d", "gaussian_mixture_2d"):
            raise ValueError(f"unknown field kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "toy_1d" else 2

    def __call__(self, positions) -> np.ndarray:
        """Evaluate at row-stacked positions; always returns a 1-D array."""
        pts = np.asarray(positions, dtype=float).reshape(-1, self.dim)
        if self.kind == "toy_1d":
            return toy_field(pts[:, 0])
        if self.kind == "gaussian_mixture_2d":
            return gaussian_mixture_field(pts, self.bumps)
        return self._interp(pts)

    def bound(self) -> float:
        """Upper bound on |f|: analytic for the closed-form kinds, table maximum otherwise."""
        if self.kind == "toy_1d":
            return 2.5
        if self.kind == "gaussian_mixture_2d":
            return float(sum(abs(b[-2]) for b in self.bumps))
        return float(np.abs(self.table[2]).max())

    @classmethod
    def toy(cls) -> "ScalarField":
        return cls("toy_1d")

    @classmethod
    def mixture(cls, bumps=TWO_LAMP_BUMPS) -> "ScalarField":
        return cls("gaussian_mixture_2d", tuple(tuple(float(v) for v in b) for b in bumps))

    @classmethod
    def from_csv(cls, path: str | Path) -> "ScalarField":
        return cls("tabulated_grid", table=read_grid_csv(path))


def read_grid_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read an ``x,y,value`` row-major grid; returns axes and a ``(len(xs), len(ys))`` value array."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["x", "y", "value"]:
            raise ValueError(f"{path}: expected header x,y,value, got {reader.fieldnames}")
        for row in reader:
            rows.append((float(row["x"]), float(row["y"]), float(row["value"])))
    arr = np.array(rows)
    xs = np.unique(arr[:, 0])
    ys = np.unique(arr[:, 1])
    if len(arr) != len(xs) * len(ys):
        raise ValueError(f"{path}: {len(arr)} rows do not form a full {len(xs)}x{len(ys)} grid")
    vals = np.full((len(xs), len(ys)), np.nan)
    vals[np.searchsorted(xs, arr[:, 0]), np.searchsorted(ys, arr[:, 1])] = arr[:, 2]
    return xs, ys, vals


def write_grid_csv(path: str | Path, xs, ys, values):
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        # row-major: y outer, x inner
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(values[i, j]))])


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos.reshape(len(pos), -1))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]

    @property
    def end(self) -> np.ndarray:
        return self.positions[-1]


def linear_sweep(start, end, n: int) -> Trajectory:
    if n < 2:
        raise ValueError("linear_sweep needs n >= 2")
    start = np.atleast_1d(np.asarray(start, dtype=float))
    end = np.atleast_1d(np.asarray(end, dtype=float))
    s = np.linspace(0.0, 1.0, n)[:, None]
    pos = start + s * (end - start)
    pos[-1] = end
    return Trajectory(pos)


def lawnmower(workspace: tuple[Sequence[float], Sequence[float]], rows: int, n: int) -> Trajectory:
    """Boustrophedon over ``workspace=((xmin, ymin), (xmax, ymax))`` sampled evenly by arc length.

    Row ``i`` runs at the centre of the ``i``-th horizontal strip, so one row is a
    straight sweep through the middle of the rectangle.
    """
    if rows < 1 or n < rows:
        raise ValueError("lawnmower needs rows >= 1 and n >= rows")
    (x0, y0), (x1, y1) = workspace
    ys = y0 + (np.arange(rows) + 0.5) * (y1 - y0) / rows
    corners = []
    for i, y in enumerate(ys):
        a, b = (x0, x1) if i % 2 == 0 else (x1, x0)
        corners += [(a, y), (b, y)]
    corners = np.array(corners)
    if rows == 1:
        return linear_sweep(corners[0], corners[1], n)
    seg = np.sqrt((np.diff(corners, axis=0) ** 2).sum(1))
    cum = np.r_[0.0, np.cumsum(seg)]
    s = np.linspace(0.0, cum[-1], n)
    pos = np.column_stack([np.interp(s, cum, corners[:, 0]), np.interp(s, cum, corners[:, 1])])
    return Trajectory(pos)


def band_lawnmowers(workspace, robots: int, rows: int, n: int) -> list[Trajectory]:
    """Split the workspace into horizontal bands, one lawnmower per robot."""
    (x0, y0), (x1, y1) = workspace
    h = (y1 - y0) / robots
    return [lawnmower(((x0, y0 + i * h), (x1, y0 + (i + 1) * h)), rows, n) for i in range(robots)]


def read_trajectory_csv(path: str | Path) -> Trajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames[:2] != ["step", "x"]:
            raise ValueError(f"{path}: expected header step,x[,y]")
        cols = reader.fieldnames[1:]
        rows = sorted(reader, key=lambda r: int(r["step"]))
    return Trajectory(np.array([[float(r[c]) for c in cols] for r in rows]))


def write_trajectory_csv(path: str | Path, traj: Trajectory):
    cols = ["x", "y"][: traj.positions.shape[1]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", *cols])
        for k, p in enumerate(traj.positions):
            w.writerow([k, *(repr(float(v)) for v in p)])


def robot_rng(scenario_seed: int, robot_id: int) -> np.random.Generator:
    """Independent PCG64 stream per robot, seeded with ``scenario_seed XOR robot_id``."""
    return np.random.Generator(np.random.PCG64((int(scenario_seed) ^ int(robot_id)) & 0xFFFFFFFFFFFFFFFF))


def sample(field: ScalarField, x, noise_sd: float, rng: np.random.Generator,
           robot_id: int = 0, step_index: int = 0) -> Observation:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    value = float(field(x)[0])
    if noise_sd > 0:
        value += noise_sd * rng.standard_normal()
    return Observation(x, value, robot_id, step_index)
