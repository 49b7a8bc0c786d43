"""Observation scoring and one-point-per-arrival compression of a robot's dataset."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .gp_core import (
    DEGENERATE_REL,
    Dataset,
    GaussianMap,
    KernelSpec,
    RecursiveState,
    RemovalSingularityError,
    as_points,
    kernel_matrix,
    recursive_predict,
    remove_point,
)

log = logging.getLogger(__name__)

BrSign = Literal["paper", "inverted"]


class ScoringError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SparsityConfig:
    budget: int
    k_phi: float = 0.2
    eval_grid: np.ndarray | None = None
    br_sign: BrSign = "paper"
    removal_mode: Literal["exact", "projection"] = "exact"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be a positive integer")
        if not 0 < self.k_phi < 1:
            raise ValueError(f"k_phi must lie in (0, 1), got {self.k_phi}")
        if self.br_sign not in ("paper", "inverted"):
            raise ValueError(f"br_sign must be 'paper' or 'inverted', got {self.br_sign!r}")


@dataclass
class MetricScores:
    local_score: np.ndarray
    br_distance: np.ndarray | None
    fused: np.ndarray

    def ranking(self) -> np.ndarray:
        """Candidate indices by increasing fused score; ties keep the lower index first."""
        return np.argsort(self.fused, kind="stable")


def local_score(state: RecursiveState, k: int) -> float:
    """|alpha_k / Q_kk|: posterior-mean change at the data caused by point ``k``."""
    qkk = state.q_mat[k, k]
    if abs(qkk) < DEGENERATE_REL:
        raise ScoringError(f"degenerate Q diagonal at index {k}: {qkk:.3g}")
    return float(abs(state.alpha[k] / qkk))


def leave_one_out_posterior(state: RecursiveState, data: Dataset, k: int, spec: KernelSpec, grid,
                            mode: Literal["exact", "projection"] = "exact") -> GaussianMap:
    reduced, rest = remove_point(state, data, k, mode, spec.signal_variance)
    return recursive_predict(reduced, rest, spec, grid)


def leave_one_out_moments(state: RecursiveState, data: Dataset, spec: KernelSpec, grid) -> tuple[np.ndarray, np.ndarray]:
    """Exact-removal posterior for every candidate at once, as ``(G, t)`` mean and variance arrays.

    Dropping point k maps alpha to ``alpha - (alpha_k / C_kk) C[:, k]`` and C to
    ``C - C[:, k] C[k, :] / C_kk``, so with ``V = K(grid, X) C`` the grid moments shift by
    ``-V[:, k] alpha_k / C_kk`` and ``-V[:, k]^2 / C_kk``.  Singular pivots give NaN columns.
    """
    full = recursive_predict(state, data, spec, grid)
    Ks = kernel_matrix(full.grid, data.positions, spec)
    V = Ks @ state.c_mat
    ckk = np.diag(state.c_mat).copy()
    bad = np.abs(ckk) < DEGENERATE_REL * spec.signal_variance
    ckk[bad] = np.nan
    mean = full.mean[:, None] - V * (state.alpha / ckk)[None, :]
    var = full.variance[:, None] - V * V / ckk[None, :]
    return mean, var


def _br_columns(target: GaussianMap, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    """br_distance between ``target`` and each column-map; NaN where a column is unusable."""
    v1 = target.variance[:, None]
    if np.any(v1 <= 0):
        raise ValueError("br_distance needs strictly positive variances")
    with np.errstate(invalid="ignore", divide="ignore"):
        vbar = 0.5 * (v1 + var)
        dmu = target.mean[:, None] - mean
        d = np.sqrt(np.sum(dmu * dmu / vbar, axis=0)) + np.sqrt(np.sum(np.log(v1 / var) ** 2, axis=0))
    d[np.any(var <= 0, axis=0)] = np.nan
    return d


def br_distance(m1: GaussianMap, m2: GaussianMap) -> float:
    """Bhattacharyya-type mean term plus Riemannian log-variance term, diagonal covariances."""
    if len(m1) != len(m2):
        raise ValueError("maps must share the same grid")
    v1, v2 = m1.variance, m2.variance
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        raise ValueError("br_distance needs strictly positive variances")
    vbar = 0.5 * (v1 + v2)
    dmu = m1.mean - m2.mean
    d_b = np.sqrt(np.sum(dmu * dmu / vbar))
    d_r = np.sqrt(np.sum(np.log(v1 / v2) ** 2))
    return float(d_b + d_r)


def minmax(values) -> np.ndarray:
    """Min-max normalization to [0, 1]; a constant input maps to 0.5 everywhere."""
    values = np.asarray(values, dtype=float)
    lo, hi = np.nanmin(values), np.nanmax(values)
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def _subset(m: GaussianMap, grid: np.ndarray) -> GaussianMap:
    if m.grid.shape == grid.shape and np.array_equal(m.grid, grid):
        return m
    # locate each eval point on the map grid
    d = ((grid[:, None, :] - m.grid[None, :, :]) ** 2).sum(-1)
    idx = d.argmin(1)
    if not np.allclose(d[np.arange(len(idx)), idx], 0.0):
        raise ValueError("eval_grid must be a subset of the distributed map's grid")
    return GaussianMap(grid, m.mean[idx], m.variance[idx])


def distributed_metric(data: Dataset, state: RecursiveState, dist_map: GaussianMap | None,
                       cfg: SparsityConfig, spec: KernelSpec) -> MetricScores:
    """Scores for every current point; lower fused score means less useful.

    With ``dist_map=None`` only the local score is used (cold start, or the
    local-compression baseline).
    """
    n = len(data)
    eps = np.array([local_score(state, k) for k in range(n)])
    if dist_map is None:
        return MetricScores(eps, None, minmax(eps))

    grid = dist_map.grid if cfg.eval_grid is None else as_points(cfg.eval_grid, spec.dim)
    target = _subset(dist_map, grid)
    if cfg.removal_mode == "exact":
        d_br = _br_columns(target, *leave_one_out_moments(state, data, spec, grid))
    else:
        d_br = np.full(n, np.nan)
        for k in range(n):
            try:
                loo = leave_one_out_posterior(state, data, k, spec, grid, cfg.removal_mode)
            except RemovalSingularityError:
                continue
            if np.all(loo.variance > 0):
                d_br[k] = br_distance(target, loo)
    if np.all(np.isnan(d_br)):
        raise ScoringError("no candidate has a usable leave-one-out posterior")
    signed = -d_br if cfg.br_sign == "paper" else d_br
    fused = cfg.k_phi * minmax(signed) + (1.0 - cfg.k_phi) * minmax(eps)
    # unusable candidates go last; compress still tries them if all others fail
    fused = np.where(np.isnan(fused), np.inf, fused)
    return MetricScores(eps, d_br, fused)


def compress(data: Dataset, state: RecursiveState, dist_map: GaussianMap | None, cfg: SparsityConfig,
             spec: KernelSpec) -> tuple[Dataset, RecursiveState, int]:
    """Remove the lowest-scoring point from a dataset of size ``budget + 1``.

    Returns the reduced dataset, its state, and the removed index.  A candidate whose
    removal pivot is singular is skipped in favour of the next-lowest score.
    """
    if len(data) != cfg.budget + 1:
        raise ValueError(f"compress expects {cfg.budget + 1} points, got {len(data)}")
    scores = distributed_metric(data, state, dist_map, cfg, spec)
    for k in scores.ranking():
        k = int(k)
        try:
            new_state, new_data = remove_point(state, data, k, cfg.removal_mode, spec.signal_variance)
        except RemovalSingularityError:
            log.warning("singular removal for candidate %d, trying next", k)
            continue
        return new_data, new_state, k
    raise RemovalSingularityError("every compression candidate was singular")
