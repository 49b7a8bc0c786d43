"""Dynamic average consensus on product-of-experts reference inputs.

Every robot tracks two per-grid-point sums: mean/precision and precision.  Running
first-order consensus on them makes each robot's recovered map converge to the
centralized PoE fusion of all local maps.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gp_core import GaussianMap, KernelSpec, as_points

XI_FLOOR = 1e-9
BOUND_SAFETY = 1.5


@dataclass(frozen=True)
class ConsensusParams:
    correction_variance: float
    connectivity_period: int = 1
    weight_floor: float = 0.1
    robot_count: int = 1

    def __post_init__(self):
        if self.correction_variance <= 0:
            raise ValueError("correction_variance must be > 0")
        if self.connectivity_period < 1 or self.robot_count < 1:
            raise ValueError("connectivity_period and robot_count must be positive integers")
        if not 0 < self.weight_floor <= 1:
            raise ValueError(f"weight_floor must lie in (0, 1], got {self.weight_floor}")

    def eta(self) -> float:
        p, B, phi = self.robot_count, self.connectivity_period, self.weight_floor
        return 4.0 * (p * B - 1) / phi ** (0.5 * p * (p + 1) * B - 1)

    def sigma_n_min(self, kernel: KernelSpec) -> float:
        sf2 = kernel.signal_variance
        return self.eta() * sf2 ** 2 / (kernel.noise_variance + sf2)

    def satisfies_sigma_rule(self, kernel: KernelSpec) -> bool:
        return self.correction_variance >= self.sigma_n_min(kernel)

    def validate(self, kernel: KernelSpec) -> list[str]:
        """Return warnings; an unmet correction-variance rule is not fatal."""
        problems = []
        if not self.satisfies_sigma_rule(kernel):
            msg = (f"correction variance {self.correction_variance:g} is below the bound-guarantee "
                   f"minimum {self.sigma_n_min(kernel):.6g}")
            warnings.warn(msg, stacklevel=2)
            problems.append(msg)
        return problems


@dataclass
class ConsensusState:
    xi_mean_term: np.ndarray
    xi_precision_term: np.ndarray
    prev_reference: tuple[np.ndarray, np.ndarray]
    grid: np.ndarray | None = None

    @classmethod
    def from_reference(cls, reference: tuple[np.ndarray, np.ndarray], grid=None) -> "ConsensusState":
        r1, r2 = (np.array(v, dtype=float) for v in reference)
        if r1.shape != r2.shape:
            raise ValueError("reference components must share the grid length")
        return cls(r1.copy(), r2.copy(), (r1, r2), None if grid is None else as_points(grid))

    def __len__(self):
        return self.xi_mean_term.shape[0]


@dataclass(frozen=True)
class BoundConstants:
    eta: float
    delta1_hat: float
    delta2_hat: float
    alpha: float
    beta: float
    sigma_n_min: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("eta", "delta1_hat", "delta2_hat", "alpha", "beta", "sigma_n_min")}


@dataclass
class BoundReport:
    passed: np.ndarray
    passed_signed: np.ndarray
    error: np.ndarray
    allowance: np.ndarray
    max_violation: float

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())


def reference_input(local_map: GaussianMap, sigma_n_sq: float) -> tuple[np.ndarray, np.ndarray]:
    prec = 1.0 / (local_map.variance + sigma_n_sq)
    return local_map.mean * prec, prec


def _check_same_grid(a: ConsensusState, b: ConsensusState):
    if len(a) != len(b):
        raise ValueError(f"grid length mismatch: {len(a)} vs {len(b)}")
    if a.grid is not None and b.grid is not None and not np.array_equal(a.grid, b.grid):
        raise ValueError("consensus states are defined on different grids")


def consensus_step(state: ConsensusState, neighbor_states: Sequence[ConsensusState], weights,
                   new_reference: tuple[np.ndarray, np.ndarray]) -> ConsensusState:
    """One synchronous first-order update; neighbor states are previous-round snapshots."""
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if len(weights) != len(neighbor_states):
        raise ValueError("need exactly one weight per neighbor")
    if np.any(weights < 0):
        raise ValueError("consensus weights must be nonnegative")
    r1, r2 = (np.asarray(v, dtype=float) for v in new_reference)
    if r1.shape != state.xi_mean_term.shape or r2.shape != state.xi_mean_term.shape:
        raise ValueError("reference input does not match the consensus grid")

    xi1 = state.xi_mean_term.copy()
    xi2 = state.xi_precision_term.copy()
    for w, nb in zip(weights, neighbor_states):
        _check_same_grid(state, nb)
        xi1 += w * (nb.xi_mean_term - state.xi_mean_term)
        xi2 += w * (nb.xi_precision_term - state.xi_precision_term)
    xi1 += r1 - state.prev_reference[0]
    xi2 += r2 - state.prev_reference[1]
    return ConsensusState(xi1, xi2, (r1.copy(), r2.copy()), state.grid)


def recover_map(state: ConsensusState, grid=None) -> GaussianMap:
    """Distributed posterior; precision terms at or below ``XI_FLOOR`` are clamped and flagged."""
    grid = state.grid if grid is None else as_points(grid)
    if grid is None:
        grid = np.arange(len(state), dtype=float).reshape(-1, 1)
    xi2 = state.xi_precision_term
    transient = xi2 <= XI_FLOOR
    prec = np.where(transient, XI_FLOOR, xi2)
    return GaussianMap(grid, state.xi_mean_term / prec, 1.0 / prec, transient=transient)


def centralized_poe(maps: Sequence[GaussianMap], sigma_n_sq: float) -> GaussianMap:
    """Fixed point of the consensus pipeline: precision-weighted mean, harmonic-mean variance."""
    if not maps:
        raise ValueError("centralized_poe needs at least one map")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid.shape != grid.shape or not np.array_equal(m.grid, grid):
            raise ValueError("all maps must share the same grid")
    prec = np.array([1.0 / (m.variance + sigma_n_sq) for m in maps])
    means = np.array([m.mean for m in maps])
    total = prec.sum(0)
    return GaussianMap(grid, (prec * means).sum(0) / total, len(maps) / total)


def theorem1_bounds(kernel: KernelSpec, params: ConsensusParams, y_bar: float, mu_bar: float) -> BoundConstants:
    """Asymptotic error-bound constants for the distributed mean versus PoE."""
    if y_bar <= 0 or mu_bar <= 0:
        raise ValueError("observation bounds y_bar and mu_bar must be positive")
    sf2 = kernel.signal_variance
    se2 = kernel.noise_variance
    sn2 = params.correction_variance
    eta = params.eta()
    base = sn2 * (se2 + sf2)
    d1 = y_bar * sf2 * (sn2 + sf2) / base + mu_bar * sf2 ** 2 / base
    d2 = sf2 ** 2 / base
    alpha = eta * d1 / (1.0 + eta * d2)
    beta = math.inf if eta * d2 == 1.0 else abs(eta * d2 / (1.0 - eta * d2))
    return BoundConstants(eta, d1, d2, alpha, beta, params.sigma_n_min(kernel))


def check_bound(distributed: GaussianMap, poe: GaussianMap, bounds: BoundConstants) -> BoundReport:
    """Per-point test of ``|mu_D - mu_PoE| <= alpha + beta*|mu_PoE|``.

    ``passed_signed`` records the same test with ``beta*mu_PoE`` (no absolute value).
    """
    if len(distributed) != len(poe):
        raise ValueError("maps must share the same grid")
    err = np.abs(distributed.mean - poe.mean)
    allowance = bounds.alpha + bounds.beta * np.abs(poe.mean)
    signed = bounds.alpha + bounds.beta * poe.mean
    excess = err - allowance
    return BoundReport(err <= allowance, err <= signed, err, allowance, float(max(excess.max(initial=0.0), 0.0)))


def estimate_observation_bound(values, safety: float = BOUND_SAFETY) -> float:
    """``safety * max|y|``; a stand-in when the bounded-observation constants are not configured."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to estimate a bound from")
    return float(safety * np.abs(values).max())
