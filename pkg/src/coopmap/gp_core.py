"""Squared-exponential GP regression: batch, recursive streaming, and point removal.

The recursive state ``(alpha, C, Q)`` for a dataset ``X, Y`` of size ``t`` satisfies

    alpha = (K + s_e^2 I)^-1 Y,   C = -(K + s_e^2 I)^-1,   Q = K^-1

with ``K = K(X, X)`` the noiseless Gram matrix.  Predictions are

    mean(x*) = K(x*, X) alpha
    var(x*)  = k(x*, x*) + K(x*, X) C K(X, x*)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

JITTER_REL = 1e-10
JITTER_RETRIES = 3
DEGENERATE_REL = 1e-12


class NumericalError(ArithmeticError):
    """An SPD solve failed even after jitter."""


class DuplicateInputError(ValueError):
    """The new input is numerically a duplicate of an existing point.

    ``index`` is the dataset index of the closest existing point, if known.
    """

    def __init__(self, msg: str, index: int | None = None):
        super().__init__(msg)
        self.index = index


class RemovalSingularityError(ArithmeticError):
    """Removing the point would divide by a near-zero pivot."""


@dataclass(frozen=True)
class KernelSpec:
    signal_variance: float
    length_scales: tuple[float, ...]
    noise_variance: float

    def __post_init__(self):
        object.__setattr__(self, "length_scales", tuple(float(v) for v in np.atleast_1d(self.length_scales)))
        if self.signal_variance <= 0 or self.noise_variance <= 0:
            raise ValueError("signal_variance and noise_variance must be > 0")
        if not self.length_scales or any(l <= 0 for l in self.length_scales):
            raise ValueError("length_scales must be a non-empty vector of positive reals")

    @property
    def dim(self) -> int:
        return len(self.length_scales)


@dataclass(frozen=True)
class Observation:
    position: np.ndarray
    value: float
    robot_id: int = 0
    step_index: int = 0

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.position, dtype=float))
        if pos.ndim != 1 or not np.all(np.isfinite(pos)):
            raise ValueError(f"position must be a finite vector, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "value", float(self.value))

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (np.array_equal(self.position, other.position) and self.value == other.value
                and self.robot_id == other.robot_id and self.step_index == other.step_index)

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    """Ordered observations; index ``k`` of any GP state refers to ``observations[k]``."""

    observations: tuple[Observation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))

    def __len__(self):
        return len(self.observations)

    def __getitem__(self, k):
        return self.observations[k]

    @cached_property
    def positions(self) -> np.ndarray:
        if not self.observations:
            return np.empty((0, 0))
        return np.vstack([o.position for o in self.observations])

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([o.value for o in self.observations], dtype=float)

    def append(self, obs: Observation) -> "Dataset":
        return Dataset(self.observations + (obs,))

    def without(self, k: int) -> "Dataset":
        return Dataset(self.observations[:k] + self.observations[k + 1:])

    def replace(self, k: int, obs: Observation) -> "Dataset":
        return Dataset(self.observations[:k] + (obs,) + self.observations[k + 1:])


@dataclass(frozen=True)
class RecursiveState:
    alpha: np.ndarray
    c_mat: np.ndarray
    q_mat: np.ndarray

    @classmethod
    def empty(cls) -> "RecursiveState":
        return cls(np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)))

    @property
    def size(self) -> int:
        return self.alpha.shape[0]


@dataclass
class GaussianMap:
    """Mean and variance over a fixed, ordered grid of test positions."""

    grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    transient: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = as_points(self.grid)
        self.mean = np.asarray(self.mean, dtype=float)
        self.variance = np.asarray(self.variance, dtype=float)
        n = self.grid.shape[0]
        if self.mean.shape != (n,) or self.variance.shape != (n,):
            raise ValueError(f"mean/variance must have length {n} to match the grid")

    def __len__(self):
        return self.grid.shape[0]


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 2-D ``(n, d)`` array of positions."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected positions of dimension {dim}, got {arr.shape[1]}")
    return arr


def kernel_eval(a, b, spec: KernelSpec) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (spec.dim,) or b.shape != (spec.dim,):
        raise ValueError(f"positions must have dimension {spec.dim}")
    z = (a - b) / np.asarray(spec.length_scales)
    return float(spec.signal_variance * np.exp(-np.dot(z, z)))


def kernel_matrix(a, b, spec: KernelSpec) -> np.ndarray:
    """Cross-covariance ``K(a, b)`` for row-stacked positions."""
    ls = np.asarray(spec.length_scales)
    a = as_points(a, spec.dim) / ls
    b = as_points(b, spec.dim) / ls
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return spec.signal_variance * np.exp(-sq)


def spd_factor(mat: np.ndarray, scale: float):
    """Cholesky factor with additive diagonal jitter, doubled on each failure."""
    jitter = JITTER_REL * scale
    for attempt in range(JITTER_RETRIES + 1):
        try:
            return linalg.cho_factor(mat + jitter * np.eye(mat.shape[0]), lower=True, check_finite=False)
        except linalg.LinAlgError:
            log.debug("cholesky failed with jitter %.3g (attempt %d)", jitter, attempt)
            jitter *= 2.0
    cond = np.linalg.cond(mat)
    raise NumericalError(f"matrix not positive definite after jitter {jitter / 2:.3g} (condition number {cond:.3g})")


def batch_predict(data: Dataset, spec: KernelSpec, grid, noise_variance: float | None = None) -> GaussianMap:
    """Full-GPR posterior on ``grid``; the reference oracle for the recursive forms.

    ``noise_variance`` overrides the spec's value (``0.0`` gives the noiseless posterior).
    """
    grid = as_points(grid, spec.dim)
    if len(data) == 0:
        raise ValueError("batch_predict needs a non-empty dataset")
    s2 = spec.noise_variance if noise_variance is None else noise_variance
    X = data.positions
    K = kernel_matrix(X, X, spec) + s2 * np.eye(len(data))
    fac = spd_factor(K, spec.signal_variance)
    Ks = kernel_matrix(grid, X, spec)
    mean = Ks @ linalg.cho_solve(fac, data.values, check_finite=False)
    v = linalg.solve_triangular(fac[0], Ks.T, lower=True, check_finite=False)
    var = spec.signal_variance - (v * v).sum(0)
    return GaussianMap(grid, mean, var)


def recursive_add(state: RecursiveState, data: Dataset, obs: Observation, spec: KernelSpec,
                  check_gamma: bool = False) -> RecursiveState:
    """Extend the state by one observation (rank-one block update).

    Raises :class:`DuplicateInputError` when the noiseless predictive variance at the
    new input is numerically zero; the caller is expected to merge the value instead.
    """
    t = state.size
    if t != len(data):
        raise ValueError(f"state dimension {t} does not match dataset size {len(data)}")
    x = as_points(obs.position, spec.dim)
    kxx = spec.signal_variance
    s2 = spec.noise_variance
    if t == 0:
        denom = s2 + kxx
        return RecursiveState(np.array([obs.value / denom]), np.array([[-1.0 / denom]]), np.array([[1.0 / kxx]]))

    k = kernel_matrix(data.positions, x, spec)[:, 0]
    ck = state.c_mat @ k
    qk = state.q_mat @ k
    gamma_denom = kxx - k @ qk
    if abs(gamma_denom) < DEGENERATE_REL * kxx:
        nearest = int(np.argmax(k))
        raise DuplicateInputError(f"input {obs.position} duplicates dataset point {nearest}", index=nearest)
    denom = s2 + kxx + k @ ck
    q = (obs.value - k @ state.alpha) / denom
    r = -1.0 / denom
    gamma = 1.0 / gamma_denom
    if check_gamma:
        ref = batch_predict(data, spec, x, noise_variance=0.0).variance[0]
        if not np.isclose(1.0 / gamma, ref, rtol=1e-6, atol=1e-10):
            raise AssertionError(f"1/gamma={1.0 / gamma} disagrees with noiseless variance {ref}")

    s = np.append(ck, 1.0)
    e = np.append(qk, -1.0)
    alpha = np.append(state.alpha, 0.0) + q * s
    c_mat = np.zeros((t + 1, t + 1))
    c_mat[:t, :t] = state.c_mat
    c_mat += r * np.outer(s, s)
    q_mat = np.zeros((t + 1, t + 1))
    q_mat[:t, :t] = state.q_mat
    q_mat += gamma * np.outer(e, e)
    return RecursiveState(alpha, c_mat, q_mat)


def recursive_predict(state: RecursiveState, data: Dataset, spec: KernelSpec, grid) -> GaussianMap:
    grid = as_points(grid, spec.dim)
    if state.size != len(data):
        raise ValueError(f"state dimension {state.size} does not match dataset size {len(data)}")
    if state.size == 0:
        n = grid.shape[0]
        return GaussianMap(grid, np.zeros(n), np.full(n, spec.signal_variance))
    Ks = kernel_matrix(grid, data.positions, spec)
    mean = Ks @ state.alpha
    var = spec.signal_variance + np.einsum("ij,ij->i", Ks @ state.c_mat, Ks)
    return GaussianMap(grid, mean, var)


def _move_to_last(vec_or_mat: np.ndarray, k: int) -> np.ndarray:
    order = np.r_[np.arange(k), np.arange(k + 1, vec_or_mat.shape[0]), k]
    if vec_or_mat.ndim == 1:
        return vec_or_mat[order]
    return vec_or_mat[np.ix_(order, order)]


def remove_point(state: RecursiveState, data: Dataset, k: int,
                 mode: Literal["exact", "projection"] = "exact",
                 signal_variance: float = 1.0) -> tuple[RecursiveState, Dataset]:
    """Drop observation ``k`` (0-based); survivors keep their relative order.

    ``mode="exact"`` reduces alpha and C with the Schur complement on C, which leaves
    the state equal to the one built from the survivors alone.  ``mode="projection"``
    uses the Q-pivoted reduction of Csato & Opper, which instead projects the removed
    point's contribution onto the survivors; the Q update is identical in both.
    Pivots below ``1e-12 * signal_variance`` raise :class:`RemovalSingularityError`.
    """
    t = state.size
    if t != len(data):
        raise ValueError(f"state dimension {t} does not match dataset size {len(data)}")
    if t < 2:
        raise ValueError("remove_point needs at least two points")
    if not 0 <= k < t:
        raise IndexError(f"index {k} out of range for dataset of size {t}")

    alpha = _move_to_last(state.alpha, k)
    C = _move_to_last(state.c_mat, k)
    Q = _move_to_last(state.q_mat, k)
    a_star = alpha[-1]
    c, c_star = C[:-1, -1], C[-1, -1]
    q, q_star = Q[:-1, -1], Q[-1, -1]
    tol = DEGENERATE_REL * signal_variance
    if abs(q_star) < tol or (mode == "exact" and abs(c_star) < tol):
        raise RemovalSingularityError(f"near-zero pivot removing point {k} (q*={q_star:.3g}, c*={c_star:.3g})")

    q_hat = Q[:-1, :-1] - np.outer(q, q) / q_star
    if mode == "exact":
        a_hat = alpha[:-1] - (a_star / c_star) * c
        c_hat = C[:-1, :-1] - np.outer(c, c) / c_star
    elif mode == "projection":
        a_hat = alpha[:-1] - (a_star / q_star) * q
        gam = np.outer(q, c) + np.outer(c, q)
        c_hat = C[:-1, :-1] + (c_star / q_star ** 2) * np.outer(q, q) - gam / q_star
    else:
        raise ValueError(f"unknown removal mode {mode!r}")
    # re-symmetrize to stop rounding asymmetry from accumulating over long streams
    c_hat = 0.5 * (c_hat + c_hat.T)
    q_hat = 0.5 * (q_hat + q_hat.T)
    return RecursiveState(a_hat, c_hat, q_hat), data.without(k)


def build_state(data: Dataset, spec: KernelSpec) -> RecursiveState:
    """Fold a whole dataset into a fresh recursive state, one add at a time."""
    state = RecursiveState.empty()
    sub = Dataset()
    for obs in data.observations:
        state = recursive_add(state, sub, obs, spec)
        sub = sub.append(obs)
    return state


def state_residuals(state: RecursiveState, data: Dataset, spec: KernelSpec) -> dict[str, float]:
    """Frobenius residuals of the three state identities (for debugging and tests)."""
    if state.size == 0:
        return {"q": 0.0, "c": 0.0, "alpha": 0.0}
    K = kernel_matrix(data.positions, data.positions, spec)
    eye = np.eye(state.size)
    Kn = K + spec.noise_variance * eye
    return {
        "q": float(np.linalg.norm(state.q_mat @ K - eye)),
        "c": float(np.linalg.norm(state.c_mat @ Kn + eye)),
        "alpha": float(np.linalg.norm(Kn @ state.alpha - data.values)),
    }


class OnlineGP:
    """Mutable per-robot wrapper: dataset plus recursive state, updated in place.

    Duplicate inputs are merged into the existing record by averaging their values,
    which only shifts ``alpha`` (the Gram matrix is unchanged).
    """

    def __init__(self, spec: KernelSpec, removal_mode: Literal["exact", "projection"] = "exact"):
        self.spec = spec
        self.removal_mode = removal_mode
        self.data = Dataset()
        self.state = RecursiveState.empty()
        self.counts: list[int] = []
        self.merged = 0

    def __len__(self):
        return len(self.data)

    def add(self, obs: Observation) -> bool:
        """Add ``obs``; returns False if it was merged into an existing point."""
        try:
            self.state = recursive_add(self.state, self.data, obs, self.spec)
        except DuplicateInputError as err:
            self._merge(err.index, obs)
            return False
        self.data = self.data.append(obs)
        self.counts.append(1)
        return True

    def _merge(self, k: int, obs: Observation):
        old = self.data[k]
        n = self.counts[k]
        new_value = (old.value * n + obs.value) / (n + 1)
        # alpha = -C Y, so a change dy in Y[k] moves alpha by -C[:, k] dy
        alpha = self.state.alpha - self.state.c_mat[:, k] * (new_value - old.value)
        self.state = RecursiveState(alpha, self.state.c_mat, self.state.q_mat)
        self.data = self.data.replace(k, Observation(old.position, new_value, old.robot_id, old.step_index))
        self.counts[k] = n + 1
        self.merged += 1
        log.debug("merged duplicate input into point %d (count %d)", k, n + 1)

    def remove(self, k: int):
        self.state, self.data = remove_point(self.state, self.data, k, self.removal_mode, self.spec.signal_variance)
        del self.counts[k]

    def predict(self, grid) -> GaussianMap:
        return recursive_predict(self.state, self.data, self.spec, grid)

    def extend(self, observations: Sequence[Observation]):
        for obs in observations:
            self.add(obs)
