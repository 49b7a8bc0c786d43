"""Round-based multi-robot simulation: sense, local update, compress, consensus exchange."""
from __future__ import annotations

import copy
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..consensus import (
    ConsensusState,
    centralized_poe,
    consensus_step,
    recover_map,
    reference_input,
)
from ..field_env import ScalarField, robot_rng, sample
from ..gp_core import Dataset, GaussianMap, NumericalError, OnlineGP, batch_predict
from ..network_sim import CommGraph, graph_from_positions, weights_from_graph
from ..sparsify import compress
from .config import ScenarioConfig

log = logging.getLogger(__name__)

TIMING_WINDOW = 10
TIMING_FIELDS = ("pred_time", "compress_time")


class SimulationError(RuntimeError):
    def __init__(self, robot: int, round_: int, cause: Exception):
        super().__init__(f"robot {robot}, round {round_}: {cause}")
        self.robot = robot
        self.round = round_
        self.cause = cause


@dataclass
class RoundRecord:
    round: int
    robot_id: int
    rmse_local: float
    rmse_distributed: float
    consensus_err_vs_poe: float
    dataset_size: int
    pred_time: float
    compress_time: float


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    records: list[RoundRecord]
    grid: np.ndarray
    local_maps: list[GaussianMap]
    distributed_maps: list[GaussianMap]
    poe_map: GaussianMap
    datasets: list[Dataset]
    graphs: list[CommGraph] = field(repr=False)
    visited: list[np.ndarray] = field(repr=False)


def rmse(m: GaussianMap, truth: ScalarField) -> float:
    err = m.mean - truth(m.grid)
    return float(np.sqrt(np.mean(err * err)))


class _Robot:
    def __init__(self, rid: int, cfg: ScenarioConfig, traj, truth: ScalarField):
        self.rid = rid
        self.gp = OnlineGP(cfg.kernel(), cfg.removal_mode)
        self.traj = traj
        self.truth = truth
        self.rng = robot_rng(cfg.seed, rid)
        self.noise_sd = float(np.sqrt(cfg.noise_variance))
        self.cursor = 0
        self.xi: ConsensusState | None = None
        self.dist_map: GaussianMap | None = None
        self.pred_times: deque[float] = deque(maxlen=TIMING_WINDOW)
        self.compress_times: deque[float] = deque(maxlen=TIMING_WINDOW)

    @property
    def position(self) -> np.ndarray:
        return self.traj.positions[max(self.cursor - 1, 0)]

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.traj)


def run_scenario(cfg: ScenarioConfig, on_round: Callable[[int, list, list], None] | None = None) -> ScenarioResult:
    """Simulate every robot for ``cfg.rounds`` synchronous rounds.

    Within a round each robot takes up to ``local_steps_per_round`` samples (adding each
    and compressing whenever its dataset exceeds the budget), publishes a new reference
    input, and then all robots run one consensus step against the previous-round states
    of their current neighbors.  ``on_round(round, local_maps, distributed_maps)`` is
    called after each exchange if given.
    """
    truth = cfg.scalar_field()
    grid = cfg.grid()
    spars = cfg.sparsity()
    sn2 = cfg.correction_variance
    kernel = cfg.kernel()
    robots = [_Robot(i, cfg, t, truth) for i, t in enumerate(cfg.trajectories())]
    records: list[RoundRecord] = []
    graphs: list[CommGraph] = []
    visited = [[] for _ in robots]
    local_maps: list[GaussianMap] = []

    for rnd in range(cfg.rounds):
        local_maps = []
        refs = []
        for rb in robots:
            try:
                comp_t = 0.0
                for _ in range(cfg.local_steps_per_round):
                    if rb.done:
                        break
                    x = rb.traj.positions[rb.cursor]
                    rb.gp.add(sample(truth, x, rb.noise_sd, rb.rng, rb.rid, rb.cursor))
                    visited[rb.rid].append(x)
                    rb.cursor += 1
                    if spars is not None and len(rb.gp) > spars.budget:
                        target = rb.dist_map if cfg.compression == "distributed" else None
                        t0 = time.perf_counter()
                        rb.gp.data, rb.gp.state, k = compress(rb.gp.data, rb.gp.state, target, spars, kernel)
                        del rb.gp.counts[k]
                        comp_t += time.perf_counter() - t0
                t0 = time.perf_counter()
                lm = rb.gp.predict(grid)
                rb.pred_times.append(time.perf_counter() - t0)
                rb.compress_times.append(comp_t)
            except (NumericalError, ArithmeticError, ValueError) as err:
                raise SimulationError(rb.rid, rnd, err) from err
            local_maps.append(lm)
            refs.append(reference_input(lm, sn2))

        graph = graph_from_positions([rb.position for rb in robots], cfg.comm_range, timestamp=rnd)
        graphs.append(graph)
        A = weights_from_graph(graph, cfg.edge_weight, cfg.weight_floor).weights
        for rb, ref in zip(robots, refs):
            if rb.xi is None:
                rb.xi = ConsensusState.from_reference(ref, grid)
        snapshot = [rb.xi for rb in robots]
        for rb, ref in zip(robots, refs):
            nbrs = graph.neighbors(rb.rid)
            rb.xi = consensus_step(snapshot[rb.rid], [snapshot[j] for j in nbrs], A[rb.rid, nbrs], ref)
            rb.dist_map = recover_map(rb.xi)

        if on_round is not None:
            on_round(rnd, local_maps, [rb.dist_map for rb in robots])
        poe = centralized_poe(local_maps, sn2)
        for rb, lm in zip(robots, local_maps):
            records.append(RoundRecord(
                round=rnd,
                robot_id=rb.rid,
                rmse_local=rmse(lm, truth),
                rmse_distributed=rmse(rb.dist_map, truth),
                consensus_err_vs_poe=float(np.abs(rb.dist_map.mean - poe.mean).max()),
                dataset_size=len(rb.gp),
                pred_time=float(np.median(rb.pred_times)),
                compress_time=float(np.median(rb.compress_times)),
            ))

    return ScenarioResult(
        config=cfg,
        records=records,
        grid=grid,
        local_maps=local_maps,
        distributed_maps=[rb.dist_map for rb in robots],
        poe_map=centralized_poe(local_maps, sn2),
        datasets=[rb.gp.data for rb in robots],
        graphs=graphs,
        visited=[np.array(v) for v in visited],
    )


def _timed_step(gp: OnlineGP, obs, spars, kernel, dist_map, grid) -> float:
    t0 = time.perf_counter()
    gp.add(obs)
    if spars is not None and len(gp) > spars.budget:
        gp.data, gp.state, k = compress(gp.data, gp.state, dist_map, spars, kernel)
        del gp.counts[k]
    gp.predict(grid)
    return time.perf_counter() - t0


def profile_step_times(cfg: ScenarioConfig, checkpoints=(200, 1000), window: int = TIMING_WINDOW,
                       compression: bool = True, repeats: int = 5) -> dict[int, float]:
    """Median single-robot per-step time (add + compress + predict) at each cumulative N.

    Robot 0's path is extended by repetition to the largest checkpoint.  The stream is
    run once, snapshotting the robot at every checkpoint; the ``window`` steps after each
    snapshot are then replayed from copies ``repeats`` times, alternating checkpoints so
    step by step so that drift in machine load affects all of them alike.
    """
    truth = cfg.scalar_field()
    grid = cfg.grid()
    kernel = cfg.kernel()
    spars = cfg.sparsity() if compression else None
    distributed = spars is not None and cfg.compression == "distributed"
    traj = cfg.trajectories()[0].positions
    rng = robot_rng(cfg.seed, 0)
    gp = OnlineGP(kernel, cfg.removal_mode)
    noise_sd = float(np.sqrt(cfg.noise_variance))
    jitter = np.random.default_rng(cfg.seed + 1)
    snapshots = {}
    dist_map = None
    for n in range(1, max(checkpoints) + window + 1):
        x = traj[(n - 1) % len(traj)]
        if n > len(traj):
            # avoid exact repeats of earlier inputs on wrap-around
            x = x + jitter.uniform(-1e-3, 1e-3, size=x.shape)
        obs = sample(truth, x, noise_sd, rng, 0, n)
        for c in checkpoints:
            if n == c:
                snapshots[c] = (copy.deepcopy(gp), dist_map, [])
            if c <= n < c + window:
                snapshots[c][2].append(obs)
        gp.add(obs)
        if spars is not None and len(gp) > spars.budget:
            gp.data, gp.state, k = compress(gp.data, gp.state, dist_map, spars, kernel)
            del gp.counts[k]
        if distributed and dist_map is None:
            # a single robot's distributed map is its own local map
            dist_map = gp.predict(grid)
    times = {c: [] for c in checkpoints}
    for _ in range(repeats):
        live = {c: copy.deepcopy(snapshots[c][0]) for c in checkpoints}
        for i in range(window):
            for c in checkpoints:
                _, dmap, stream = snapshots[c]
                times[c].append(_timed_step(live[c], stream[i], spars, kernel, dmap, grid))
    return {c: float(np.median(v)) for c, v in times.items()}


def centralized_batch(cfg: ScenarioConfig) -> tuple[GaussianMap, float]:
    """Full GPR on the pooled samples of every robot; returns the map and its wall time."""
    truth = cfg.scalar_field()
    obs = []
    for rid, traj in enumerate(cfg.trajectories()):
        rng = robot_rng(cfg.seed, rid)
        sd = float(np.sqrt(cfg.noise_variance))
        obs += [sample(truth, x, sd, rng, rid, k) for k, x in enumerate(traj.positions)]
    t0 = time.perf_counter()
    m = batch_predict(Dataset(obs), cfg.kernel(), cfg.grid())
    return m, time.perf_counter() - t0


def centralized_recursive(cfg: ScenarioConfig) -> tuple[GaussianMap, float]:
    """Recursive GP on the pooled stream, interleaving robots step by step."""
    truth = cfg.scalar_field()
    trajs = cfg.trajectories()
    rngs = [robot_rng(cfg.seed, rid) for rid in range(len(trajs))]
    sd = float(np.sqrt(cfg.noise_variance))
    gp = OnlineGP(cfg.kernel())
    t0 = time.perf_counter()
    for k in range(cfg.samples_per_robot):
        for rid, traj in enumerate(trajs):
            gp.add(sample(truth, traj.positions[k], sd, rngs[rid], rid, k))
    m = gp.predict(cfg.grid())
    return m, time.perf_counter() - t0


def compare_variants(cfg: ScenarioConfig) -> list[dict]:
    """RMSE and wall time for the five mapping variants on one scenario."""
    truth = cfg.scalar_field()
    rows = []
    m, dt = centralized_batch(cfg)
    rows.append({"variant": "full_gpr", "rmse": rmse(m, truth), "time_s": dt, "points_per_robot": cfg.samples_per_robot})
    m, dt = centralized_recursive(cfg)
    rows.append({"variant": "recursive", "rmse": rmse(m, truth), "time_s": dt, "points_per_robot": cfg.samples_per_robot})
    for name, mode in (("distributed_no_compress", "none"), ("local_compress", "local"),
                       ("distributed_compress", "distributed")):
        t0 = time.perf_counter()
        res = run_scenario(cfg.with_overrides(compression=mode))
        dt = time.perf_counter() - t0
        err = float(np.mean([rmse(d, truth) for d in res.distributed_maps]))
        rows.append({"variant": name, "rmse": err, "time_s": dt,
                     "points_per_robot": max(len(d) for d in res.datasets)})
    return rows
