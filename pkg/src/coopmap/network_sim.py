"""Distance-based communication graphs and doubly-stochastic consensus weights."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class CommGraph:
    robot_count: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    timestamp: int = 0

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-edge ({i}, {i}) not allowed")
            if not (0 <= i < self.robot_count and 0 <= j < self.robot_count):
                raise ValueError(f"edge ({i}, {j}) outside robot range")
        object.__setattr__(self, "edges", edges)

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def degree(self, i: int) -> int:
        return sum(1 for a, _ in self.edges if a == i)

    def is_symmetric(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)

    def is_strongly_connected(self) -> bool:
        return _strongly_connected(self.robot_count, self.edges)


@dataclass(frozen=True)
class AdjacencyMatrix:
    weights: np.ndarray

    def validate(self, weight_floor: float) -> list[str]:
        """Problems with row/column stochasticity and the non-degeneracy floor."""
        A = self.weights
        problems = []
        if np.any(np.abs(A.sum(1) - 1) > STOCHASTIC_TOL):
            problems.append("row sums differ from 1")
        if np.any(np.abs(A.sum(0) - 1) > STOCHASTIC_TOL):
            problems.append("column sums differ from 1")
        if np.any(np.diag(A) < weight_floor - STOCHASTIC_TOL):
            problems.append(f"diagonal entry below floor {weight_floor}")
        off = A[~np.eye(A.shape[0], dtype=bool)]
        bad = (off != 0) & ((off < weight_floor - STOCHASTIC_TOL) | (off > 1 + STOCHASTIC_TOL))
        if np.any(bad):
            problems.append(f"off-diagonal entry outside {{0}} U [{weight_floor}, 1]")
        return problems


def _strongly_connected(p: int, edges: Iterable[tuple[int, int]]) -> bool:
    if p <= 1:
        return True
    edges = list(edges)
    if not edges:
        return False
    rows, cols = zip(*edges)
    g = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(p, p))
    n, _ = connected_components(g, directed=True, connection="strong")
    return n == 1


def graph_from_positions(positions, comm_range: float, timestamp: int = 0) -> CommGraph:
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos.reshape(-1, 1)
    p = pos.shape[0]
    if p < 1 or comm_range <= 0:
        raise ValueError("need at least one robot and a positive comm_range")
    d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    linked = (d > 0) & (d <= comm_range)
    edges = frozenset(zip(*map(lambda a: a.tolist(), np.nonzero(linked))))
    return CommGraph(p, edges, timestamp)


def weights_from_graph(g: CommGraph, edge_weight: float, weight_floor: float | None = None) -> AdjacencyMatrix:
    """Uniform edge weight, diagonal completes each row to one."""
    floor = edge_weight if weight_floor is None else weight_floor
    p = g.robot_count
    A = np.zeros((p, p))
    for i, j in g.edges:
        A[i, j] = edge_weight
    for i in range(p):
        diag = 1.0 - A[i].sum()
        if diag < floor - STOCHASTIC_TOL:
            raise ValueError(f"robot {i} has degree {g.degree(i)}: edge weight {edge_weight} "
                             f"leaves self-weight {diag:.3g} below {floor}")
        A[i, i] = diag
    return AdjacencyMatrix(A)


def check_periodic_connectivity(graphs: Sequence[CommGraph], B: int) -> bool:
    """True iff every window of ``B`` consecutive graphs has a strongly connected union."""
    if B < 1:
        raise ValueError("B must be >= 1")
    if len(graphs) < B:
        raise ValueError(f"need at least {B} graphs, got {len(graphs)}")
    p = graphs[0].robot_count
    for start in range(len(graphs) - B + 1):
        union = set()
        for g in graphs[start:start + B]:
            union |= g.edges
        if not _strongly_connected(p, union):
            return False
    return True


def disagreement_contraction(A: np.ndarray) -> float:
    """Spectral norm of ``A`` restricted to the subspace orthogonal to the all-ones vector."""
    p = A.shape[0]
    P = np.eye(p) - np.full((p, p), 1.0 / p)
    return float(np.linalg.norm(P @ A @ P, 2))


def format_trace(graphs: Iterable[CommGraph]) -> str:
    """One line per round: ``<round> <robot_count> <i>-<j> ...`` with edges sorted."""
    lines = []
    for g in graphs:
        edges = " ".join(f"{i}-{j}" for i, j in sorted(g.edges))
        lines.append(f"{g.timestamp} {g.robot_count}" + (f" {edges}" if edges else ""))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_trace(text: str) -> list[CommGraph]:
    graphs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        edges = [tuple(int(v) for v in tok.split("-")) for tok in parts[2:]]
        graphs.append(CommGraph(int(parts[1]), frozenset(edges), int(parts[0])))
    return graphs


def write_trace(graphs: Iterable[CommGraph], path: str | Path):
    Path(path).write_text(format_trace(graphs), encoding="utf-8", newline="\n")
