"""Per-edge neighborhood-similarity scores for a kNN graph.

Each directed edge (u, v) gets three scores:

* ``sK`` — the maximum absolute gap between the cumulative counts of u's and
  v's neighbor-distance lists, taken over all real thresholds. This is k times
  the classical two-sample K-S statistic and lies in 0..k.
* ``sJ`` — the number of out-neighbors the two nodes share, in 0..k-1.
* ``sA`` — harmonic mean of (sJ+1)/k and 1 - sK/(k+1), in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .knn_graph import KnnGraph, KnnError


class ScoreError(ValueError):
    """Raised for score arguments outside their admissible ranges."""


@dataclass(frozen=True)
class EdgeScores:
    """Scores aligned with KnnGraph edge enumeration (edge e = (i, neighbors[i][j]), e = i*k+j)."""

    sk: np.ndarray  # int64 per edge, 0..k
    sj: np.ndarray  # int64 per edge, 0..k-1
    sa: np.ndarray  # float64 per edge, (0, 1]
    k: int

    def __post_init__(self):
        sk = np.asarray(self.sk, dtype=np.int64)
        sj = np.asarray(self.sj, dtype=np.int64)
        sa = np.asarray(self.sa, dtype=np.float64)
        if not (sk.shape == sj.shape == sa.shape) or sk.ndim != 1:
            raise ScoreError("score arrays must be 1-D and aligned")
        if sk.size and (sk.min() < 0 or sk.max() > self.k):
            raise ScoreError(f"sK out of range 0..{self.k}")
        if sj.size and (sj.min() < 0 or sj.max() > self.k - 1):
            raise ScoreError(f"sJ out of range 0..{self.k - 1}")
        if sa.size and (sa.min() <= 0 or sa.max() > 1.0):
            raise ScoreError("sA out of range (0, 1]")
        for name, arr in (("sk", sk), ("sj", sj), ("sa", sa)):
            object.__setattr__(self, name, arr)
            arr.flags.writeable = False

    @property
    def n_edges(self) -> int:
        return self.sk.size


def ks_count(dists_u, dists_v) -> int:
    """Maximum cumulative-count gap between two sorted distance lists.

    Single merge pass; all items tied at an equal value are consumed from both
    lists before the counter gap is read, so the statistic is threshold-based.
    """
    u = list(dists_u)
    v = list(dists_v)
    if len(u) != len(v):
        raise ScoreError(f"length mismatch: {len(u)} vs {len(v)}")
    k = len(u)
    assert all(u[i] <= u[i + 1] for i in range(k - 1)), "dists_u not sorted"
    assert all(v[i] <= v[i + 1] for i in range(k - 1)), "dists_v not sorted"
    i = j = 0
    gap = 0
    best = 0
    while i < k or j < k:
        if j >= k or (i < k and u[i] <= v[j]):
            t = u[i]
        else:
            t = v[j]
        while i < k and u[i] == t:
            i += 1
            gap += 1
        while j < k and v[j] == t:
            j += 1
            gap -= 1
        if abs(gap) > best:
            best = abs(gap)
    return best


def _ks_count_batch(du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Vectorized ks_count over aligned rows of two (m, k) sorted-distance arrays."""
    m, k = du.shape
    allv = np.concatenate([du, dv], axis=1)
    order = np.argsort(allv, axis=1, kind="stable")
    svals = np.take_along_axis(allv, order, axis=1)
    signs = np.where(order < k, 1, -1)
    gaps = np.cumsum(signs, axis=1)
    readable = np.empty((m, 2 * k), dtype=bool)
    readable[:, -1] = True
    readable[:, :-1] = svals[:, 1:] != svals[:, :-1]
    return np.max(np.abs(gaps) * readable, axis=1).astype(np.int64)


def shared_neighbors(graph: KnnGraph, edge: tuple[int, int]) -> int:
    """Count of out-neighbors shared by the two endpoints of an existing edge."""
    u, v = edge
    if v not in graph.neighbors[u]:
        raise KnnError(f"edge ({u}, {v}) not in graph")
    return len(set(graph.neighbors[u].tolist()) & set(graph.neighbors[v].tolist()))


def combined_similarity(sj: int, sk: int, k: int) -> float:
    """Harmonic mean of the rescaled shared-neighbor and distance-distribution scores."""
    if k < 1:
        raise ScoreError(f"k must be >= 1, got {k}")
    if not (0 <= sj <= k - 1):
        raise ScoreError(f"sJ={sj} out of range 0..{k - 1}")
    if not (0 <= sk <= k):
        raise ScoreError(f"sK={sk} out of range 0..{k}")
    a = (sj + 1) / k
    b = 1.0 - sk / (k + 1)
    return 2.0 * a * b / (a + b)


def _combined_batch(sj: np.ndarray, sk: np.ndarray, k: int) -> np.ndarray:
    a = (sj + 1.0) / k
    b = 1.0 - sk / (k + 1.0)
    return 2.0 * a * b / (a + b)


def score_all_edges(graph: KnnGraph, block: int = 262_144) -> EdgeScores:
    """Score every edge of the graph; deterministic and order-independent."""
    n, k = graph.n, graph.k
    src = graph.edge_sources()
    dst = graph.edge_targets()

    adj = sp.csr_matrix(
        (np.ones(graph.n_edges, dtype=np.int32), (src, dst)), shape=(n, n)
    )
    sj = np.empty(graph.n_edges, dtype=np.int64)
    sk = np.empty(graph.n_edges, dtype=np.int64)
    for start in range(0, graph.n_edges, block):
        stop = min(start + block, graph.n_edges)
        u = src[start:stop]
        v = dst[start:stop]
        sj[start:stop] = np.asarray(
            adj[u].multiply(adj[v]).sum(axis=1), dtype=np.int64
        ).ravel()
        sk[start:stop] = _ks_count_batch(graph.dists[u], graph.dists[v])
    sa = _combined_batch(sj, sk, k)
    return EdgeScores(sk=sk, sj=sj, sa=sa, k=k)


def save_scored_edges(graph: KnnGraph, scores: EdgeScores, path) -> None:
    """Write "src dst dist sK sJ sA" lines under the usual "n k metric_tag" header."""
    if scores.n_edges != graph.n_edges:
        raise ScoreError("scores not aligned with graph")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{graph.n} {graph.k} {graph.metric_tag}\n")
        src = graph.edge_sources()
        dst = graph.edge_targets()
        dist = graph.dists.ravel()
        for e in range(graph.n_edges):
            fh.write(
                f"{src[e]} {dst[e]} {dist[e]:.17g} "
                f"{scores.sk[e]} {scores.sj[e]} {scores.sa[e]:.17g}\n"
            )


def load_scored_edges(path) -> tuple[KnnGraph, EdgeScores]:
    """Read a file written by save_scored_edges."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise KnnError(f"{path}: bad header {header!r}")
        n, k, tag = int(header[0]), int(header[1]), header[2]
        neighbors = np.empty((n, k), dtype=np.int64)
        dists = np.empty((n, k), dtype=np.float64)
        sk = np.empty(n * k, dtype=np.int64)
        sj = np.empty(n * k, dtype=np.int64)
        sa = np.empty(n * k, dtype=np.float64)
        for e in range(n * k):
            parts = fh.readline().split()
            if len(parts) != 6:
                raise KnnError(f"{path}: truncated or malformed at edge {e}")
            i, j = divmod(e, k)
            if int(parts[0]) != i:
                raise KnnError(f"{path}: edge {e} out of row-major order")
            neighbors[i, j] = int(parts[1])
            dists[i, j] = float(parts[2])
            sk[e] = int(parts[3])
            sj[e] = int(parts[4])
            sa[e] = float(parts[5])
    graph = KnnGraph(neighbors=neighbors, dists=dists, metric_tag=tag)
    return graph, EdgeScores(sk=sk, sj=sj, sa=sa, k=k)
