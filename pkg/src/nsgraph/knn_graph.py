"""Exact directed k-nearest-neighbor graph construction and persistence."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset_io import Dataset


class KnnError(ValueError):
    """Raised for invalid graph parameters or malformed graph files."""


def _euclidean_batch(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    diff = m - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _manhattan_batch(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.abs(m - q).sum(axis=1)


_METRICS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "euclidean": _euclidean_batch,
    "manhattan": _manhattan_batch,
}


def register_metric(name: str, batch_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> None:
    """Register a metric as a batch function mapping (point, m x d matrix) -> m distances."""
    _METRICS[name] = batch_fn


def metric_distance(a, b, metric: str = "euclidean") -> float:
    """Distance between two equal-dimension points under a registered metric."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise KnnError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric not in _METRICS:
        raise KnnError(f"unknown metric {metric!r}; registered: {sorted(_METRICS)}")
    return float(_METRICS[metric](a, b[None, :])[0])


@dataclass(frozen=True)
class KnnGraph:
    """Directed kNN graph: row i lists i's k nearest neighbors by ascending distance.

    Ties are broken by ascending neighbor id, so construction is deterministic.
    Distances are stored at build time and never recomputed downstream.
    """

    neighbors: np.ndarray  # (n, k) int64
    dists: np.ndarray  # (n, k) float64, each row non-decreasing
    metric_tag: str

    def __post_init__(self):
        nb = np.asarray(self.neighbors, dtype=np.int64)
        ds = np.asarray(self.dists, dtype=np.float64)
        if nb.ndim != 2 or nb.shape != ds.shape:
            raise KnnError(f"neighbors/dists shape mismatch: {nb.shape} vs {ds.shape}")
        n, k = nb.shape
        if not (1 <= k <= n - 1):
            raise KnnError(f"need 1 <= k <= n-1, got k={k}, n={n}")
        if nb.min() < 0 or nb.max() >= n:
            raise KnnError("neighbor id out of range")
        if np.any(nb == np.arange(n)[:, None]):
            raise KnnError("self-loop in neighbor list")
        row_sorted = np.sort(nb, axis=1)
        if np.any(row_sorted[:, 1:] == row_sorted[:, :-1]):
            raise KnnError("duplicate neighbor within a row")
        if not np.all(np.isfinite(ds)) or ds.min() < 0:
            raise KnnError("distances must be finite and >= 0")
        if np.any(ds[:, 1:] < ds[:, :-1]):
            raise KnnError("distances within a row must be non-decreasing")
        object.__setattr__(self, "neighbors", nb)
        object.__setattr__(self, "dists", ds)
        nb.flags.writeable = False
        ds.flags.writeable = False

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def n_edges(self) -> int:
        return self.neighbors.size

    def edge_sources(self) -> np.ndarray:
        """Source node of every edge, in edge-index order (edge e = (i, neighbors[i][j]), e = i*k+j)."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.k)

    def edge_targets(self) -> np.ndarray:
        """Target node of every edge, in edge-index order."""
        return self.neighbors.ravel()


def _select_row(dist_row: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick the k nearest by (distance, id) from one row of exact distances."""
    kth = np.partition(dist_row, k - 1)[k - 1]
    cand = np.flatnonzero(dist_row <= kth)
    order = np.lexsort((cand, dist_row[cand]))[:k]
    chosen = cand[order]
    return chosen, dist_row[chosen]


def build_knn(data: Dataset, k: int, metric: str = "euclidean") -> KnnGraph:
    """Build the exact directed kNN graph by brute force under a registered metric.

    Euclidean uses a blocked Gram-matrix prefilter to find candidates, then
    recomputes candidate distances with the registered metric function so the
    stored values agree with metric_distance; other metrics are evaluated
    directly row by row.
    """
    n = data.n
    if not (1 <= k <= n - 1):
        raise KnnError(f"need 1 <= k <= N-1, got k={k}, N={n}")
    if metric not in _METRICS:
        raise KnnError(f"unknown metric {metric!r}; registered: {sorted(_METRICS)}")
    batch = _METRICS[metric]
    x = data.points
    neighbors = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)

    if metric == "euclidean":
        sq_norms = np.einsum("ij,ij->i", x, x)
        # slack covers Gram-form rounding when picking candidates near the kth distance
        slack = 1e-9 * (sq_norms.max() + 1.0)
        chunk = max(1, min(n, 4_194_304 // max(n, 1) + 1))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            sq = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (x[start:stop] @ x.T)
            np.maximum(sq, 0.0, out=sq)
            sq[np.arange(stop - start), np.arange(start, stop)] = np.inf
            for i in range(start, stop):
                row = sq[i - start]
                kth = np.partition(row, k - 1)[k - 1]
                cand = np.flatnonzero(row <= kth + slack)
                exact = batch(x[i], x[cand])
                order = np.lexsort((cand, exact))[:k]
                neighbors[i] = cand[order]
                dists[i] = exact[order]
    else:
        for i in range(n):
            row = batch(x[i], x)
            row[i] = np.inf
            neighbors[i], dists[i] = _select_row(row, k)

    if not np.all(np.isfinite(dists)):
        raise KnnError("non-finite distance computed")
    return KnnGraph(neighbors=neighbors, dists=dists, metric_tag=metric)


def save_edge_list(graph: KnnGraph, path) -> None:
    """Write the graph as text: header "n k metric_tag", then one "src dst distance" line per edge."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{graph.n} {graph.k} {graph.metric_tag}\n")
        src = graph.edge_sources()
        dst = graph.edge_targets()
        dist = graph.dists.ravel()
        for e in range(graph.n_edges):
            fh.write(f"{src[e]} {dst[e]} {dist[e]:.17g}\n")


def load_edge_list(path) -> KnnGraph:
    """Read a graph written by save_edge_list (distances round-trip bit-exactly)."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise KnnError(f"{path}: bad header {header!r}")
        n, k, tag = int(header[0]), int(header[1]), header[2]
        neighbors = np.empty((n, k), dtype=np.int64)
        dists = np.empty((n, k), dtype=np.float64)
        for e in range(n * k):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise KnnError(f"{path}: truncated at edge {e}")
            i, j = divmod(e, k)
            if int(parts[0]) != i:
                raise KnnError(f"{path}: edge {e} out of row-major order")
            neighbors[i, j] = int(parts[1])
            dists[i, j] = float(parts[2])
    return KnnGraph(neighbors=neighbors, dists=dists, metric_tag=tag)
