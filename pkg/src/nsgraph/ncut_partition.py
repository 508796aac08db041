"""Recursive two-way normalized-cut partitioning of a filtered graph component.

The directed filtered graph is first symmetrized (an undirected edge survives
if either direction did). Each connected piece is split by thresholding the
second-smallest generalized eigenvector of (D - W) x = lambda D x; a split is
kept only while the cut value stays below the cut threshold and the
eigenvector histogram looks bimodal enough (stability ratio at or below the
stability threshold). Pieces smaller than the minimum cluster size, or deeper
than the maximum recursion depth, become leaves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .knn_graph import KnnGraph

UNASSIGNED = -1

_DENSE_EIG_LIMIT = 512
_EIG_MAX_ITER = 10_000
_RESIDUAL_TOL = 1e-8


class NcutError(ValueError):
    """Raised for degenerate graphs, bad parameters, or eigen-solver failures."""


@dataclass(frozen=True)
class UGraph:
    """Undirected unweighted subgraph over a subset of original node ids."""

    node_ids: np.ndarray  # sorted original ids
    adj: sp.csr_matrix  # symmetric 0/1, no self-loops
    n_total: int  # size of the original node universe
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        ids = np.asarray(self.node_ids, dtype=np.int64)
        if ids.size == 0:
            raise NcutError("empty node subset")
        if np.any(np.diff(ids) <= 0):
            raise NcutError("node_ids must be sorted and unique")
        if self.adj.shape != (ids.size, ids.size):
            raise NcutError("adjacency shape does not match node subset")
        if (self.adj != self.adj.T).nnz != 0:
            raise NcutError("adjacency must be symmetric")
        if self.adj.diagonal().any():
            raise NcutError("self-loops not allowed")
        object.__setattr__(self, "node_ids", ids)
        ids.flags.writeable = False
        deg = np.asarray(self.adj.sum(axis=1), dtype=np.int64).ravel()
        deg.flags.writeable = False
        object.__setattr__(self, "degrees", deg)

    @property
    def n(self) -> int:
        return self.node_ids.size

    @property
    def n_edges(self) -> int:
        return self.adj.nnz // 2

    def induced(self, local_index) -> "UGraph":
        idx = np.flatnonzero(local_index) if np.asarray(local_index).dtype == bool else np.asarray(local_index)
        return UGraph(
            node_ids=self.node_ids[idx],
            adj=self.adj[idx][:, idx],
            n_total=self.n_total,
        )


@dataclass(frozen=True)
class NcutParams:
    """Recursion controls: cut ceiling, stability ceiling, size floor, depth cap."""

    cut_threshold: float = 0.1
    stability_threshold: float = 0.04
    min_cluster_size: int = 50
    max_depth: int = 10
    n_candidates: int = 64
    stability_bins: int = 10

    def __post_init__(self):
        if min(self.cut_threshold, self.stability_threshold) <= 0:
            raise NcutError("thresholds must be positive")
        if min(self.min_cluster_size, self.max_depth) <= 0:
            raise NcutError("min_cluster_size and max_depth must be positive")
        if self.n_candidates < 2 or self.stability_bins < 2:
            raise NcutError("n_candidates and stability_bins must be >= 2")


@dataclass(frozen=True)
class Partition:
    """Cluster id per node of the original universe; UNASSIGNED (-1) where uncovered."""

    cluster_id: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        cid = np.asarray(self.cluster_id, dtype=np.int64)
        assigned = cid[cid != UNASSIGNED]
        if assigned.size:
            present = np.unique(assigned)
            if present[0] < 0 or present[-1] != present.size - 1:
                raise NcutError("cluster ids must be contiguous from 0")
        object.__setattr__(self, "cluster_id", cid)
        cid.flags.writeable = False

    @property
    def n_clusters(self) -> int:
        assigned = self.cluster_id[self.cluster_id != UNASSIGNED]
        return int(assigned.max()) + 1 if assigned.size else 0

    @property
    def sizes(self) -> np.ndarray:
        assigned = self.cluster_id[self.cluster_id != UNASSIGNED]
        return np.bincount(assigned, minlength=self.n_clusters)

    @property
    def n_unassigned(self) -> int:
        return int(np.sum(self.cluster_id == UNASSIGNED))


def canonical_partition(raw: np.ndarray, warnings: tuple[str, ...] = ()) -> Partition:
    """Relabel clusters to the deterministic (decreasing size, min node id) order."""
    raw = np.asarray(raw, dtype=np.int64)
    out = np.full(raw.size, UNASSIGNED, dtype=np.int64)
    assigned = raw != UNASSIGNED
    if assigned.any():
        _, inv = np.unique(raw[assigned], return_inverse=True)
        sizes = np.bincount(inv)
        min_id = np.full(sizes.size, raw.size, dtype=np.int64)
        np.minimum.at(min_id, inv, np.flatnonzero(assigned))
        order = np.lexsort((min_id, -sizes))
        rank = np.empty(sizes.size, dtype=np.int64)
        rank[order] = np.arange(sizes.size)
        out[assigned] = rank[inv]
    return Partition(cluster_id=out, warnings=warnings)


def symmetrize(graph: KnnGraph, keep_mask: np.ndarray, node_subset) -> UGraph:
    """Undirected subgraph over node_subset: edge {u, v} iff either direction survived the mask."""
    subset = np.unique(np.asarray(node_subset, dtype=np.int64))
    if subset.size == 0:
        raise NcutError("empty node subset")
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (graph.n_edges,):
        raise NcutError("keep_mask not aligned with graph edges")
    in_sub = np.zeros(graph.n, dtype=bool)
    in_sub[subset] = True
    src = graph.edge_sources()[keep_mask]
    dst = graph.edge_targets()[keep_mask]
    both = in_sub[src] & in_sub[dst]
    remap = np.full(graph.n, -1, dtype=np.int64)
    remap[subset] = np.arange(subset.size)
    a = remap[src[both]]
    b = remap[dst[both]]
    m = subset.size
    w = sp.csr_matrix((np.ones(a.size, dtype=np.int64), (a, b)), shape=(m, m))
    w = ((w + w.T) > 0).astype(np.int64)
    return UGraph(node_ids=subset, adj=w.tocsr(), n_total=graph.n)


def _second_smallest_pair(g: UGraph) -> np.ndarray:
    """Eigenvector for the second-smallest eigenvalue of the degree-normalized problem."""
    n = g.n
    deg = g.degrees.astype(np.float64)
    dinv = 1.0 / np.sqrt(deg)
    if n <= _DENSE_EIG_LIMIT:
        a = g.adj.toarray().astype(np.float64)
        lsym = np.eye(n) - dinv[:, None] * a * dinv[None, :]
        _, vecs = np.linalg.eigh(lsym)
        v = vecs[:, 1]
    else:
        p = sp.diags(dinv) @ g.adj.astype(np.float64) @ sp.diags(dinv)
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            vals, vecs = eigsh(p, k=2, which="LA", v0=v0, maxiter=_EIG_MAX_ITER)
        except ArpackNoConvergence as exc:
            raise NcutError(f"eigen-iteration did not converge: {exc}") from exc
        except ArpackError as exc:
            raise NcutError(f"eigen-solver failure: {exc}") from exc
        v = vecs[:, int(np.argmin(vals))]
    return dinv * v


def fiedler_vector(g: UGraph) -> np.ndarray:
    """Unit-length generalized Fiedler vector of a connected UGraph.

    Solves (D - W) x = lambda D x for the second-smallest eigenvalue via the
    symmetric degree-normalized form; the sign is fixed so the entry of the
    smallest node id is nonnegative (first nonzero entry positive on a tie).
    """
    if g.n < 2:
        raise NcutError(f"need at least 2 nodes, got {g.n}")
    if g.degrees.min() == 0:
        raise NcutError("isolated node (degree 0)")
    x = _second_smallest_pair(g)
    x = x / np.linalg.norm(x)
    nonzero = np.flatnonzero(x)
    if nonzero.size and x[nonzero[0]] < 0:
        x = -x
    deg = g.degrees.astype(np.float64)
    dx = deg * x
    lap_x = dx - g.adj @ x
    lam = float(x @ lap_x) / float(x @ dx)
    residual = float(np.linalg.norm(lap_x - lam * dx))
    if residual > _RESIDUAL_TOL:
        raise NcutError(f"eigenpair residual {residual:.3e} exceeds {_RESIDUAL_TOL:.0e}")
    x.flags.writeable = False
    return x


def ncut_value(g: UGraph, mask_a: np.ndarray) -> float:
    """Normalized-cut objective cut/assoc(A) + cut/assoc(B) for a bipartition."""
    mask_a = np.asarray(mask_a, dtype=bool)
    deg = g.degrees
    assoc_a = int(deg[mask_a].sum())
    assoc_b = int(deg[~mask_a].sum())
    if assoc_a == 0 or assoc_b == 0:
        raise NcutError("degenerate bipartition")
    cut = int(g.adj[mask_a][:, ~mask_a].sum())
    return cut / assoc_a + cut / assoc_b


def best_split(
    eigvec: np.ndarray, g: UGraph, n_candidates: int = 64
) -> tuple[np.ndarray, float]:
    """Best eigenvector-threshold bipartition under the normalized-cut objective.

    Thresholds are evenly spaced between the smallest and largest eigenvector
    entries; side A collects entries <= threshold. Returns the boolean A-mask
    and its cut value.
    """
    x = np.asarray(eigvec, dtype=np.float64)
    if x.shape != (g.n,):
        raise NcutError("eigenvector not aligned with graph")
    if g.n < 2:
        raise NcutError("need at least 2 nodes to split")
    ts = np.linspace(x.min(), x.max(), n_candidates)
    coo = sp.triu(g.adj, k=1).tocoo()
    lo = np.sort(np.minimum(x[coo.row], x[coo.col]))
    hi = np.sort(np.maximum(x[coo.row], x[coo.col]))
    cuts = np.searchsorted(lo, ts, side="right") - np.searchsorted(hi, ts, side="right")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    deg = g.degrees.astype(np.float64)
    cum_deg = np.cumsum(deg[order])
    count_a = np.searchsorted(xs, ts, side="right")
    total = cum_deg[-1]
    assoc_a = np.where(count_a > 0, cum_deg[np.maximum(count_a - 1, 0)], 0.0)
    assoc_b = total - assoc_a
    valid = (count_a > 0) & (count_a < g.n) & (assoc_a > 0) & (assoc_b > 0)
    if not valid.any():
        raise NcutError("all candidate splits degenerate")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = cuts / assoc_a + cuts / assoc_b
    values = np.where(valid, values, np.inf)
    best = int(np.argmin(values))
    return x <= ts[best], float(values[best])


def stability(eigvec: np.ndarray, bins: int = 10) -> float:
    """Histogram min/max bin-count ratio; near 1 for smooth vectors, near 0 for bimodal ones."""
    if bins < 2:
        raise NcutError(f"bins must be >= 2, got {bins}")
    x = np.asarray(eigvec, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return 1.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    return float(counts.min()) / float(counts.max())


def ncut_recursive(g: UGraph, params: NcutParams) -> Partition:
    """Recursively bipartition a UGraph into clusters under the stopping rules.

    Disconnected pieces are first separated into connected components (one
    recursion level). A piece becomes a leaf cluster when it is too small,
    too deep, its best cut is worse than cut_threshold, its eigenvector is too
    smooth (stability above stability_threshold), or the eigen-solver fails
    (recorded as a warning).
    """
    raw = np.full(g.n_total, UNASSIGNED, dtype=np.int64)
    warnings: list[str] = []
    next_id = [0]

    def leaf(sub: UGraph) -> None:
        raw[sub.node_ids] = next_id[0]
        next_id[0] += 1

    def recurse(sub: UGraph, depth: int) -> None:
        if sub.n < params.min_cluster_size or depth >= params.max_depth:
            leaf(sub)
            return
        n_comp, comp = connected_components(sub.adj, directed=False)
        if n_comp > 1:
            for c in range(n_comp):
                recurse(sub.induced(comp == c), depth + 1)
            return
        if sub.n < 2:
            leaf(sub)
            return
        try:
            x = fiedler_vector(sub)
            mask_a, value = best_split(x, sub, params.n_candidates)
        except NcutError as exc:
            warnings.append(f"branch of {sub.n} nodes frozen: {exc}")
            leaf(sub)
            return
        if value > params.cut_threshold:
            leaf(sub)
            return
        if stability(x, params.stability_bins) > params.stability_threshold:
            leaf(sub)
            return
        recurse(sub.induced(mask_a), depth + 1)
        recurse(sub.induced(~mask_a), depth + 1)

    recurse(g, 0)
    return canonical_partition(raw, warnings=tuple(warnings))


def save_partition(p: Partition, path) -> None:
    """Write one "node_id cluster_id" line per node (UNASSIGNED = -1)."""
    with open(path, "w", encoding="utf-8") as fh:
        for node, cid in enumerate(p.cluster_id):
            fh.write(f"{node} {cid}\n")


def load_partition(path) -> Partition:
    """Read a file written by save_partition."""
    path = Path(path)
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            node, cid = line.split()
            pairs.append((int(node), int(cid)))
    if not pairs:
        raise NcutError(f"{path}: empty partition file")
    pairs.sort()
    return Partition(cluster_id=np.array([c for _, c in pairs], dtype=np.int64))
