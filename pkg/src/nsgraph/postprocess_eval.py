"""Cluster re-merging, small-cluster reassignment, and F-measure evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .knn_graph import KnnGraph
from .ncut_partition import UNASSIGNED, Partition, canonical_partition


class PostprocessError(ValueError):
    """Raised for invalid merge specs, reassignment parameters, or evaluation inputs."""


@dataclass(frozen=True)
class MergeSpec:
    """Groups of cluster ids to union; groups must not overlap."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        norm = []
        for group in self.groups:
            ids = tuple(sorted(int(c) for c in group))
            if len(set(ids)) != len(ids):
                raise PostprocessError(f"duplicate id within merge group {ids}")
            if seen & set(ids):
                raise PostprocessError("merge groups overlap")
            seen.update(ids)
            norm.append(ids)
        object.__setattr__(self, "groups", tuple(norm))

    @property
    def is_empty(self) -> bool:
        return not any(len(g) > 1 for g in self.groups)


def merge_clusters(p: Partition, spec: MergeSpec) -> Partition:
    """Union each group of clusters into one; ids are then relabeled deterministically."""
    n_clusters = p.n_clusters
    mapping = np.arange(n_clusters, dtype=np.int64)
    for group in spec.groups:
        for cid in group:
            if not (0 <= cid < n_clusters):
                raise PostprocessError(f"unknown cluster id {cid}")
        mapping[list(group)] = group[0]
    raw = p.cluster_id.copy()
    assigned = raw != UNASSIGNED
    raw[assigned] = mapping[raw[assigned]]
    return canonical_partition(raw, warnings=p.warnings)


def suggest_merges(
    p: Partition, graph: KnnGraph, keep_mask: np.ndarray, density_min: float
) -> MergeSpec:
    """Propose merging cluster pairs densely joined by surviving edges.

    A pair qualifies when its surviving inter-cluster edge count divided by the
    smaller cluster's size exceeds density_min; qualifying pairs are closed
    transitively into groups. Advisory only.
    """
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (graph.n_edges,):
        raise PostprocessError("keep_mask not aligned with graph edges")
    n_clusters = p.n_clusters
    if n_clusters < 2:
        return MergeSpec(groups=())
    cu = p.cluster_id[graph.edge_sources()[keep_mask]]
    cv = p.cluster_id[graph.edge_targets()[keep_mask]]
    ok = (cu != UNASSIGNED) & (cv != UNASSIGNED) & (cu != cv)
    a = np.minimum(cu[ok], cv[ok])
    b = np.maximum(cu[ok], cv[ok])
    key = a * n_clusters + b
    uniq, counts = np.unique(key, return_counts=True)
    sizes = p.sizes
    pa = uniq // n_clusters
    pb = uniq % n_clusters
    ratio = counts / np.minimum(sizes[pa], sizes[pb])
    chosen = ratio > density_min
    if not chosen.any():
        return MergeSpec(groups=())
    link = sp.csr_matrix(
        (np.ones(int(chosen.sum())), (pa[chosen], pb[chosen])),
        shape=(n_clusters, n_clusters),
    )
    _, comp = connected_components(link, directed=False)
    groups = []
    for c in np.unique(comp):
        members = np.flatnonzero(comp == c)
        if members.size > 1:
            groups.append(tuple(int(m) for m in members))
    return MergeSpec(groups=tuple(groups))


def reassign_small(
    p: Partition, graph: KnnGraph, major_min_size: int = 300, iterations: int = 2
) -> Partition:
    """Fold points outside the major clusters back in via their stored nearest neighbors.

    Major clusters are those with at least major_min_size members at entry
    (relabeled to the deterministic order, which they keep). Every other point
    is processed per pass: if any of its original k nearest neighbors is
    assigned, it joins the cluster of the closest such neighbor (row order
    breaks distance ties by smaller id). Passes see only assignments from
    previous passes; points never reached stay UNASSIGNED.
    """
    if iterations < 1:
        raise PostprocessError(f"iterations must be >= 1, got {iterations}")
    if p.cluster_id.shape != (graph.n,):
        raise PostprocessError("partition not aligned with graph")
    sizes = p.sizes
    major_ids = np.flatnonzero(sizes >= major_min_size)
    if major_ids.size == 0:
        raise PostprocessError(
            f"no cluster reaches major_min_size={major_min_size} (largest is {sizes.max() if sizes.size else 0})"
        )
    # relabel majors canonically by entry size; everything else is stripped
    order = np.lexsort((major_ids, -sizes[major_ids]))
    rank = np.full(sizes.size, UNASSIGNED, dtype=np.int64)
    rank[major_ids[order]] = np.arange(major_ids.size)
    assigned = np.full(graph.n, UNASSIGNED, dtype=np.int64)
    covered = p.cluster_id != UNASSIGNED
    assigned[covered] = rank[p.cluster_id[covered]]

    for _ in range(iterations):
        todo = np.flatnonzero(assigned == UNASSIGNED)
        if todo.size == 0:
            break
        nb_clusters = assigned[graph.neighbors[todo]]
        has = nb_clusters != UNASSIGNED
        reachable = has.any(axis=1)
        first = np.argmax(has, axis=1)
        new_values = nb_clusters[np.arange(todo.size), first]
        updates = todo[reachable]
        assigned_next = assigned.copy()
        assigned_next[updates] = new_values[reachable]
        assigned = assigned_next
    return Partition(cluster_id=assigned, warnings=p.warnings)


def f_measure_per_class(p: Partition, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best binary F1 of each true class against any cluster (unassigned forms one candidate)."""
    truth = np.asarray(truth, dtype=np.int64)
    if truth.size == 0:
        raise PostprocessError("empty truth vector")
    if truth.shape != p.cluster_id.shape:
        raise PostprocessError("truth does not cover all nodes")
    cid = p.cluster_id.copy()
    n_clusters = p.n_clusters
    unassigned = cid == UNASSIGNED
    if unassigned.any():
        cid[unassigned] = n_clusters
        n_clusters += 1
    classes, tinv = np.unique(truth, return_inverse=True)
    contingency = sp.coo_matrix(
        (np.ones(truth.size, dtype=np.int64), (tinv, cid)),
        shape=(classes.size, n_clusters),
    ).toarray()
    class_sizes = contingency.sum(axis=1)
    cluster_sizes = contingency.sum(axis=0)
    f1 = 2.0 * contingency / (class_sizes[:, None] + cluster_sizes[None, :])
    return classes, f1.max(axis=1)


def f_measure(p: Partition, truth: np.ndarray) -> float:
    """Unweighted mean over true classes of the best per-class binary F1."""
    _, per_class = f_measure_per_class(p, truth)
    return float(per_class.mean())


def save_merge_spec(spec: MergeSpec, path) -> None:
    """Write one "merge id id ..." line per group."""
    with open(path, "w", encoding="utf-8") as fh:
        for group in spec.groups:
            fh.write("merge " + " ".join(str(c) for c in group) + "\n")


def load_merge_spec(path) -> MergeSpec:
    """Read a file written by save_merge_spec ('#' starts a comment)."""
    groups = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] != "merge" or len(parts) < 2:
                raise PostprocessError(f"{path}: line {lineno}: expected 'merge id id ...'")
            groups.append(tuple(int(c) for c in parts[1:]))
    return MergeSpec(groups=tuple(groups))


def write_eval_report(path, overall: float, classes: np.ndarray, per_class: np.ndarray) -> None:
    """Key-value report: overall F-measure plus a per-class table."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"f_measure {overall:.17g}\n")
        fh.write(f"n_classes {classes.size}\n")
        for cls, f1 in zip(classes, per_class):
            fh.write(f"class_{cls}_f {f1:.17g}\n")
