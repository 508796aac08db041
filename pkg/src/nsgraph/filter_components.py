"""Edge filtering by score thresholds and strongly-connected-component extraction."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .edge_similarity import EdgeScores, ScoreError
from .knn_graph import KnnGraph


class FilterError(ValueError):
    """Raised for invalid predicates or misaligned inputs."""


@dataclass(frozen=True)
class FilterPredicate:
    """Edge-removal rule: either a combined-score floor or a (sK ceiling, sJ floor) pair.

    Exactly one variant is active. Variant A removes edges with sA < sa_min
    (strict); variant B removes edges with sK > sk_max or sJ < sj_min.
    """

    sa_min: float | None = None
    sk_max: int | None = None
    sj_min: int | None = None

    def __post_init__(self):
        variant_a = self.sa_min is not None
        variant_b = self.sk_max is not None or self.sj_min is not None
        if variant_a == variant_b:
            raise FilterError("need exactly one of sa_min or (sk_max, sj_min)")
        if variant_a:
            if not (0.0 <= self.sa_min <= 1.0):
                raise FilterError(f"sa_min {self.sa_min} outside [0, 1]")
        else:
            if self.sk_max is None or self.sj_min is None:
                raise FilterError("variant B needs both sk_max and sj_min")
            if self.sk_max < 0 or self.sj_min < 0:
                raise FilterError("sk_max and sj_min must be >= 0")

    @classmethod
    def combined(cls, sa_min: float) -> "FilterPredicate":
        return cls(sa_min=sa_min)

    @classmethod
    def counts(cls, sk_max: int, sj_min: int) -> "FilterPredicate":
        return cls(sk_max=sk_max, sj_min=sj_min)

    def describe(self) -> str:
        if self.sa_min is not None:
            return f"sA>={self.sa_min:g}"
        return f"sK<={self.sk_max} and sJ>={self.sj_min}"


@dataclass(frozen=True)
class ComponentLabeling:
    """Node -> component id, ids assigned by decreasing size (ties: smaller min node id first)."""

    component_id: np.ndarray  # (n,) int64
    sizes: np.ndarray  # (n_components,) int64

    def __post_init__(self):
        cid = np.asarray(self.component_id, dtype=np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if cid.min() < 0 or cid.max() >= sizes.size:
            raise FilterError("component ids not contiguous from 0")
        if sizes.sum() != cid.size or sizes.min() < 1:
            raise FilterError("component sizes inconsistent with labeling")
        if np.any(sizes[1:] > sizes[:-1]):
            raise FilterError("components must be ordered by decreasing size")
        object.__setattr__(self, "component_id", cid)
        object.__setattr__(self, "sizes", sizes)
        cid.flags.writeable = False
        sizes.flags.writeable = False

    @property
    def n_components(self) -> int:
        return self.sizes.size


def canonical_labeling(raw: np.ndarray) -> ComponentLabeling:
    """Relabel arbitrary component ids to the deterministic size/min-id order."""
    raw = np.asarray(raw, dtype=np.int64)
    _, inv = np.unique(raw, return_inverse=True)
    sizes = np.bincount(inv)
    min_id = np.full(sizes.size, raw.size, dtype=np.int64)
    np.minimum.at(min_id, inv, np.arange(raw.size, dtype=np.int64))
    order = np.lexsort((min_id, -sizes))
    rank = np.empty(sizes.size, dtype=np.int64)
    rank[order] = np.arange(sizes.size, dtype=np.int64)
    return ComponentLabeling(component_id=rank[inv], sizes=sizes[order])


def filter_edges(graph: KnnGraph, scores: EdgeScores, pred: FilterPredicate) -> np.ndarray:
    """Boolean keep-mask over the graph's edges; the graph itself is untouched."""
    if scores.n_edges != graph.n_edges or scores.k != graph.k:
        raise ScoreError("scores not aligned with graph")
    if pred.sa_min is not None:
        return scores.sa >= pred.sa_min
    if pred.sk_max > graph.k or pred.sj_min > graph.k - 1:
        raise FilterError(
            f"thresholds ({pred.sk_max}, {pred.sj_min}) outside score ranges for k={graph.k}"
        )
    return (scores.sk <= pred.sk_max) & (scores.sj >= pred.sj_min)


def masked_adjacency(graph: KnnGraph, keep_mask: np.ndarray) -> sp.csr_matrix:
    """Sparse directed adjacency of the surviving edges."""
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (graph.n_edges,):
        raise FilterError(f"mask must have shape ({graph.n_edges},), got {keep_mask.shape}")
    src = graph.edge_sources()[keep_mask]
    dst = graph.edge_targets()[keep_mask]
    return sp.csr_matrix(
        (np.ones(src.size, dtype=np.int8), (src, dst)), shape=(graph.n, graph.n)
    )


def scc(graph: KnnGraph, keep_mask: np.ndarray) -> ComponentLabeling:
    """Strongly connected components of the masked directed graph, canonically labeled."""
    adj = masked_adjacency(graph, keep_mask)
    _, raw = connected_components(adj, directed=True, connection="strong")
    return canonical_labeling(raw)


def component_purity(labeling: ComponentLabeling, labels: np.ndarray) -> np.ndarray:
    """Per-component fraction of nodes carrying the component's most common true label."""
    if labels is None:
        raise FilterError("ground-truth labels required")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != labeling.component_id.shape:
        raise FilterError("labels not aligned with labeling")
    _, linv = np.unique(labels, return_inverse=True)
    contingency = sp.coo_matrix(
        (
            np.ones(labels.size, dtype=np.int64),
            (labeling.component_id, linv),
        ),
        shape=(labeling.n_components, linv.max() + 1),
    ).tocsr()
    modal = contingency.max(axis=1).toarray().ravel()
    return modal / labeling.sizes


def save_components(labeling: ComponentLabeling, path) -> None:
    """Write one "node_id component_id" line per node."""
    with open(path, "w", encoding="utf-8") as fh:
        for node, comp in enumerate(labeling.component_id):
            fh.write(f"{node} {comp}\n")


def save_component_sizes(labeling: ComponentLabeling, path) -> None:
    """Write the "component_id size" summary table."""
    with open(path, "w", encoding="utf-8") as fh:
        for comp, size in enumerate(labeling.sizes):
            fh.write(f"{comp} {size}\n")


def load_components(path) -> ComponentLabeling:
    """Read a file written by save_components."""
    path = Path(path)
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            node, comp = line.split()
            pairs.append((int(node), int(comp)))
    if not pairs:
        raise FilterError(f"{path}: empty component file")
    pairs.sort()
    cid = np.array([c for _, c in pairs], dtype=np.int64)
    sizes = np.bincount(cid)
    return ComponentLabeling(component_id=cid, sizes=sizes)
