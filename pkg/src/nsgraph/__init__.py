"""Structure discovery in point clouds via neighborhood-similarity graph filtering.

Build a directed kNN graph, score each edge by how similar the two endpoint
neighborhoods look (distance-distribution gap, shared neighbors, and their
combined harmonic-mean score), filter edges by threshold, and read structure
out of the surviving graph: strongly connected components, a threshold-sweep
adjacency-matrix sort, and recursive normalized-cut partitioning.
"""

from .dataset_io import Dataset, DatasetError, gen_two_spirals, load_csv, load_idx_images, load_idx_labels, save_csv, subsample
from .edge_similarity import (
    EdgeScores,
    ScoreError,
    combined_similarity,
    ks_count,
    load_scored_edges,
    save_scored_edges,
    score_all_edges,
    shared_neighbors,
)
from .filter_components import (
    ComponentLabeling,
    FilterError,
    FilterPredicate,
    component_purity,
    filter_edges,
    scc,
)
from .knn_graph import KnnError, KnnGraph, build_knn, load_edge_list, metric_distance, register_metric, save_edge_list
from .ncut_partition import (
    UNASSIGNED,
    NcutError,
    NcutParams,
    Partition,
    UGraph,
    best_split,
    fiedler_vector,
    load_partition,
    ncut_recursive,
    ncut_value,
    save_partition,
    stability,
    symmetrize,
)
from .postprocess_eval import (
    MergeSpec,
    PostprocessError,
    f_measure,
    f_measure_per_class,
    load_merge_spec,
    merge_clusters,
    reassign_small,
    save_merge_spec,
    suggest_merges,
)
from .sort_sweep import (
    SweepError,
    SweepResult,
    read_pgm,
    render_adjacency,
    save_pgm,
    save_sweep,
    sweep_sort,
    write_pgm,
)

__version__ = "0.1.0"
