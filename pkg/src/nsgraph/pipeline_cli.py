"""Batch command-line driver: stage-per-command pipeline with file handoff.

Stages communicate through plain-text artifacts in the configured output
directory, so cheap downstream stages can be re-run without rebuilding the
kNN graph. Every command is idempotent for fixed inputs; all randomness flows
from the config seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset_io, edge_similarity, filter_components, knn_graph
from . import ncut_partition, postprocess_eval, sort_sweep

STAGE_EXIT_CODES = {
    "config": 2,
    "build": 3,
    "filter": 4,
    "scc": 5,
    "sweep": 6,
    "ncut": 7,
    "reassign": 8,
    "eval": 9,
    "serve": 10,
}

ARTIFACTS = {
    "graph": "graph_scored.txt",
    "labels": "labels.txt",
    "xy": "display_xy.txt",
    "meta": "dataset_meta.json",
    "mask": "keep_mask.txt",
    "components": "components.txt",
    "component_sizes": "component_sizes.txt",
    "sweep": "sweep.txt",
    "partition_ncut": "partition_ncut.txt",
    "merge_spec_used": "merge_spec_used.txt",
    "partition_merged": "partition_merged.txt",
    "partition_final": "partition_final.txt",
    "eval_report": "eval_report.txt",
}


class ConfigError(ValueError):
    """Raised for unreadable, incomplete, or inconsistent run configs."""


class StageError(RuntimeError):
    """Raised when a pipeline stage cannot run; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass
class RunConfig:
    """One reproducible record of every pipeline parameter."""

    input: str = ""
    out_dir: Path = Path(".")
    k: int = 20
    metric: str = "euclidean"
    seed: int = 0
    csv_path: Path | None = None
    csv_has_header: bool = False
    csv_label_column: int | None = None
    idx_images: Path | None = None
    idx_labels: Path | None = None
    spirals_n_per_arm: int = 500
    spirals_turns: float = 2.0
    spirals_noise_sigma: float = 0.1
    subsample_n: int | None = None
    filter_sa_min: float | None = None
    filter_sk_max: int | None = None
    filter_sj_min: int | None = None
    sweep_steps: int = 50
    sweep_snapshots: tuple[float, ...] = ()
    ncut_cut_threshold: float = 0.1
    ncut_stability_threshold: float = 0.04
    ncut_min_cluster_size: int = 50
    ncut_max_depth: int = 10
    merge_spec: Path | None = None
    merge_auto: bool = False
    merge_density_min: float = 0.5
    reassign_major_min_size: int = 300
    reassign_iterations: int = 2
    serve_host: str = "127.0.0.1"
    serve_port: int = 8000
    ui_dir: Path | None = None
    extras: dict = field(default_factory=dict)

    def artifact(self, name: str) -> Path:
        return self.out_dir / ARTIFACTS[name]

    def filter_predicate(self) -> filter_components.FilterPredicate:
        if self.filter_sa_min is not None:
            return filter_components.FilterPredicate.combined(self.filter_sa_min)
        if self.filter_sk_max is not None and self.filter_sj_min is not None:
            return filter_components.FilterPredicate.counts(
                self.filter_sk_max, self.filter_sj_min
            )
        raise ConfigError("config needs filter_sa_min or both filter_sk_max and filter_sj_min")


_BOOL_KEYS = {"csv_has_header", "merge_auto"}
_INT_KEYS = {
    "k", "seed", "csv_label_column", "spirals_n_per_arm", "subsample_n",
    "filter_sk_max", "filter_sj_min", "sweep_steps", "ncut_min_cluster_size",
    "ncut_max_depth", "reassign_major_min_size", "reassign_iterations", "serve_port",
}
_FLOAT_KEYS = {
    "spirals_turns", "spirals_noise_sigma", "filter_sa_min",
    "ncut_cut_threshold", "ncut_stability_threshold", "merge_density_min",
}
_PATH_KEYS = {"out_dir", "csv_path", "idx_images", "idx_labels", "merge_spec", "ui_dir"}


def _coerce(key: str, value: str):
    value = value.strip()
    if key in _BOOL_KEYS:
        low = value.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {value!r}")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _PATH_KEYS:
        return Path(value)
    if key == "sweep_snapshots":
        return tuple(float(tok) for tok in value.split(",") if tok.strip())
    return value


def parse_config(path, overrides: list[str] | None = None) -> RunConfig:
    """Read a flat key=value config file, then apply key=value overrides."""
    cfg = RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    entries: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            entries.append((key.strip(), value))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        entries.append((key.strip(), value))
    for key, value in entries:
        if hasattr(cfg, key) and key != "extras":
            try:
                setattr(cfg, key, _coerce(key, value))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {value.strip()!r} ({exc})") from None
        else:
            cfg.extras[key] = value.strip()
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.input not in ("csv", "idx", "spirals"):
        raise ConfigError(f"input must be csv, idx, or spirals, got {cfg.input!r}")
    if cfg.k < 1:
        raise ConfigError(f"k must be >= 1, got {cfg.k}")
    if cfg.input == "csv":
        if cfg.csv_path is None or not cfg.csv_path.exists():
            raise ConfigError(f"csv_path missing or not found: {cfg.csv_path}")
    if cfg.input == "idx":
        if cfg.idx_images is None or not cfg.idx_images.exists():
            raise ConfigError(f"idx_images missing or not found: {cfg.idx_images}")
        if cfg.idx_labels is not None and not cfg.idx_labels.exists():
            raise ConfigError(f"idx_labels not found: {cfg.idx_labels}")
    if cfg.merge_spec is not None and not cfg.merge_spec.exists():
        raise ConfigError(f"merge_spec not found: {cfg.merge_spec}")


def load_input_dataset(cfg: RunConfig) -> dataset_io.Dataset:
    if cfg.input == "csv":
        data = dataset_io.load_csv(
            cfg.csv_path, has_header=cfg.csv_has_header, label_column=cfg.csv_label_column
        )
    elif cfg.input == "idx":
        data = dataset_io.load_idx_images(cfg.idx_images)
        if cfg.idx_labels is not None:
            labels = dataset_io.load_idx_labels(cfg.idx_labels)
            if labels.size != data.n:
                raise StageError(
                    "build",
                    f"label count {labels.size} does not match image count {data.n}",
                )
            data = dataset_io.Dataset(
                points=data.points, labels=labels, display_xy=data.display_xy
            )
    else:
        data = dataset_io.gen_two_spirals(
            cfg.spirals_n_per_arm,
            turns=cfg.spirals_turns,
            noise_sigma=cfg.spirals_noise_sigma,
            seed=cfg.seed,
        )
    if cfg.subsample_n is not None:
        data = dataset_io.subsample(data, cfg.subsample_n, seed=cfg.seed)
    return data


def _write_summary(cfg: RunConfig, stage: str, payload: dict) -> None:
    path = cfg.out_dir / f"summary_{stage}.json"
    record = {"stage": stage, **payload}
    path.write_text(json.dumps(record, sort_keys=True) + "\n", encoding="utf-8")


def _require(cfg: RunConfig, stage: str, *names: str) -> None:
    hints = {
        "graph": "build", "mask": "filter", "partition_ncut": "ncut",
        "partition_final": "reassign", "labels": "build", "meta": "build",
    }
    for name in names:
        if not cfg.artifact(name).exists():
            owner = hints.get(name, "build")
            raise StageError(
                stage,
                f"missing artifact {cfg.artifact(name)}; run `nsgraph {owner}` first",
            )


def _save_mask(mask: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"edges {mask.size}\n")
        fh.write("".join("1" if m else "0" for m in mask))
        fh.write("\n")


def _load_mask(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "edges":
            raise StageError("filter", f"{path}: bad mask header")
        bits = fh.readline().strip()
    if len(bits) != int(header[1]):
        raise StageError("filter", f"{path}: mask length mismatch")
    return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == ord("1")


def _save_labels(labels: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, lab in enumerate(labels):
            fh.write(f"{node} {lab}\n")


def _load_labels(path) -> np.ndarray:
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    order = np.argsort(rows[:, 0])
    return rows[order, 1]


def _save_xy(xy: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in range(xy.shape[0]):
            fh.write(f"{node} {xy[node, 0]:.17g} {xy[node, 1]:.17g}\n")


def _load_xy(path) -> np.ndarray:
    rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    order = np.argsort(rows[:, 0])
    return rows[order, 1:3]


def cmd_build(cfg: RunConfig) -> None:
    """Load data, build the kNN graph, score all edges, persist artifacts."""
    t0 = time.perf_counter()
    data = load_input_dataset(cfg)
    if cfg.k >= data.n:
        raise StageError("build", f"k={cfg.k} must be < N={data.n}")
    graph = knn_graph.build_knn(data, cfg.k, metric=cfg.metric)
    scores = edge_similarity.score_all_edges(graph)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    edge_similarity.save_scored_edges(graph, scores, cfg.artifact("graph"))
    if data.labels is not None:
        _save_labels(data.labels, cfg.artifact("labels"))
    if data.display_xy is not None:
        _save_xy(data.display_xy, cfg.artifact("xy"))
    meta = {
        "n": data.n,
        "d": data.d,
        "k": cfg.k,
        "metric": cfg.metric,
        "has_labels": data.labels is not None,
        "has_xy": data.display_xy is not None,
    }
    cfg.artifact("meta").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    _write_summary(cfg, "build", {**meta, "edges": graph.n_edges})
    elapsed = time.perf_counter() - t0
    print(f"build: {data.n} points, {graph.n_edges} scored edges in {elapsed:.2f}s")


def cmd_filter(cfg: RunConfig) -> None:
    """Apply the configured predicate; write the boolean keep-mask."""
    _require(cfg, "filter", "graph")
    graph, scores = edge_similarity.load_scored_edges(cfg.artifact("graph"))
    pred = cfg.filter_predicate()
    mask = filter_components.filter_edges(graph, scores, pred)
    _save_mask(mask, cfg.artifact("mask"))
    kept = int(mask.sum())
    _write_summary(cfg, "filter", {
        "predicate": pred.describe(), "edges": graph.n_edges, "edges_kept": kept,
    })
    print(f"filter: kept {kept}/{graph.n_edges} edges ({pred.describe()})")


def cmd_scc(cfg: RunConfig) -> None:
    """Strongly connected components of the filtered graph."""
    _require(cfg, "scc", "graph", "mask")
    graph, _ = edge_similarity.load_scored_edges(cfg.artifact("graph"))
    mask = _load_mask(cfg.artifact("mask"))
    labeling = filter_components.scc(graph, mask)
    filter_components.save_components(labeling, cfg.artifact("components"))
    filter_components.save_component_sizes(labeling, cfg.artifact("component_sizes"))
    payload = {
        "n_components": labeling.n_components,
        "largest": int(labeling.sizes[0]),
    }
    if cfg.artifact("labels").exists():
        labels = _load_labels(cfg.artifact("labels"))
        purity = filter_components.component_purity(labeling, labels)
        payload["largest_purity"] = float(purity[0])
    _write_summary(cfg, "scc", payload)
    print(f"scc: {labeling.n_components} components, largest {labeling.sizes[0]}")


def cmd_sweep(cfg: RunConfig) -> None:
    """Sorting sweep over the threshold grid; dump records and raster snapshots."""
    _require(cfg, "sweep", "graph")
    graph, scores = edge_similarity.load_scored_edges(cfg.artifact("graph"))
    result = sort_sweep.sweep_sort(graph, scores, steps=cfg.sweep_steps)
    sort_sweep.save_sweep(result, cfg.artifact("sweep"))
    snapshots = []
    for thr in cfg.sweep_snapshots:
        step = result.step_at(thr)
        keep = scores.sa >= result.thresholds[step]
        raster, _ = sort_sweep.render_adjacency(
            result.perms[step], graph, keep, labeling=result.labelings[step]
        )
        out = cfg.out_dir / f"sweep_snapshot_{thr:g}.pgm"
        sort_sweep.save_pgm(raster, out)
        snapshots.append(out.name)
    _write_summary(cfg, "sweep", {
        "steps": cfg.sweep_steps,
        "final_components": result.labelings[-1].n_components,
        "snapshots": snapshots,
    })
    print(f"sweep: {cfg.sweep_steps} steps, {len(snapshots)} snapshots")


def cmd_ncut(cfg: RunConfig) -> None:
    """Partition the largest filtered strongly connected component recursively."""
    _require(cfg, "ncut", "graph", "mask")
    graph, _ = edge_similarity.load_scored_edges(cfg.artifact("graph"))
    mask = _load_mask(cfg.artifact("mask"))
    labeling = filter_components.scc(graph, mask)
    largest = np.flatnonzero(labeling.component_id == 0)
    ugraph = ncut_partition.symmetrize(graph, mask, largest)
    params = ncut_partition.NcutParams(
        cut_threshold=cfg.ncut_cut_threshold,
        stability_threshold=cfg.ncut_stability_threshold,
        min_cluster_size=cfg.ncut_min_cluster_size,
        max_depth=cfg.ncut_max_depth,
    )
    partition = ncut_partition.ncut_recursive(ugraph, params)
    ncut_partition.save_partition(partition, cfg.artifact("partition_ncut"))
    for message in partition.warnings:
        print(f"ncut warning: {message}", file=sys.stderr)
    _write_summary(cfg, "ncut", {
        "component_size": int(largest.size),
        "n_clusters": partition.n_clusters,
        "n_warnings": len(partition.warnings),
    })
    print(f"ncut: {partition.n_clusters} clusters over {largest.size} nodes")


def cmd_reassign(cfg: RunConfig) -> None:
    """Optionally merge clusters, then reassign points outside the major clusters."""
    _require(cfg, "reassign", "graph", "partition_ncut")
    graph, _ = edge_similarity.load_scored_edges(cfg.artifact("graph"))
    partition = ncut_partition.load_partition(cfg.artifact("partition_ncut"))
    spec = postprocess_eval.MergeSpec(groups=())
    if cfg.merge_spec is not None:
        spec = postprocess_eval.load_merge_spec(cfg.merge_spec)
    elif cfg.merge_auto:
        _require(cfg, "reassign", "mask")
        mask = _load_mask(cfg.artifact("mask"))
        spec = postprocess_eval.suggest_merges(
            partition, graph, mask, cfg.merge_density_min
        )
    merged = postprocess_eval.merge_clusters(partition, spec)
    postprocess_eval.save_merge_spec(spec, cfg.artifact("merge_spec_used"))
    ncut_partition.save_partition(merged, cfg.artifact("partition_merged"))
    final = postprocess_eval.reassign_small(
        merged,
        graph,
        major_min_size=cfg.reassign_major_min_size,
        iterations=cfg.reassign_iterations,
    )
    ncut_partition.save_partition(final, cfg.artifact("partition_final"))
    _write_summary(cfg, "reassign", {
        "merge_groups": len(spec.groups),
        "clusters_after_merge": merged.n_clusters,
        "clusters_final": final.n_clusters,
        "unassigned_final": final.n_unassigned,
    })
    print(
        f"reassign: {merged.n_clusters} clusters after merge, "
        f"{final.n_clusters} major, {final.n_unassigned} unassigned"
    )


def cmd_eval(cfg: RunConfig, partition_name: str = "partition_final") -> None:
    """F-measure of a stage partition against the stored true labels."""
    _require(cfg, "eval", partition_name, "labels")
    partition = ncut_partition.load_partition(cfg.artifact(partition_name))
    labels = _load_labels(cfg.artifact("labels"))
    classes, per_class = postprocess_eval.f_measure_per_class(partition, labels)
    overall = float(per_class.mean())
    postprocess_eval.write_eval_report(
        cfg.artifact("eval_report"), overall, classes, per_class
    )
    _write_summary(cfg, "eval", {
        "partition": partition_name,
        "f_measure": overall,
    })
    print(overall)


def cmd_serve(cfg: RunConfig, host: str | None = None, port: int | None = None) -> None:
    from . import explore_server

    _require(cfg, "serve", "graph", "meta")
    session = explore_server.Session.from_artifacts(
        graph_path=cfg.artifact("graph"),
        meta_path=cfg.artifact("meta"),
        labels_path=cfg.artifact("labels") if cfg.artifact("labels").exists() else None,
        xy_path=cfg.artifact("xy") if cfg.artifact("xy").exists() else None,
        sweep_steps=cfg.sweep_steps,
    )
    server = explore_server.make_server(
        session,
        host or cfg.serve_host,
        port if port is not None else cfg.serve_port,
        ui_dir=cfg.ui_dir,
    )
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsgraph",
        description="Neighborhood-similarity graph pipeline: build, filter, and interpret kNN graphs.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in ("build", "filter", "scc", "sweep", "ncut", "reassign", "eval", "serve"):
        sp = sub.add_parser(stage)
        sp.add_argument("--config", required=True, help="flat key=value config file")
        sp.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="override a config entry (repeatable)",
        )
        if stage == "eval":
            sp.add_argument(
                "--partition", default="partition_final",
                choices=["partition_ncut", "partition_merged", "partition_final"],
                help="which stage partition to evaluate",
            )
        if stage == "serve":
            sp.add_argument("--host", default=None)
            sp.add_argument("--port", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    stage = args.stage
    try:
        cfg = parse_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES["config"]
    try:
        if stage == "build":
            cmd_build(cfg)
        elif stage == "filter":
            cmd_filter(cfg)
        elif stage == "scc":
            cmd_scc(cfg)
        elif stage == "sweep":
            cmd_sweep(cfg)
        elif stage == "ncut":
            cmd_ncut(cfg)
        elif stage == "reassign":
            cmd_reassign(cfg)
        elif stage == "eval":
            cmd_eval(cfg, args.partition)
        elif stage == "serve":
            cmd_serve(cfg, args.host, args.port)
    except StageError as exc:
        print(f"{exc.stage} error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES[exc.stage]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES["config"]
    except Exception as exc:  # stage-specific failures map to that stage's code
        print(f"{stage} error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES[stage]
    return 0


if __name__ == "__main__":
    sys.exit(main())
