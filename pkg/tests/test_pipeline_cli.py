import json

import numpy as np
import pytest

from nsgraph.pipeline_cli import (
    ConfigError,
    RunConfig,
    STAGE_EXIT_CODES,
    _load_mask,
    _save_mask,
    main,
    parse_config,
)


def write_config(tmp_path, **overrides):
    out = tmp_path / "out"
    lines = {
        "input": "spirals",
        "spirals_n_per_arm": "100",
        "spirals_noise_sigma": "0.05",
        "k": "10",
        "seed": "3",
        "filter_sa_min": "0.79",
        "sweep_steps": "10",
        "sweep_snapshots": "1.0,0.5",
        "ncut_min_cluster_size": "5",
        "reassign_major_min_size": "30",
        "out_dir": str(out),
    }
    lines.update({k: str(v) for k, v in overrides.items()})
    cfg = tmp_path / "run.cfg"
    cfg.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return cfg, out


class TestConfigParsing:
    def test_basic_parse_and_types(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        cfg = parse_config(cfg_path)
        assert cfg.k == 10
        assert cfg.filter_sa_min == pytest.approx(0.79)
        assert cfg.sweep_snapshots == (1.0, 0.5)
        assert cfg.out_dir == out

    def test_override_wins(self, tmp_path):
        cfg_path, _ = write_config(tmp_path)
        cfg = parse_config(cfg_path, ["k=7", "seed=99"])
        assert cfg.k == 7 and cfg.seed == 99

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\n\ninput = spirals\nk = 5\nout_dir = /tmp/x\n")
        cfg = parse_config(p)
        assert cfg.input == "spirals" and cfg.k == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.cfg")

    def test_bad_input_kind(self, tmp_path):
        cfg_path, _ = write_config(tmp_path, input="parquet")
        with pytest.raises(ConfigError, match="input"):
            parse_config(cfg_path)

    def test_missing_referenced_file(self, tmp_path):
        cfg_path, _ = write_config(tmp_path, input="csv", csv_path="/does/not/exist.csv")
        with pytest.raises(ConfigError, match="csv_path"):
            parse_config(cfg_path)

    def test_filter_predicate_required(self):
        bare = RunConfig(input="spirals")
        with pytest.raises(ConfigError):
            bare.filter_predicate()


class TestMaskRoundTrip:
    def test_round_trip(self, tmp_path, rng):
        mask = rng.random(257) < 0.3
        p = tmp_path / "mask.txt"
        _save_mask(mask, p)
        np.testing.assert_array_equal(_load_mask(p), mask)


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("chain")
    cfg_path, out = write_config(tmp_path)
    for stage in ("build", "filter", "scc", "sweep", "ncut", "reassign", "eval"):
        assert main([stage, "--config", str(cfg_path)]) == 0
    return cfg_path, out


class TestPipelineChain:
    def test_build_artifact_line_count(self, chain):
        _, out = chain
        lines = (out / "graph_scored.txt").read_text().splitlines()
        assert lines[0] == "200 10 euclidean"
        assert len(lines) == 1 + 200 * 10

    def test_stage_artifacts_exist(self, chain):
        _, out = chain
        for name in (
            "keep_mask.txt", "components.txt", "component_sizes.txt", "sweep.txt",
            "partition_ncut.txt", "partition_merged.txt", "partition_final.txt",
            "eval_report.txt", "dataset_meta.json",
        ):
            assert (out / name).exists(), name

    def test_sweep_snapshot_count(self, chain):
        _, out = chain
        snaps = sorted(out.glob("sweep_snapshot_*.pgm"))
        assert len(snaps) == 2
        for snap in snaps:
            assert snap.read_bytes().startswith(b"P5\n")

    def test_summaries_machine_readable(self, chain):
        _, out = chain
        for stage in ("build", "filter", "scc", "sweep", "ncut", "reassign", "eval"):
            record = json.loads((out / f"summary_{stage}.json").read_text())
            assert record["stage"] == stage

    def test_eval_report_keys(self, chain):
        _, out = chain
        text = (out / "eval_report.txt").read_text()
        assert text.startswith("f_measure ")
        assert "class_0_f" in text and "class_1_f" in text

    def test_rerun_byte_identical(self, chain):
        cfg_path, out = chain
        before = {
            p.name: p.read_bytes() for p in out.iterdir() if p.suffix in (".txt", ".json", ".pgm")
        }
        for stage in ("build", "filter", "scc", "sweep", "ncut", "reassign", "eval"):
            assert main([stage, "--config", str(cfg_path)]) == 0
        after = {
            p.name: p.read_bytes() for p in out.iterdir() if p.suffix in (".txt", ".json", ".pgm")
        }
        assert before == after


class TestErrorPaths:
    def test_k_too_large_usage_error(self, tmp_path):
        cfg_path, _ = write_config(tmp_path, spirals_n_per_arm=4, k=10)
        code = main(["build", "--config", str(cfg_path)])
        assert code == STAGE_EXIT_CODES["build"]

    def test_missing_upstream_artifact(self, tmp_path, capsys):
        cfg_path, _ = write_config(tmp_path)
        code = main(["filter", "--config", str(cfg_path)])
        assert code == STAGE_EXIT_CODES["filter"]
        err = capsys.readouterr().err
        assert "run `nsgraph build` first" in err

    def test_bad_config_exit_code(self, tmp_path):
        cfg_path, _ = write_config(tmp_path, input="bogus")
        assert main(["build", "--config", str(cfg_path)]) == STAGE_EXIT_CODES["config"]

    def test_eval_prints_one_for_identical_partition(self, tmp_path, capsys):
        cfg_path, out = write_config(tmp_path)
        out.mkdir(parents=True, exist_ok=True)
        labels = np.array([0, 0, 1, 1, 2])
        with open(out / "labels.txt", "w") as fh:
            for node, lab in enumerate(labels):
                fh.write(f"{node} {lab}\n")
        with open(out / "partition_final.txt", "w") as fh:
            for node, lab in enumerate(labels):
                fh.write(f"{node} {lab}\n")
        assert main(["eval", "--config", str(cfg_path)]) == 0
        assert "1.0" in capsys.readouterr().out
