import json
import os

import numpy as np
import pytest

from mohone import cli
from mohone.diffusion import load_psi
from mohone.synth import make_community_kg
from mohone.vectors import read_sidecar

from conftest import write_triples


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    kg = make_community_kg(n_entities=60, n_communities=6, n_relations=3, seed=5)
    return kg.write_splits(root)


@pytest.fixture(scope="module")
def config_file(tmp_path_factory, dataset):
    train, valid, test = dataset
    cfg = {
        "train": train, "valid": valid, "test": test,
        "diffusion": {"scale": 1.0, "method": "exact"},
        "netembed": {"mode": "shnb", "dim": 12, "epochs": 3, "pairs_per_node": 5,
                     "negatives": 3, "seed": 1},
        "kge": {"model": "transe", "dim": 12, "batch_size": 32, "epochs": 15,
                "learning_rate": 0.1, "seed": 2},
        "retrofit": {"k": 5, "alpha": 1.0, "iters": 10, "tol": 1e-3},
        "significance": {"resamples": 2000},
    }
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory, config_file):
    out = tmp_path_factory.mktemp("run1")
    assert cli.main(["-q", "run", "--config", config_file, "--out-dir", str(out)]) == 0
    return out


class TestRunPipeline:
    def test_report_has_both_blocks(self, pipeline_out):
        report = json.loads((pipeline_out / "report.json").read_text())
        assert "baseline" in report and "infused" in report
        assert "significance" in report and "p_value" in report["significance"]
        assert 0 < report["baseline"]["mrr"] <= 1
        assert report["baseline"]["model"] == "transe"

    def test_rerun_is_bitwise_identical(self, tmp_path, config_file, pipeline_out):
        out2 = tmp_path / "run2"
        assert cli.main(["-q", "run", "--config", config_file, "--out-dir", str(out2)]) == 0
        assert (out2 / "report.json").read_bytes() == (pipeline_out / "report.json").read_bytes()
        for name in ("entities_base.vec", "network.vec", "entities_infused.vec",
                     "relations_infused.vec", "psi.bin", "graph.edges"):
            assert (out2 / name).read_bytes() == (pipeline_out / name).read_bytes()

    def test_resolved_config_written(self, pipeline_out):
        resolved = json.loads((pipeline_out / "resolved_config.json").read_text())
        assert resolved["kge"]["epochs"] == 15

    def test_sidecars_carry_hashes(self, pipeline_out):
        for name in ("graph.edges", "psi.bin", "network.vec", "entities_base.vec"):
            meta = read_sidecar(pipeline_out / name)
            assert "config_hash" in meta

    def test_lock_file_blocks_second_instance(self, tmp_path, config_file):
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".mohone.lock").write_text("999999")
        assert cli.main(["-q", "run", "--config", config_file, "--out-dir", str(out)]) == 2

    def test_failed_stage_aborts_but_keeps_earlier_artifacts(self, tmp_path, config_file):
        cfg = json.loads(open(config_file).read())
        cfg["test"] = str(tmp_path / "missing_test.txt")
        bad_cfg = tmp_path / "bad.json"
        bad_cfg.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        rc = cli.main(["-q", "run", "--config", str(bad_cfg), "--out-dir", str(out)])
        assert rc == 3
        # stages before the failing eval completed and their artifacts remain
        assert (out / "entities_infused.vec").exists()
        assert not (out / "eval_baseline.json").exists()
        # the lock is released even on failure
        assert not (out / ".mohone.lock").exists()


class TestSubcommandComposability:
    def test_standalone_eval_matches_pipeline(self, tmp_path, dataset, pipeline_out):
        train, valid, test = dataset
        out_json = tmp_path / "eval.json"
        rc = cli.main(["-q", "eval",
                       "--entities", str(pipeline_out / "entities_base.vec"),
                       "--relations", str(pipeline_out / "relations_base.vec"),
                       "--test", test, "--filter", train, valid, test,
                       "--out", str(out_json)])
        assert rc == 0
        standalone = json.loads(out_json.read_text())
        report = json.loads((pipeline_out / "report.json").read_text())
        assert standalone["mrr"] == report["baseline"]["mrr"]
        assert standalone["hits"] == report["baseline"]["hits"]
        assert (standalone["per_query_reciprocal_ranks"]
                == report["baseline"]["per_query_reciprocal_ranks"])

    def test_standalone_report_matches_pipeline(self, tmp_path, pipeline_out):
        out_json = tmp_path / "rep.json"
        rc = cli.main(["-q", "report",
                       "--baseline", str(pipeline_out / "eval_baseline.json"),
                       "--infused", str(pipeline_out / "eval_infused.json"),
                       "--resamples", "2000",
                       "--out", str(out_json)])
        assert rc == 0
        standalone = json.loads(out_json.read_text())
        report = json.loads((pipeline_out / "report.json").read_text())
        assert standalone["significance"] == report["significance"]

    def test_eval_refuses_mismatched_vocab_hash(self, tmp_path, dataset, pipeline_out):
        train, valid, test = dataset
        rel = tmp_path / "relations.vec"
        rel.write_bytes((pipeline_out / "relations_base.vec").read_bytes())
        meta = read_sidecar(pipeline_out / "relations_base.vec")
        meta["vocab_hash"] = "deadbeefdeadbeef"
        (tmp_path / "relations.vec.json").write_text(json.dumps(meta))
        rc = cli.main(["-q", "eval",
                       "--entities", str(pipeline_out / "entities_base.vec"),
                       "--relations", str(rel),
                       "--test", test, "--filter", train,
                       "--out", str(tmp_path / "e.json")])
        assert rc == 3

    def test_retrofit_accepts_external_vectors_without_sidecar(self, tmp_path, pipeline_out):
        # same text format, as an externally produced embedding would arrive
        external = tmp_path / "external.vec"
        external.write_bytes((pipeline_out / "network.vec").read_bytes())
        rc = cli.main(["-q", "retrofit",
                       "--base", str(pipeline_out / "entities_base.vec"),
                       "--network", str(external),
                       "--out", str(tmp_path / "retro.vec"),
                       "--log", str(tmp_path / "retro.log.json"),
                       "--k", "5"])
        assert rc == 0
        assert (tmp_path / "retro.vec").exists()

    def test_ranks_csv(self, tmp_path, dataset, pipeline_out):
        train, valid, test = dataset
        csv_path = tmp_path / "ranks.csv"
        rc = cli.main(["-q", "eval",
                       "--entities", str(pipeline_out / "entities_base.vec"),
                       "--relations", str(pipeline_out / "relations_base.vec"),
                       "--test", test, "--filter", train, valid, test,
                       "--out", str(tmp_path / "e.json"),
                       "--ranks-csv", str(csv_path)])
        assert rc == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "query,rank,reciprocal_rank"
        assert len(lines) > 1


class TestStandaloneStages:
    def test_diffuse_scale_zero_gives_identity(self, tmp_path, pipeline_out):
        out = tmp_path / "psi0.bin"
        rc = cli.main(["-q", "diffuse", "--graph", str(pipeline_out / "graph.edges"),
                       "--out", str(out), "--scale", "0", "--method", "exact"])
        assert rc == 0
        psi = load_psi(out)
        assert np.max(np.abs(psi.psi - np.eye(psi.n))) <= 1e-8

    def test_embed_accepts_chebyshev_artifact(self, tmp_path, pipeline_out):
        psi_path = tmp_path / "psi_cheb.bin"
        rc = cli.main(["-q", "diffuse", "--graph", str(pipeline_out / "graph.edges"),
                       "--out", str(psi_path), "--scale", "1.0",
                       "--method", "chebyshev", "--degree", "20"])
        assert rc == 0
        rc = cli.main(["-q", "embed", "--psi", str(psi_path),
                       "--vocab", str(pipeline_out / "vocab.json"),
                       "--out", str(tmp_path / "net.vec"),
                       "--mode", "shnb", "--dim", "8", "--epochs", "2",
                       "--seed", "0"])
        assert rc == 0

    def test_structural_embed_runs(self, tmp_path, pipeline_out):
        rc = cli.main(["-q", "embed", "--psi", str(pipeline_out / "psi.bin"),
                       "--vocab", str(pipeline_out / "vocab.json"),
                       "--out", str(tmp_path / "net_struct.vec"),
                       "--mode", "structural", "--dim", "8", "--epochs", "2",
                       "--seed", "0", "--cap", "5", "--bins", "20"])
        assert rc == 0

    def test_diffuse_writes_signatures(self, tmp_path, pipeline_out):
        sig_path = tmp_path / "sigs.json"
        rc = cli.main(["-q", "diffuse", "--graph", str(pipeline_out / "graph.edges"),
                       "--out", str(tmp_path / "p.bin"), "--scale", "1.0",
                       "--signatures-out", str(sig_path), "--bins", "25"])
        assert rc == 0
        sigs = json.loads(sig_path.read_text())
        assert all(len(row) == 25 for row in sigs)
        assert all(abs(sum(row) - 1.0) < 1e-9 for row in sigs)

    def test_seed_required_for_embed(self, pipeline_out, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["-q", "embed", "--psi", str(pipeline_out / "psi.bin"),
                      "--vocab", str(pipeline_out / "vocab.json"),
                      "--out", str(tmp_path / "x.vec")])
        assert exc.value.code == 2


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        rc = cli.main(["-q", "run", "--config", str(tmp_path / "nope.json"),
                       "--out-dir", str(tmp_path / "out")])
        assert rc == 2

    def test_invalid_config_key_is_config_error(self, tmp_path, dataset):
        train, valid, test = dataset
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"train": train, "valid": valid, "test": test,
                                   "frobnicate": {}}))
        rc = cli.main(["-q", "run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_data_file_is_data_error(self, tmp_path):
        rc = cli.main(["-q", "graph-build", "--train", str(tmp_path / "absent.txt"),
                       "--out-dir", str(tmp_path / "out")])
        assert rc == 3

    def test_malformed_triples_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("only\ttwo\n")
        rc = cli.main(["-q", "graph-build", "--train", str(bad),
                       "--out-dir", str(tmp_path / "out")])
        assert rc == 3

    def test_missing_upstream_artifact_names_producer(self, tmp_path, capsys):
        rc = cli.main(["-q", "diffuse", "--graph", str(tmp_path / "none.edges"),
                       "--out", str(tmp_path / "p.bin")])
        assert rc == 3


class TestEnvOverrides:
    def test_overrides_fold_into_sections(self):
        payload = {"train": "a", "kge": {"epochs": 5}}
        env = {"MOHONE_KGE_EPOCHS": "9", "MOHONE_KGE_BATCH_SIZE": "7",
               "MOHONE_DIFFUSION_SCALE": "2.5", "MOHONE_TRAIN": "b",
               "UNRELATED": "x"}
        out = cli.apply_env_overrides(payload, env)
        assert out["kge"]["epochs"] == 9
        assert out["kge"]["batch_size"] == 7
        assert out["diffusion"]["scale"] == 2.5
        assert out["train"] == "b"

    def test_round_trip_through_config_loader(self, tmp_path, dataset):
        train, valid, test = dataset
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"train": train, "valid": valid, "test": test}))
        os.environ["MOHONE_KGE_EPOCHS"] = "3"
        try:
            cfg = cli.load_pipeline_config(cfg_path)
        finally:
            del os.environ["MOHONE_KGE_EPOCHS"]
        assert cfg.kge.epochs == 3


def test_write_triples_helper_format(tmp_path):
    p = write_triples(tmp_path / "x.txt", [("a", "b", "c")])
    assert open(p).read() == "a\tb\tc\n"


def test_partial_writes_promote_only_on_commit(tmp_path):
    writes = cli._PartialWrites()
    final = tmp_path / "artifact.txt"
    staging = writes.path(final)
    staging.write_text("half-done")
    assert not final.exists()
    assert staging.name.endswith(".partial")
    writes.commit()
    assert final.read_text() == "half-done"
    assert not staging.exists()
