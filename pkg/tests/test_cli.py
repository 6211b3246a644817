"""CLI surface: subcommand behavior, exit codes, idempotence, config file."""

import json
import re

import numpy as np
import pytest
from click.testing import CliRunner

from rfx import bundle as bundle_mod
from rfx.cli import _parse_bytes, main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, wine_csv):
    """A trained forest + proximity files shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    forest = root / "forest.rfx"
    r = runner.invoke(main, ["train", "--data", str(wine_csv), "--label",
                             "cultivar", "--trees", "300", "--seed", "17",
                             "--out", str(forest)])
    assert r.exit_code == 0, r.output
    full = root / "full.rfxp"
    r = runner.invoke(main, ["proximity", "--data", str(wine_csv), "--label",
                             "cultivar", "--forest", str(forest),
                             "--backend", "full", "--out", str(full)])
    assert r.exit_code == 0, r.output
    return {"root": root, "forest": forest, "full": full, "wine": wine_csv}


def test_parse_bytes():
    assert _parse_bytes("32GiB") == 32 * 2**30
    assert _parse_bytes("1GB") == 10**9
    assert _parse_bytes("900 MB") == 900 * 10**6
    assert _parse_bytes("1234") == 1234


def test_train_prints_oob_table(runner, wine_csv, tmp_path):
    out = tmp_path / "f.rfx"
    r = runner.invoke(main, ["train", "--data", str(wine_csv), "--label",
                             "cultivar", "--trees", "500", "--seed", "17",
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    m = re.search(r"OOB Error Rate\s+([\d.]+)%", r.output)
    assert m and float(m.group(1)) <= 6.0
    assert "Class 0 accuracy" in r.output
    assert "Confusion matrix" in r.output


def test_train_zero_trees_usage_error(runner, wine_csv, tmp_path):
    r = runner.invoke(main, ["train", "--data", str(wine_csv), "--label",
                             "cultivar", "--trees", "0",
                             "--out", str(tmp_path / "f.rfx")])
    assert r.exit_code == 2


def test_train_idempotent(runner, wine_csv, tmp_path):
    args = ["train", "--data", str(wine_csv), "--label", "cultivar",
            "--trees", "50", "--seed", "23"]
    f1 = tmp_path / "a.rfx"
    f2 = tmp_path / "b.rfx"
    assert runner.invoke(main, args + ["--out", str(f1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(f2)]).exit_code == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_train_threads_env_invariant(runner, wine_csv, tmp_path, monkeypatch):
    args = ["train", "--data", str(wine_csv), "--label", "cultivar",
            "--trees", "40", "--seed", "29"]
    monkeypatch.setenv("RFX_THREADS", "1")
    f1 = tmp_path / "t1.rfx"
    assert runner.invoke(main, args + ["--out", str(f1)]).exit_code == 0
    monkeypatch.setenv("RFX_THREADS", "8")
    f2 = tmp_path / "t8.rfx"
    assert runner.invoke(main, args + ["--out", str(f2)]).exit_code == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_missing_data_file_data_error(runner, tmp_path):
    r = runner.invoke(main, ["train", "--data", str(tmp_path / "nope.csv"),
                             "--label", "y", "--out", str(tmp_path / "f.rfx")])
    assert r.exit_code == 2  # click path validation


def test_bad_label_column_exit3(runner, wine_csv, tmp_path):
    r = runner.invoke(main, ["train", "--data", str(wine_csv), "--label",
                             "not_a_column", "--out", str(tmp_path / "f.rfx")])
    assert r.exit_code == 3


def test_proximity_budget_refusal_exit4(runner, workdir, tmp_path):
    r = runner.invoke(main, ["proximity", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--backend", "full",
                             "--budget", "100KB",
                             "--out", str(tmp_path / "p.bin")])
    assert r.exit_code == 4
    assert "triblock" in r.output.lower() or "lowrank" in r.output.lower()


def test_proximity_triblock_reconstruction(runner, workdir, tmp_path):
    out = tmp_path / "tb.rfxt"
    r = runner.invoke(main, ["proximity", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--backend", "triblock",
                             "--tau", "0.0001", "--out", str(out)])
    assert r.exit_code == 0, r.output
    from rfx import proximity as prox
    tb = prox.load_proximity(out)
    full = prox.load_proximity(workdir["full"])
    rng = np.random.default_rng(0)
    for _ in range(500):
        i, j = rng.integers(0, tb.n, size=2)
        want = full.entry(i, j)
        assert tb.entry(i, j) == (want if want > prox.ZERO_TIER else 0.0)


def test_proximity_lowrank_reports_conventions(runner, workdir, tmp_path):
    r = runner.invoke(main, ["proximity", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--backend", "lowrank",
                             "--rank", "32", "--quant", "i8",
                             "--out", str(tmp_path / "lr.rfxq")])
    assert r.exit_code == 0, r.output
    assert "two-factor" in r.output


def test_proximity_idempotent(runner, workdir, tmp_path):
    args = ["proximity", "--data", str(workdir["wine"]), "--label", "cultivar",
            "--forest", str(workdir["forest"]), "--backend", "lowrank",
            "--rank", "16", "--quant", "nf4", "--seed", "3"]
    f1 = tmp_path / "a.rfxq"
    f2 = tmp_path / "b.rfxq"
    assert runner.invoke(main, args + ["--out", str(f1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(f2)]).exit_code == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_mds_lowrank_vs_full_correlation(runner, workdir, tmp_path):
    lr = tmp_path / "lr.rfxq"
    r = runner.invoke(main, ["proximity", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--backend", "lowrank",
                             "--rank", "100", "--quant", "i8",
                             "--out", str(lr)])
    assert r.exit_code == 0, r.output
    emb_full = tmp_path / "full.json"
    r = runner.invoke(main, ["mds", "--prox", str(workdir["full"]),
                             "--out-json", str(emb_full)])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["mds", "--prox", str(lr), "--compare",
                             str(emb_full)])
    assert r.exit_code == 0, r.output
    m = re.search(r"mds correlation vs .*: ([\d.]+)", r.output)
    assert m and float(m.group(1)) >= 0.95


def test_mem_estimate_golden(runner):
    r = runner.invoke(main, ["mem-estimate", "--samples", "100000",
                             "--trees", "10000"])
    assert r.exit_code == 0, r.output
    plan = json.loads(r.output)
    assert plan["full_headline_bytes"] == 80_000_000_000
    assert plan["model"]["subtotal"] == pytest.approx(381.2e6, rel=1e-3)
    assert plan["lowrank_r32_bytes"]["i8"]["two_factor"] == 6_400_000


def test_mem_estimate_needs_no_data(runner):
    r = runner.invoke(main, ["mem-estimate", "--samples", "1000"])
    assert r.exit_code == 0
    assert json.loads(r.output)["recommended"] == "full or triblock"


def test_outliers_csv(runner, workdir, tmp_path):
    out = tmp_path / "outliers.csv"
    r = runner.invoke(main, ["outliers", "--prox", str(workdir["full"]),
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "sample_id,score"
    assert len(lines) == 1 + 178


def test_viz_export_validates(runner, workdir, tmp_path):
    out = tmp_path / "bundle.json"
    r = runner.invoke(main, ["viz-export", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--prox",
                             str(workdir["full"]), "--out", str(out)])
    assert r.exit_code == 0, r.output
    doc = json.loads(out.read_text())
    bundle_mod.validate_bundle(doc)
    assert doc["n"] == 178
    # covered samples' vote fractions sum to 1
    fr = np.asarray(doc["vote_fractions"])
    covered = np.asarray(doc["oob_predictions"]) >= 0
    assert np.allclose(fr[covered].sum(axis=1), 1.0, atol=1e-9)
    # B=300 <= 500: per-tree votes present
    assert doc["per_tree_votes"] is not None
    assert len(doc["per_tree_votes"][0]) == 300


def test_viz_export_sampling(runner, workdir, tmp_path):
    out = tmp_path / "sampled.json"
    r = runner.invoke(main, ["viz-export", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--prox",
                             str(workdir["full"]), "--sample", "60",
                             "--stratified", "--out", str(out)])
    assert r.exit_code == 0, r.output
    doc = json.loads(out.read_text())
    bundle_mod.validate_bundle(doc)
    assert doc["n"] == 60
    assert doc["metadata"]["sampled"] is True
    labels = np.asarray(doc["labels"])
    # stratified: every class keeps roughly its share
    counts = np.bincount(labels, minlength=3)
    assert counts.min() >= 15


def test_config_file_defaults_flags_win(runner, wine_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"train": {"trees": 25, "seed": 77},
                               "label": "cultivar"}))
    f1 = tmp_path / "c1.rfx"
    r = runner.invoke(main, ["--config", str(cfg), "train", "--data",
                             str(wine_csv), "--out", str(f1)])
    assert r.exit_code == 0, r.output
    assert "25 trees" in r.output
    # explicit flag beats the file
    f2 = tmp_path / "c2.rfx"
    r = runner.invoke(main, ["--config", str(cfg), "train", "--data",
                             str(wine_csv), "--trees", "30", "--out", str(f2)])
    assert r.exit_code == 0, r.output
    assert "30 trees" in r.output


def test_bench_runs(runner, wine_csv):
    r = runner.invoke(main, ["bench", "--data", str(wine_csv), "--label",
                             "cultivar", "--trees", "20"])
    assert r.exit_code == 0, r.output
    assert "train" in r.output and "proximity" in r.output


def test_importance_command(runner, workdir, tmp_path):
    out_csv = tmp_path / "imp.csv"
    r = runner.invoke(main, ["importance", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--out-csv", str(out_csv)])
    assert r.exit_code == 0, r.output
    assert out_csv.exists()
    assert "perm_mean" in r.output


def test_quant_alias_int8(runner, workdir, tmp_path):
    out = tmp_path / "alias.rfxq"
    r = runner.invoke(main, ["proximity", "--data", str(workdir["wine"]),
                             "--label", "cultivar", "--forest",
                             str(workdir["forest"]), "--backend", "lowrank",
                             "--rank", "32", "--quant", "int8",
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert "mode=i8" in r.output


def test_vote_detail_capped_by_tree_count(wine_ds, monkeypatch):
    """Forests above the cap export vote fractions only (no per-tree votes)."""
    import rfx
    from rfx import importance as imp_mod
    from rfx import mds as mds_mod
    from rfx import proximity as prox_mod

    forest = rfx.train(wine_ds, rfx.TrainConfig(ntree=12, iseed=2))
    mem = prox_mod.leaf_membership(forest, wine_ds)
    full = prox_mod.full_proximity(mem)
    emb = mds_mod.mds_full(full)
    report = imp_mod.compute_report(forest, wine_ds)
    outliers = prox_mod.outlier_scores(full)

    doc = bundle_mod.build_bundle(forest, wine_ds, report, emb, outliers, "FullTriangle")
    assert doc["per_tree_votes"] is not None

    monkeypatch.setattr(bundle_mod, "VOTE_DETAIL_MAX_TREES", 10)
    doc2 = bundle_mod.build_bundle(forest, wine_ds, report, emb, outliers, "FullTriangle")
    assert doc2["per_tree_votes"] is None
    bundle_mod.validate_bundle(doc2)


def test_sample_indices_stratified_deterministic():
    labels = np.array([0] * 50 + [1] * 30 + [2] * 20)
    a = bundle_mod.sample_indices(100, 40, labels=labels, seed=5)
    b = bundle_mod.sample_indices(100, 40, labels=labels, seed=5)
    assert np.array_equal(a, b)
    assert len(a) == 40
    counts = np.bincount(labels[a], minlength=3)
    assert counts.tolist() == [20, 12, 8]
