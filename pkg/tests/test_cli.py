import csv
import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ivpgan.cli import EXIT_OK, EXIT_USER, ExperimentConfig, UserError, cell_metrics, load_config, main
from ivpgan.datasets import InteractionRecord, InteractionTable, make_synthetic_table, write_table

FAST = [
    "--n-bits", "64", "--gconv-widths", "8", "--gen-hidden", "16", "--disc-hidden", "8",
    "--batch-size", "10", "--epochs", "2", "--val-fraction", "0", "--lr-gen", "1e-3",
]  # fmt: skip


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "data.csv"
    write_table(make_synthetic_table(10, 5, seq_length=(10, 30), noise=0.05, seed=0), path)
    return path


def base_args(tmp_path, dataset, *extra):
    return ["--dataset", str(dataset), "--output-dir", str(tmp_path / "out"), *extra]


def run(cmd, tmp_path, dataset, *extra):
    return main([cmd, *base_args(tmp_path, dataset, *extra)])


def test_featurize_then_cache_hit(tmp_path, dataset, capsys):
    assert run("featurize", tmp_path, dataset, "--n-bits", "64") == EXIT_OK
    first = json.loads((tmp_path / "out/reports/featurize.json").read_text())
    assert first["compounds_computed"] == 10 and first["targets_computed"] == 5
    capsys.readouterr()
    assert run("featurize", tmp_path, dataset, "--n-bits", "64") == EXIT_OK
    assert "cache hit" in capsys.readouterr().out
    assert (tmp_path / "out/records.csv").exists()


def test_featurize_bad_smiles(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    recs = [InteractionRecord("c1", "CCO", "p1", "ACDEF", 5.0), InteractionRecord("c2", "C1CC", "p1", "ACDEF", 6.0)]
    write_table(InteractionTable(recs), path)
    assert run("featurize", tmp_path, path, "--n-bits", "64") == EXIT_USER
    assert "--skip-bad" in capsys.readouterr().err
    assert run("featurize", tmp_path, path, "--n-bits", "64", "--skip-bad") == EXIT_OK
    report = json.loads((tmp_path / "out/reports/featurize.json").read_text())
    assert report["records_dropped"] == 1


def test_featurize_filter_report(tmp_path, dataset):
    assert run("featurize", tmp_path, dataset, "--n-bits", "64", "--filter-threshold", "3") == EXIT_OK
    report = json.loads((tmp_path / "out/reports/filter.json").read_text())
    assert report["threshold"] == 3 and report["records_after"] == 50


def test_cache_dir_env_override(tmp_path, dataset, monkeypatch):
    monkeypatch.setenv("IVPGAN_CACHE_DIR", str(tmp_path / "elsewhere"))
    assert run("featurize", tmp_path, dataset, "--n-bits", "64") == EXIT_OK
    assert (tmp_path / "elsewhere/manifest.json").exists()
    assert not (tmp_path / "out/cache").exists()


def test_split_reproducible_and_grouped(tmp_path, dataset):
    run("featurize", tmp_path, dataset, "--n-bits", "64")
    assert run("split", tmp_path, dataset, "--seeds", "0,1") == EXIT_OK
    path = tmp_path / "out/folds/cold_drug_seed1.json"
    first = path.read_bytes()
    assert run("split", tmp_path, dataset, "--seeds", "0,1") == EXIT_OK
    assert path.read_bytes() == first
    labels = json.loads(first)["labels"]
    records = list(csv.DictReader(open(tmp_path / "out/records.csv")))
    groups = {}
    for r, lab in zip(records, labels):
        groups.setdefault(lab, set()).add(r["compound_id"])
    assert sorted(len(g) for g in groups.values()) == [2] * 5
    assert len(set().union(*groups.values())) == 10


def test_split_too_few_compounds(tmp_path, capsys):
    path = tmp_path / "small.csv"
    write_table(make_synthetic_table(3, 6, seq_length=(10, 20), seed=0), path)
    run("featurize", tmp_path, path, "--n-bits", "64")
    assert run("split", tmp_path, path, "--schemes", "cold_drug") == EXIT_USER
    assert "compounds" in capsys.readouterr().err


def test_split_before_featurize(tmp_path, dataset, capsys):
    assert run("split", tmp_path, dataset) == EXIT_USER
    assert "featurize" in capsys.readouterr().err


def test_train_without_cache_is_actionable(tmp_path, dataset, capsys):
    run("featurize", tmp_path, dataset, "--n-bits", "64")
    run("split", tmp_path, dataset)
    shutil.rmtree(tmp_path / "out/cache")
    assert run("train", tmp_path, dataset, *FAST) == EXIT_USER
    assert "featurize" in capsys.readouterr().err


def test_train_with_mismatched_cache(tmp_path, dataset, capsys):
    run("featurize", tmp_path, dataset, "--n-bits", "64")
    run("split", tmp_path, dataset)
    args = [a if a != "64" else "128" for a in FAST]
    assert run("train", tmp_path, dataset, *args) == EXIT_USER
    assert "featurize" in capsys.readouterr().err


def test_train_evaluate_layout(tmp_path, dataset):
    run("featurize", tmp_path, dataset, "--n-bits", "64")
    assert run("split", tmp_path, dataset, "--seeds", "0,1") == EXIT_OK
    args = [*FAST, "--seeds", "0,1", "--variants", "ivpgan,ecfp_psc"]
    assert run("train", tmp_path, dataset, *args) == EXIT_OK
    hist = tmp_path / "out/models/ivpgan/warm/seed1_fold4.history.csv"
    lines = hist.read_text().splitlines()
    assert lines[0].startswith("# ")
    header = lines[1].split(",")
    assert {"mse", "adv_g", "adv_d", "composite"} <= set(header)
    assert len(lines) == 2 + 2

    assert run("evaluate", tmp_path, dataset, *args) == EXIT_OK
    metrics = json.loads((tmp_path / "out/metrics.json").read_text())
    assert metrics["skipped_cells"] == []
    assert len(metrics["reports"]) == 2 * 3 * 3
    for rep in metrics["reports"]:
        assert rep["n_cells"] == 10
    rows = list(csv.reader(line for line in open(tmp_path / "out/metrics_table.csv") if not line.startswith("#")))
    assert rows[0] == ["dataset", "scheme", "metric", "ivpgan_mean", "ivpgan_std", "ecfp_psc_mean", "ecfp_psc_std"]
    assert [(r[1], r[2]) for r in rows[1:]] == [
        (s, m) for s in ("warm", "cold_drug", "cold_target") for m in ("rmse", "ci", "r2")
    ]
    pred = list(csv.reader(open(tmp_path / "out/predictions/ecfp_psc/cold_target/seed0_fold0.csv")))
    assert pred[1] == ["compound_id", "target_id", "y", "y_hat"]


def test_evaluate_before_train(tmp_path, dataset, capsys):
    run("featurize", tmp_path, dataset, "--n-bits", "64")
    run("split", tmp_path, dataset)
    assert run("evaluate", tmp_path, dataset, *FAST) == EXIT_USER
    assert "train" in capsys.readouterr().err


def test_cell_metrics_perfect_oracle():
    y = np.array([1.0, 2.5, 3.0, 7.0])
    assert cell_metrics(y, y.copy()) == {"rmse": 0.0, "ci": 1.0, "r2": 1.0}
    m = cell_metrics(y, np.full(4, 2.0), report_r=True)
    assert m["ci"] == 0.5 and math.isnan(m["r2"]) and math.isnan(m["r"])


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[data]\ndataset = d.csv\n[model]\nlam = 0.25\nseeds = 1, 2,3\ninclude_self = false\n")
    cfg = load_config(ini, {"lam": "0.5"})
    assert cfg.dataset == "d.csv" and cfg.lam == 0.5 and cfg.seeds == [1, 2, 3] and cfg.include_self is False
    ini.write_text("[x]\nlambda = 1\n")
    with pytest.raises(UserError, match="lambda"):
        load_config(ini)
    with pytest.raises(UserError):
        load_config(tmp_path / "missing.ini")
    with pytest.raises(UserError):
        load_config(None, {"epochs": "many"})
    assert ExperimentConfig().filter_threshold < 0


def test_config_validation_errors(tmp_path, dataset, capsys):
    assert run("split", tmp_path, dataset, "--schemes", "scaffold") == EXIT_USER
    assert run("featurize", tmp_path, tmp_path / "nope.csv") == EXIT_USER
    assert "not found" in capsys.readouterr().err


def test_exit_codes_subprocess(tmp_path):
    bad = subprocess.run([sys.executable, "-m", "ivpgan", "train", "--bogus"], capture_output=True, text=True)
    assert bad.returncode == EXIT_USER and "bogus" in bad.stderr
    ok = subprocess.run(
        [sys.executable, "-m", "ivpgan", "synth-data", "--out", str(tmp_path / "s.csv"), "--n-compounds", "3"],
        capture_output=True,
        text=True,
    )
    assert ok.returncode == EXIT_OK and (tmp_path / "s.csv").exists()
    missing = subprocess.run(
        [sys.executable, "-m", "ivpgan", "split", "--output-dir", str(tmp_path / "none")], capture_output=True, text=True
    )
    assert missing.returncode == EXIT_USER and "Traceback" not in missing.stderr
