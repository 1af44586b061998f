import json
import shutil

import numpy as np
import pytest

from nepmcnn.cli import main
from nepmcnn.mcnn import KERNEL_SIZES

FAST = ["--n-folds", "2", "--lr", "1e-4", "--epochs", "8", "--joint-epochs", "2"]


def run_args(files, out, *extra):
    return ["--dataset", str(files["dataset"]), "--embeddings", str(files["embeddings"]), "--output", str(out),
            *FAST, *extra]


def artifact_bytes(out):
    """Model bundles and metric files of a run, keyed by relative path."""
    files = {}
    for fold in sorted(out.glob("fold_*")):
        for k in KERNEL_SIZES:
            files[f"{fold.name}/model/channel_k{k}.bin"] = (fold / "model" / f"channel_k{k}.bin").read_bytes()
        for name in ("model/manifest.json", "metrics.json", "feature_model.json"):
            files[f"{fold.name}/{name}"] = (fold / name).read_bytes()
    for name in ("report.json", "folds.csv", "split_plan.json"):
        files[name] = (out / name).read_bytes()
    return files


@pytest.fixture(scope="module")
def evaluated(tmp_path_factory, small_synthetic_files):
    out = tmp_path_factory.mktemp("runs") / "single"
    assert main(["evaluate", *run_args(small_synthetic_files, out)]) == 0
    return out


def test_evaluate_end_to_end(evaluated):
    report = json.loads((evaluated / "report.json").read_text())
    assert report["n_folds"] == 2
    assert report["summary"]["accuracy"]["mean"] >= 0.9
    lines = (evaluated / "folds.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 4
    metrics = json.loads((evaluated / "fold_00" / "metrics.json").read_text())
    assert set(metrics["channels"]) == {"C1", "C2", "C3", "C4"}
    manifest = json.loads((evaluated / "manifest.json").read_text())
    assert manifest["config"]["train"]["learning_rate"] == 1e-4
    assert set(manifest["seeds"]["1"]["channels"]) == {"1", "2", "3", "4"}


def test_stages_compose_bit_identically(evaluated, small_synthetic_files, tmp_path):
    out = tmp_path / "staged"
    args = run_args(small_synthetic_files, out)
    assert main(["featurize", *args]) == 0
    assert main(["train", *args]) == 0
    assert main(["evaluate", *args]) == 0
    assert artifact_bytes(out) == artifact_bytes(evaluated)


def test_evaluate_reuses_trained_bundles(evaluated, small_synthetic_files, tmp_path):
    out = tmp_path / "copy"
    shutil.copytree(evaluated, out)
    stamp = (out / "fold_00" / "model" / "channel_k1.bin").stat().st_mtime_ns
    assert main(["evaluate", *run_args(small_synthetic_files, out)]) == 0
    assert (out / "fold_00" / "model" / "channel_k1.bin").stat().st_mtime_ns == stamp


def test_predict(evaluated, small_synthetic_files, tmp_path, capsys):
    import csv

    with open(small_synthetic_files["dataset"], encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))[:30]
    src = tmp_path / "in.txt"
    src.write_text("\n".join(r["text"] for r in rows) + "\n", encoding="utf-8")
    dst = tmp_path / "out.tsv"
    assert main(["predict", "--model", str(evaluated / "fold_00"), "--input", str(src), "--out", str(dst)]) == 0
    lines = dst.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 30
    labels = [ln.split("\t")[0] for ln in lines]
    assert sum(a == r["label"] for a, r in zip(labels, rows)) >= 27
    for ln in lines:
        scores = [float(v) for v in ln.split("\t")[1:]]
        assert len(scores) == 3 and abs(sum(scores) - 1) < 1e-5


def test_predict_empty_input(evaluated, tmp_path, capsys):
    src = tmp_path / "empty.txt"
    src.write_text("", encoding="utf-8")
    assert main(["predict", "--model", str(evaluated / "fold_00"), "--input", str(src)]) == 0
    assert capsys.readouterr().out == ""


def test_predict_dimension_mismatch(evaluated, tmp_path, capsys):
    fold = tmp_path / "run" / "fold_00"
    shutil.copytree(evaluated / "fold_00", fold)
    shutil.copy(evaluated / "manifest.json", tmp_path / "run" / "manifest.json")
    fm = json.loads((fold / "feature_model.json").read_text(encoding="utf-8"))
    fm["bow"]["vocabulary"] = fm["bow"]["vocabulary"][:-1]
    fm["bow"]["idf"] = fm["bow"]["idf"][:-1]
    (fold / "feature_model.json").write_text(json.dumps(fm), encoding="utf-8")
    src = tmp_path / "in.txt"
    src.write_text("नेपाल\n", encoding="utf-8")
    assert main(["predict", "--model", str(fold), "--input", str(src)]) == 3
    assert "402" in capsys.readouterr().err


def test_compare_baselines_hybrid_vs_ds(evaluated, small_synthetic_files, capsys):
    args = run_args(small_synthetic_files, evaluated)
    assert main(["compare-baselines", *args, "--features", "ds"]) == 0
    assert main(["compare-baselines", *args, "--features", "hybrid"]) == 0
    ds = json.loads((evaluated / "baselines_ds.json").read_text())
    hy = json.loads((evaluated / "baselines_hybrid.json").read_text())
    acc = lambda doc, name: doc["baselines"][name]["summary"]["accuracy"]["mean"]  # noqa: E731
    assert acc(hy, "LogisticRegression") >= acc(ds, "LogisticRegression")
    assert set(hy["baselines"]) == {"GaussianNB", "KNN", "LogisticRegression"}
    rows = (evaluated / "baselines_hybrid_folds.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 3 * 2 * 4


class TestExitCodes:
    def test_missing_dataset(self, tmp_path, capsys):
        assert main(["evaluate", "--output", str(tmp_path)]) == 2
        assert "dataset" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"dataset": "x.csv", "learning_rate": 1}), encoding="utf-8")
        assert main(["train", "--config", str(cfg)]) == 2

    def test_bad_json(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{", encoding="utf-8")
        assert main(["train", "--config", str(cfg)]) == 2

    def test_bad_ratio(self, small_synthetic_files, tmp_path):
        assert main(["featurize", *run_args(small_synthetic_files, tmp_path), "--ratio", "1.5"]) == 2

    def test_config_file_relative_paths(self, small_synthetic_files, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "dataset": str(small_synthetic_files["dataset"]),
            "embeddings": str(small_synthetic_files["embeddings"]),
            "output": "out", "n_folds": 1,
        }), encoding="utf-8")
        assert main(["featurize", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "fold_00" / "features.npz").exists()

    def test_bad_label(self, small_synthetic_files, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("text,label\nनेपाल,positive\nघर,joyful\n", encoding="utf-8")
        args = ["featurize", "--dataset", str(bad), "--embeddings", str(small_synthetic_files["embeddings"]),
                "--output", str(tmp_path / "o")]
        assert main(args) == 3
        assert "line 3" in capsys.readouterr().err

    def test_embedding_dim_mismatch(self, small_synthetic_files, tmp_path):
        assert main(["featurize", *run_args(small_synthetic_files, tmp_path), "--embedding-dim", "50"]) == 3

    def test_numeric_failure(self, small_synthetic_files, tmp_path, capsys):
        args = ["train", "--dataset", str(small_synthetic_files["dataset"]),
                "--embeddings", str(small_synthetic_files["embeddings"]), "--output", str(tmp_path),
                "--n-folds", "1", "--lr", "1e300", "--epochs", "2", "--joint-epochs", "0"]
        with np.errstate(all="ignore"):
            assert main(args) == 4
        assert "non-finite" in capsys.readouterr().err

    def test_make_synthetic(self, tmp_path, capsys):
        assert main(["make-synthetic", str(tmp_path / "s"), "--n-per-class", "5"]) == 0
        assert (tmp_path / "s" / "tweets.csv").read_text(encoding="utf-8").count("\n") == 16
