import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nepmcnn.evaluation import (
    T_975,
    AggregateReport,
    ConfusionMatrix,
    aggregate,
    confusion,
    evaluate_predictions,
    mean_ci,
    metrics,
    t_quantile_975,
    write_folds_csv,
    write_report,
)


def brute_force(preds, labels):
    """Per-class P/R/F, macro and accuracy straight from the pairs."""
    per = []
    for c in range(3):
        tp = sum(1 for p, t in zip(preds, labels) if p == c and t == c)
        fp = sum(1 for p, t in zip(preds, labels) if p == c and t != c)
        fn = sum(1 for p, t in zip(preds, labels) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per.append((prec, rec, f))
    macro = tuple(sum(v[j] for v in per) / 3 for j in range(3))
    acc = sum(1 for p, t in zip(preds, labels) if p == t) / len(preds)
    return per, macro, acc


class TestConfusion:
    def test_nine_sample_hand_case(self):
        labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
        preds = [0, 0, 0, 1, 0, 2, 2, 2, 1]
        cm = confusion(preds, labels)
        assert cm.counts.tolist() == [[3, 0, 0], [1, 1, 1], [0, 1, 2]]
        rep = metrics(cm)
        assert rep.per_class["negative"] == pytest.approx((3 / 4, 1.0, 6 / 7), abs=1e-15)
        assert rep.per_class["neutral"] == pytest.approx((1 / 2, 1 / 3, 2 / 5), abs=1e-15)
        assert rep.per_class["positive"] == pytest.approx((2 / 3, 2 / 3, 2 / 3), abs=1e-15)
        assert rep.macro == pytest.approx((23 / 36, 2 / 3, (6 / 7 + 2 / 5 + 2 / 3) / 3), abs=1e-15)
        assert rep.accuracy == pytest.approx(6 / 9, abs=1e-15)

    def test_perfect_and_all_negative(self):
        y = [0, 1, 2, 2, 1]
        assert np.count_nonzero(confusion(y, y).counts - np.diag(np.diag(confusion(y, y).counts))) == 0
        cm = confusion([0] * 5, y).counts
        assert cm[:, 1:].sum() == 0 and cm[:, 0].sum() == 5

    def test_errors(self):
        with pytest.raises(ValueError, match="length mismatch"):
            confusion([0, 1], [0])
        with pytest.raises(ValueError):
            metrics(ConfusionMatrix(np.zeros((3, 3), dtype=int)))


class TestMetrics:
    def test_diagonal(self):
        rep = metrics(ConfusionMatrix(np.diag([3, 4, 5])))
        assert rep.macro == (1.0, 1.0, 1.0) and rep.accuracy == 1.0

    def test_worked_matrix(self):
        rep = metrics(ConfusionMatrix(np.array([[5, 1, 0], [1, 2, 1], [0, 1, 4]])))
        assert rep.accuracy == pytest.approx(11 / 15, abs=1e-15)
        p, r, _ = rep.per_class["negative"]
        assert p == pytest.approx(5 / 6, abs=1e-15) and r == pytest.approx(5 / 6, abs=1e-15)

    def test_zero_denominators(self):
        # class 1 never predicted and never present
        rep = evaluate_predictions([0, 2, 0], [0, 2, 2])
        assert rep.per_class["neutral"] == (0.0, 0.0, 0.0)

    def test_thousand_random_configurations(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, 3, size=n).tolist()
            preds = rng.integers(0, 3, size=n).tolist()
            rep = evaluate_predictions(preds, labels)
            per, macro, acc = brute_force(preds, labels)
            for c, name in enumerate(("negative", "neutral", "positive")):
                assert np.allclose(rep.per_class[name], per[c], rtol=0, atol=1e-12)
            assert np.allclose(rep.macro, macro, rtol=0, atol=1e-12)
            assert abs(rep.accuracy - acc) <= 1e-12

    def test_report_summary_keys(self):
        rep = evaluate_predictions([0, 1], [0, 1])
        assert set(rep.summary()) == {"precision", "recall", "f1", "accuracy"}
        assert rep.to_dict()["per_class"]["neutral"]["f1"] == 1.0


counts = st.lists(st.integers(0, 20), min_size=9, max_size=9).filter(lambda v: sum(v) > 0)


@settings(max_examples=300, deadline=None)
@given(counts)
def test_metrics_in_unit_interval(v):
    rep = metrics(ConfusionMatrix(np.array(v).reshape(3, 3)))
    vals = [x for t in rep.per_class.values() for x in t] + list(rep.macro) + [rep.accuracy]
    assert all(0.0 <= x <= 1.0 for x in vals)


@settings(max_examples=300, deadline=None)
@given(counts)
def test_accuracy_one_iff_diagonal(v):
    cm = np.array(v).reshape(3, 3)
    diagonal = not (cm - np.diag(np.diag(cm))).any()
    assert (metrics(ConfusionMatrix(cm)).accuracy == 1.0) == diagonal


@settings(max_examples=300, deadline=None)
@given(counts, st.permutations([0, 1, 2]))
def test_macro_f1_relabel_invariant(v, perm):
    cm = np.array(v).reshape(3, 3)
    perm = np.array(perm)
    relabeled = cm[np.ix_(perm, perm)]
    a = metrics(ConfusionMatrix(cm)).macro[2]
    b = metrics(ConfusionMatrix(relabeled)).macro[2]
    assert a == pytest.approx(b, abs=1e-12)


class TestIntervals:
    def test_two_fold_hand_example(self):
        iv = mean_ci([0.70, 0.72])
        s = math.sqrt(((0.70 - 0.71) ** 2 + (0.72 - 0.71) ** 2) / 1)
        assert iv.mean == pytest.approx(0.71, abs=1e-12)
        assert iv.std == pytest.approx(s, abs=1e-12) and s == pytest.approx(0.0141421356, abs=1e-9)
        assert iv.low == pytest.approx(0.71 - 12.7062047364 * 0.01, abs=1e-6)
        assert iv.high == pytest.approx(0.71 + 12.7062047364 * 0.01, abs=1e-6)
        assert (round(iv.low, 4), round(iv.high, 4)) == (0.5829, 0.8371)

    def test_identical_folds_zero_width(self):
        iv = mean_ci([0.6] * 7)
        assert iv.low == iv.mean == iv.high == pytest.approx(0.6)

    def test_needs_two_folds(self):
        with pytest.raises(ValueError):
            mean_ci([0.5])
        with pytest.raises(ValueError):
            aggregate([evaluate_predictions([0], [0])])

    def test_t_table_against_scipy(self):
        for df, q in T_975.items():
            assert q == pytest.approx(stats.t.ppf(0.975, df), abs=1e-9)
        assert t_quantile_975(60) == pytest.approx(stats.t.ppf(0.975, 60), abs=1e-12)
        with pytest.raises(ValueError):
            t_quantile_975(0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40))
    def test_bounds_bracket_mean(self, values):
        iv = mean_ci(values)
        assert iv.low <= iv.mean <= iv.high


class TestAggregateOutput:
    def make(self, n):
        rng = np.random.default_rng(n)
        reps = [evaluate_predictions(rng.integers(0, 3, 30), rng.integers(0, 3, 30)) for _ in range(n)]
        return aggregate(reps), reps

    def test_per_fold_values(self):
        agg, reps = self.make(4)
        assert isinstance(agg, AggregateReport) and agg.n_folds == 4
        assert agg.per_fold["accuracy"] == [r.accuracy for r in reps]
        assert agg.summary["f1"].mean == pytest.approx(np.mean([r.macro[2] for r in reps]))

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_folds_csv_rows(self, tmp_path, n):
        agg, _ = self.make(n)
        write_folds_csv(agg, tmp_path / "folds.csv")
        with open(tmp_path / "folds.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["fold", "metric", "value"]
        assert len(rows) - 1 == n * 4

    def test_report_json(self, tmp_path):
        import json

        agg, _ = self.make(3)
        write_report(agg, tmp_path / "r.json", {"note": "x"})
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["n_folds"] == 3 and doc["note"] == "x"
        assert len(doc["summary"]["accuracy"]["ci95"]) == 2
