import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nepmcnn.baselines import (
    DEFAULT_HYPER,
    BaselineModel,
    baseline_scores,
    fit_gaussian_nb,
    fit_knn,
    fit_logistic_regression,
    load_baseline,
    minkowski,
    predict_baseline,
    predict_baseline_batch,
    save_baseline,
    train_baseline,
)


def blobs(n_per_class, sep, seed, dim=4, classes=3):
    rng = np.random.default_rng(seed)
    centers = np.zeros((classes, dim))
    for c in range(classes):
        centers[c, c % dim] = sep * (c + 1)
    X = np.vstack([rng.normal(size=(n_per_class, dim)) + centers[c] for c in range(classes)])
    y = np.repeat(np.arange(classes), n_per_class)
    return X, y


class TestNaiveBayes:
    def test_two_blobs(self):
        X, y = blobs(200, 6.0, 0, classes=2)
        Xt, yt = blobs(200, 6.0, 1, classes=2)
        pred, _ = predict_baseline_batch(fit_gaussian_nb(X, y), Xt)
        assert (pred == yt).mean() >= 0.98

    def test_identical_classes_uniform(self):
        X = np.tile(np.array([[0.0, 1.0], [1.0, 3.0]]), (3, 1))
        y = np.array([0, 0, 1, 1, 2, 2])
        cls, scores = predict_baseline(fit_gaussian_nb(X, y), np.array([0.3, 0.7]))
        assert np.allclose(scores, 1 / 3, atol=1e-12)
        assert cls == 0

    def test_absent_class_never_predicted(self):
        X, y = blobs(20, 4.0, 2, classes=2)
        m = fit_gaussian_nb(X, y)
        assert np.isneginf(m.params["log_prior"][2])
        scores = baseline_scores(m, X)
        assert np.all(scores[:, 2] == 0)

    def test_constant_feature_floor(self):
        X = np.column_stack([np.repeat([0.0, 1.0, 2.0], 5), np.ones(15)])
        y = np.repeat([0, 1, 2], 5)
        m = fit_gaussian_nb(X, y)
        assert np.all(m.params["var"] >= 1e-9)
        assert np.all(np.isfinite(baseline_scores(m, X)))


class TestKnn:
    def test_manhattan(self):
        assert minkowski([0, 0], [1, 2], 1)[0, 0] == 3.0
        assert minkowski([0, 0], [3, 4], 2)[0, 0] == 5.0
        assert minkowski([0, 0], [1, 1], 3)[0, 0] == pytest.approx(2 ** (1 / 3))

    def test_k1_recovers_training_labels(self):
        X, y = blobs(30, 1.0, 3)
        pred, _ = predict_baseline_batch(fit_knn(X, y, n_neighbors=1), X)
        assert np.array_equal(pred, y)

    def test_vote_tie_lower_class(self):
        X = np.array([[0.0], [2.0]])
        m = fit_knn(X, np.array([2, 1]), n_neighbors=2)
        assert predict_baseline(m, np.array([1.0]))[0] == 1

    def test_boundary_ties_use_class_order(self):
        # three points at distance 1, k=2: classes 0 and 2 win the boundary
        X = np.array([[1.0], [-1.0], [1.0]])
        m = fit_knn(X, np.array([2, 1, 0]), n_neighbors=2)
        scores = baseline_scores(m, np.array([[0.0]]))
        assert scores[0].tolist() == [0.5, 0.5, 0.0]

    def test_errors(self):
        X, y = blobs(3, 1.0, 0)
        with pytest.raises(ValueError):
            fit_knn(X, y, n_neighbors=10)
        with pytest.raises(ValueError):
            baseline_scores(fit_knn(X, y, n_neighbors=3), np.zeros((1, 7)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.sampled_from([1, 2, 3]))
def test_knn_permutation_invariant(seed, k, p):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(15, 2)).astype(float)  # many distance ties
    y = rng.integers(0, 3, size=15)
    Q = rng.integers(0, 3, size=(6, 2)).astype(float)
    perm = rng.permutation(15)
    a = baseline_scores(fit_knn(X, y, n_neighbors=k, p=p), Q)
    b = baseline_scores(fit_knn(X[perm], y[perm], n_neighbors=k, p=p), Q)
    assert np.array_equal(a, b)


class TestLogisticRegression:
    def test_hand_scores(self):
        W = np.array([[1.0, -1.0, 0.5], [2.0, 0.0, -1.0]])
        b = np.array([0.0, 0.5, -0.5])
        m = BaselineModel("LogisticRegression", {"W": W, "b": b})
        x = np.array([0.5, -1.0])
        # logits: 0.5*1 - 2 = -1.5; -0.5 + 0.5 = 0; 0.25 + 1 - 0.5 = 0.75
        e = np.exp([-1.5, 0.0, 0.75])
        assert np.allclose(predict_baseline(m, x)[1], e / e.sum(), rtol=0, atol=1e-12)

    def test_separable_large_c(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-1, 1, size=(90, 2))
        y = np.where(X[:, 0] > 0.3, 2, np.where(X[:, 0] + X[:, 1] < -0.4, 0, 1))
        m = fit_logistic_regression(X, y, C=1e12, max_iter=3000)
        assert (predict_baseline_batch(m, X)[0] == y).mean() == 1.0

    def test_converges_and_deterministic(self):
        X, y = blobs(40, 1.5, 5)
        a = fit_logistic_regression(X, y, C=1.0)
        b = fit_logistic_regression(X, y, C=1.0)
        assert np.array_equal(a.params["W"], b.params["W"])
        assert a.hyper["n_iter"] < 1000  # gradient norm fell below tol

    def test_penalty_shrinks_weights(self):
        X, y = blobs(40, 1.5, 5)
        strong = fit_logistic_regression(X, y, C=0.01)
        weak = fit_logistic_regression(X, y, C=100.0)
        assert np.linalg.norm(strong.params["W"]) < np.linalg.norm(weak.params["W"])

    def test_objective_gradient_matches_finite_difference(self):
        from nepmcnn.baselines import _lr_objective

        rng = np.random.default_rng(0)
        X = rng.normal(size=(12, 3))
        Y = np.eye(3)[rng.integers(0, 3, 12)]
        W, b = rng.normal(size=(3, 3)), rng.normal(size=3)
        _, gW, gb = _lr_objective(W, b, X, Y, 0.1)
        h = 1e-6
        for i in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[i] += h
            Wm[i] -= h
            num = (_lr_objective(Wp, b, X, Y, 0.1)[0] - _lr_objective(Wm, b, X, Y, 0.1)[0]) / (2 * h)
            assert num == pytest.approx(gW[i], abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_scores_on_simplex(seed):
    X, y = blobs(10, 2.0, seed)
    Q = np.random.default_rng(seed + 1).normal(size=(5, 4)) * 3
    for m in (fit_gaussian_nb(X, y), fit_logistic_regression(X, y, max_iter=50)):
        assert np.allclose(baseline_scores(m, Q).sum(axis=1), 1.0, atol=1e-9)


def test_train_baseline_dispatch_and_defaults():
    X, y = blobs(50, 3.0, 6)
    for kind, hyper in DEFAULT_HYPER.items():
        m = train_baseline(kind, X, y, **hyper)
        assert m.kind == kind and m.n_features == 4
    with pytest.raises(ValueError, match="unsupported"):
        train_baseline("SVM", X, y)


@pytest.mark.parametrize("kind", ["GaussianNB", "KNN", "LogisticRegression"])
def test_save_load(tmp_path, kind):
    X, y = blobs(15, 2.0, 8, classes=2)  # NB keeps a -inf prior for class 2
    hyper = {"n_neighbors": 5} if kind == "KNN" else {}
    m = train_baseline(kind, X, y, **hyper)
    save_baseline(m, tmp_path / kind)
    back = load_baseline(tmp_path / kind)
    assert np.array_equal(baseline_scores(back, X), baseline_scores(m, X))
