"""Baseline classifiers written against plain numpy: Gaussian naive Bayes,
k-nearest neighbours and multinomial logistic regression."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .nn import softmax

N_CLASSES = 3
KINDS = ("GaussianNB", "KNN", "LogisticRegression")
VAR_FLOOR = 1e-9

# Hyper-parameters used for the published comparison; KNN leaf size only
# tunes a tree index and has no effect on exhaustive search.
DEFAULT_HYPER = {
    "GaussianNB": {},
    "KNN": {"n_neighbors": 120, "p": 1, "leaf_size": 35},
    "LogisticRegression": {"C": 10.0, "max_iter": 1000, "tol": 1e-6},
}


@dataclass
class BaselineModel:
    kind: str
    params: dict[str, np.ndarray] = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        if self.kind == "LogisticRegression":
            return self.params["W"].shape[0]
        return self.params["means" if self.kind == "GaussianNB" else "X"].shape[1]


def _check(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("features must be a non-empty 2-D array")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (len(X),):
        raise ValueError("labels must align with features")
    return X, y


def fit_gaussian_nb(X, y, var_floor: float = VAR_FLOOR) -> BaselineModel:
    X, y = _check(X, y)
    d = X.shape[1]
    means = np.zeros((N_CLASSES, d))
    var = np.ones((N_CLASSES, d))
    log_prior = np.full(N_CLASSES, -np.inf)
    for c in range(N_CLASSES):
        Xc = X[y == c]
        if len(Xc):
            means[c] = Xc.mean(axis=0)
            var[c] = np.maximum(Xc.var(axis=0), var_floor)
            log_prior[c] = np.log(len(Xc) / len(X))
    return BaselineModel("GaussianNB", {"means": means, "var": var, "log_prior": log_prior},
                         {"var_floor": var_floor})


def _nb_log_joint(model: BaselineModel, X):
    m, v, lp = model.params["means"], model.params["var"], model.params["log_prior"]
    ll = -0.5 * (np.log(2 * np.pi * v).sum(axis=1) + (((X[:, None, :] - m) ** 2) / v).sum(axis=2))
    return ll + lp


def fit_knn(X, y, n_neighbors: int = 120, p: float = 1, leaf_size: int | None = None) -> BaselineModel:
    X, y = _check(X, y)
    if n_neighbors < 1 or n_neighbors > len(X):
        raise ValueError(f"n_neighbors={n_neighbors} must be in [1, {len(X)}]")
    if p < 1:
        raise ValueError("Minkowski p must be >= 1")
    return BaselineModel("KNN", {"X": X.copy(), "y": y.copy()},
                         {"n_neighbors": n_neighbors, "p": p, "leaf_size": leaf_size})


def minkowski(a, b, p: float = 1) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if p == 1:
        return cdist(a, b, "cityblock")
    if p == 2:
        return cdist(a, b, "euclidean")
    return cdist(a, b, "minkowski", p=p)


def _knn_votes(model: BaselineModel, X, chunk: int = 256):
    Xtr, ytr = model.params["X"], model.params["y"]
    k, p = model.hyper["n_neighbors"], model.hyper["p"]
    votes = np.zeros((len(X), N_CLASSES))
    for start in range(0, len(X), chunk):
        dist = minkowski(X[start : start + chunk], Xtr, p)
        for row, d in enumerate(dist):
            kth = np.partition(d, k - 1)[k - 1]
            inside = ytr[d < kth]
            # neighbours tied at the k-th distance are taken in class order,
            # so storage order never matters
            boundary = np.sort(ytr[d == kth])[: k - len(inside)]
            votes[start + row] = np.bincount(np.concatenate([inside, boundary]), minlength=N_CLASSES)
    return votes


def _lr_objective(W, b, X, Y, penalty):
    probs = softmax(X @ W + b)
    n = len(X)
    loss = -np.log(np.maximum((probs * Y).sum(axis=1), 1e-300)).mean() + 0.5 * penalty * (W * W).sum()
    diff = (probs - Y) / n
    return loss, X.T @ diff + penalty * W, diff.sum(axis=0)


def fit_logistic_regression(X, y, C: float = 10.0, max_iter: int = 1000, tol: float = 1e-6) -> BaselineModel:
    """Minimize mean cross-entropy + ||W||^2 / (2 C n).

    That is the usual ``C * sum(CE) + ||W||^2 / 2`` objective divided by n, so
    the minimizer matches the common C convention. The bias is not penalized.
    Full-batch gradient descent with Armijo backtracking.
    """
    X, y = _check(X, y)
    if C <= 0:
        raise ValueError("C must be > 0")
    n, d = X.shape
    Y = np.eye(N_CLASSES)[y]
    penalty = 1.0 / (C * n)
    W, b = np.zeros((d, N_CLASSES)), np.zeros(N_CLASSES)
    loss, gW, gb = _lr_objective(W, b, X, Y, penalty)
    step = 1.0
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        gnorm2 = (gW * gW).sum() + (gb * gb).sum()
        if np.sqrt(gnorm2) < tol:
            break
        step = min(step * 2.0, 1e6)
        while True:
            W_new, b_new = W - step * gW, b - step * gb
            new_loss, new_gW, new_gb = _lr_objective(W_new, b_new, X, Y, penalty)
            if new_loss <= loss - 0.5 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
    return BaselineModel("LogisticRegression", {"W": W, "b": b},
                         {"C": C, "max_iter": max_iter, "tol": tol, "n_iter": n_iter, "loss": float(loss)})


def train_baseline(kind: str, X, y, **hyper) -> BaselineModel:
    if kind == "GaussianNB":
        return fit_gaussian_nb(X, y, **hyper)
    if kind == "KNN":
        return fit_knn(X, y, **hyper)
    if kind == "LogisticRegression":
        return fit_logistic_regression(X, y, **hyper)
    raise ValueError(f"unsupported baseline {kind!r}; choose from {KINDS}")


def baseline_scores(model: BaselineModel, X) -> np.ndarray:
    X = _check(np.atleast_2d(X))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    if model.kind == "GaussianNB":
        return softmax(_nb_log_joint(model, X))
    if model.kind == "KNN":
        return _knn_votes(model, X) / model.hyper["n_neighbors"]
    return softmax(X @ model.params["W"] + model.params["b"])


def predict_baseline_batch(model: BaselineModel, X) -> tuple[np.ndarray, np.ndarray]:
    scores = baseline_scores(model, X)
    return scores.argmax(axis=1), scores


def predict_baseline(model: BaselineModel, x) -> tuple[int, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_baseline takes one feature vector")
    classes, scores = predict_baseline_batch(model, x[None])
    return int(classes[0]), scores[0]


def save_baseline(model: BaselineModel, directory: str | Path) -> None:
    """NB and LR go to one JSON file; KNN stores its train matrix in an
    ``.npz`` next to a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": model.kind, "hyper": model.hyper}
    if model.kind == "KNN":
        np.savez(directory / "knn_train.npz", X=model.params["X"], y=model.params["y"])
        manifest["data"] = "knn_train.npz"
    else:
        manifest["params"] = {k: np.where(np.isinf(v), -1e308, v).tolist() for k, v in model.params.items()}
    with open(directory / "baseline.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)


def load_baseline(directory: str | Path) -> BaselineModel:
    directory = Path(directory)
    with open(directory / "baseline.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest["kind"] == "KNN":
        with np.load(directory / manifest["data"]) as z:
            params = {"X": z["X"], "y": z["y"]}
    else:
        params = {k: np.asarray(v, dtype=np.float64) for k, v in manifest["params"].items()}
        if "log_prior" in params:
            params["log_prior"][params["log_prior"] <= -1e308] = -np.inf
    return BaselineModel(manifest["kind"], params, manifest["hyper"])
