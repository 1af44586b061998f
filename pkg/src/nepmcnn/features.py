"""Tweet feature extraction: embedding average (ft), tf-idf bag of words (bow),
per-token class probabilities (ds) and their concatenation (hybrid)."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_CLASSES = 3
FEATURE_KINDS = ("ft", "bow", "ds", "hybrid")


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    tokens: tuple[str, ...]
    vectors: np.ndarray  # (n_tokens, dimension) float64
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64).reshape(len(self.tokens), self.dimension)
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingFormatError("embedding vectors must be finite")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})
        if len(self.index) != len(self.tokens):
            raise EmbeddingFormatError("duplicate tokens in embedding table")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def get(self, token: str) -> np.ndarray | None:
        i = self.index.get(token)
        return None if i is None else self.vectors[i]

    @classmethod
    def from_dict(cls, mapping: dict[str, Sequence[float]], dimension: int) -> "EmbeddingTable":
        tokens = tuple(mapping)
        vecs = np.array([mapping[t] for t in tokens], dtype=np.float64).reshape(len(tokens), dimension)
        return cls(dimension, tokens, vecs)


def load_embeddings(
    path: str | Path, expected_dim: int = 300, restrict_to: Iterable[str] | None = None
) -> EmbeddingTable:
    """Parse a word-vector text file (header ``count dim``, then ``token v1 .. vdim``).

    Duplicate tokens keep their first occurrence. ``restrict_to`` limits the
    table to a token subset, which keeps memory bounded for large files.
    """
    keep = None if restrict_to is None else set(restrict_to)
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError("line 1: header must be 'count dim'")
        try:
            dim = int(header[1])
        except ValueError:
            raise EmbeddingFormatError(f"line 1: bad dimension {header[1]!r}") from None
        if dim != expected_dim:
            raise EmbeddingFormatError(f"line 1: header dimension {dim} != expected {expected_dim}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"line {lineno}: expected {dim} values, found {len(parts) - 1}"
                )
            token = parts[0]
            if token in seen or (keep is not None and token not in keep):
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(f"line {lineno}: unparseable value") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"line {lineno}: non-finite value")
            seen.add(token)
            tokens.append(token)
            rows.append(vec)
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return EmbeddingTable(dim, tuple(tokens), matrix)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dimension}\n")
        for token, vec in zip(table.tokens, table.vectors):
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class BowModel:
    vocabulary: tuple[str, ...]
    idf: np.ndarray
    doc_count: int

    def __post_init__(self):
        idf = np.asarray(self.idf, dtype=np.float64)
        idf.setflags(write=False)
        object.__setattr__(self, "idf", idf)
        object.__setattr__(self, "_pos", {t: i for i, t in enumerate(self.vocabulary)})

    @property
    def positions(self) -> dict[str, int]:
        return self._pos


@dataclass(frozen=True)
class DsModel:
    tokens: tuple[str, ...]
    probs: np.ndarray  # (n_tokens, 3): p(class | token), order negative, neutral, positive
    smoothing_alpha: float = 1.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).reshape(len(self.tokens), N_CLASSES)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_row", {t: i for i, t in enumerate(self.tokens)})

    def row(self, token: str) -> np.ndarray | None:
        i = self._row.get(token)
        return None if i is None else self.probs[i]


@dataclass(frozen=True)
class FeatureModel:
    embeddings: EmbeddingTable
    bow: BowModel
    ds: DsModel
    embedding_path: str | None = None
    embedding_sha256: str | None = None

    @property
    def dims(self) -> dict[str, int]:
        ft, bow = self.embeddings.dimension, len(self.bow.vocabulary)
        return {"ft": ft, "bow": bow, "ds": N_CLASSES, "hybrid": ft + bow + N_CLASSES}

    @property
    def hybrid_dim(self) -> int:
        return self.dims["hybrid"]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self._state_dict(), sort_keys=True).encode())
        h.update(self.embeddings.vectors.tobytes())
        h.update("\n".join(self.embeddings.tokens).encode())
        return h.hexdigest()

    def _state_dict(self) -> dict:
        return {
            "bow": {
                "vocabulary": list(self.bow.vocabulary),
                "idf": self.bow.idf.tolist(),
                "doc_count": self.bow.doc_count,
            },
            "ds": {
                "smoothing_alpha": self.ds.smoothing_alpha,
                "tokens": list(self.ds.tokens),
                "probs": self.ds.probs.tolist(),
            },
            "embeddings": {
                "path": self.embedding_path,
                "sha256": self.embedding_sha256,
                "dimension": self.embeddings.dimension,
            },
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self._state_dict(), fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path, embeddings: EmbeddingTable | None = None) -> "FeatureModel":
        """Restore a saved model; embeddings are re-read from the recorded path
        (and checked against the recorded hash) unless passed in."""
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        emb = d["embeddings"]
        if embeddings is None:
            if emb["path"] is None:
                raise ValueError("feature model has no embedding path; pass embeddings explicitly")
            if emb["sha256"] and file_sha256(emb["path"]) != emb["sha256"]:
                raise ValueError(f"embedding file {emb['path']} does not match recorded hash")
            embeddings = load_embeddings(emb["path"], emb["dimension"])
        elif embeddings.dimension != emb["dimension"]:
            raise ValueError("embedding dimension does not match saved feature model")
        bow = BowModel(tuple(d["bow"]["vocabulary"]), np.array(d["bow"]["idf"]), d["bow"]["doc_count"])
        ds = DsModel(tuple(d["ds"]["tokens"]), np.array(d["ds"]["probs"]), d["ds"]["smoothing_alpha"])
        return cls(embeddings, bow, ds, emb["path"], emb["sha256"])


def fit_bow(docs: Sequence[Sequence[str]], bow_size: int = 100) -> BowModel:
    if bow_size < 1:
        raise ValueError("bow_size must be >= 1")
    freq = Counter(t for doc in docs for t in doc)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < bow_size:
        warnings.warn(
            f"only {len(ranked)} distinct tokens, vocabulary shrinks below {bow_size}",
            stacklevel=2,
        )
    vocab = tuple(t for t, _ in ranked[:bow_size])
    df = Counter(t for doc in docs for t in set(doc))
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in vocab])
    return BowModel(vocab, idf, n)


def fit_ds(docs: Sequence[Sequence[str]], labels: Sequence[int], alpha: float = 1.0) -> DsModel:
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    counts: dict[str, np.ndarray] = {}
    for doc, label in zip(docs, labels):
        for t in doc:
            row = counts.get(t)
            if row is None:
                row = counts[t] = np.zeros(N_CLASSES)
            row[int(label)] += 1
    tokens = tuple(sorted(counts))
    if not tokens:
        return DsModel((), np.zeros((0, N_CLASSES)), alpha)
    c = np.array([counts[t] for t in tokens])
    probs = (c + alpha) / (c.sum(axis=1, keepdims=True) + N_CLASSES * alpha)
    return DsModel(tokens, probs, alpha)


def fit_feature_model(
    docs: Sequence[Sequence[str]],
    labels: Sequence[int],
    embeddings: EmbeddingTable,
    bow_size: int = 100,
    alpha: float = 1.0,
    embedding_path: str | None = None,
    embedding_sha256: str | None = None,
) -> FeatureModel:
    """Fit vocabulary/idf and the ds table on training documents only.

    ``docs`` are already-preprocessed token lists aligned with ``labels``.
    """
    if len(docs) == 0:
        raise ValueError("cannot fit a feature model on an empty training corpus")
    if len(docs) != len(labels):
        raise ValueError("docs and labels differ in length")
    return FeatureModel(
        embeddings,
        fit_bow(docs, bow_size),
        fit_ds(docs, labels, alpha),
        embedding_path,
        embedding_sha256,
    )


def ft_features(tokens: Sequence[str], model: FeatureModel) -> np.ndarray:
    rows = [i for i in (model.embeddings.index.get(t) for t in tokens) if i is not None]
    if not rows:
        return np.zeros(model.embeddings.dimension)
    return model.embeddings.vectors[rows].mean(axis=0)


def bow_features(tokens: Sequence[str], model: FeatureModel) -> np.ndarray:
    pos = model.bow.positions
    tf = np.zeros(len(model.bow.vocabulary))
    for t in tokens:
        i = pos.get(t)
        if i is not None:
            tf[i] += 1.0
    v = tf * model.bow.idf
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def ds_features(tokens: Sequence[str], model: FeatureModel) -> np.ndarray:
    rows = [r for r in (model.ds.row(t) for t in tokens) if r is not None]
    if not rows:
        return np.full(N_CLASSES, 1.0 / N_CLASSES)
    return np.mean(rows, axis=0)


def hybrid_features(tokens: Sequence[str], model: FeatureModel) -> np.ndarray:
    return np.concatenate(
        [ft_features(tokens, model), bow_features(tokens, model), ds_features(tokens, model)]
    )


_EXTRACTORS = {
    "ft": ft_features,
    "bow": bow_features,
    "ds": ds_features,
    "hybrid": hybrid_features,
}


def featurize(docs: Iterable[Sequence[str]], model: FeatureModel, kind: str = "hybrid") -> np.ndarray:
    """Stack one feature vector per document into a (n_docs, dim) matrix."""
    try:
        fn = _EXTRACTORS[kind]
    except KeyError:
        raise ValueError(f"unknown feature kind {kind!r}; choose from {FEATURE_KINDS}") from None
    rows = [fn(doc, model) for doc in docs]
    if not rows:
        return np.zeros((0, model.dims[kind]))
    return np.vstack(rows)


def select_block(hybrid: np.ndarray, kind: str, model_dims: dict[str, int]) -> np.ndarray:
    """Slice the ft/bow/ds columns out of a hybrid feature matrix."""
    ft, bow = model_dims["ft"], model_dims["bow"]
    spans = {"ft": (0, ft), "bow": (ft, ft + bow), "ds": (ft + bow, ft + bow + N_CLASSES),
             "hybrid": (0, ft + bow + N_CLASSES)}
    lo, hi = spans[kind]
    return hybrid[..., lo:hi]
