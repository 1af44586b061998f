"""Labeled tweet corpus loading and stratified train/test splitting."""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class Sentiment(enum.IntEnum):
    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2


CLASS_NAMES = tuple(c.name.lower() for c in Sentiment)

DEFAULT_LABEL_MAP: dict[str, Sentiment] = {
    "negative": Sentiment.NEGATIVE,
    "neutral": Sentiment.NEUTRAL,
    "positive": Sentiment.POSITIVE,
    "0": Sentiment.NEGATIVE,
    "1": Sentiment.NEUTRAL,
    "2": Sentiment.POSITIVE,
}


class DatasetError(ValueError):
    """Raised for unreadable or malformed dataset files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LabeledCorpus:
    texts: tuple[str, ...]
    labels: np.ndarray  # int64 class indices

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or len(labels) != len(self.texts):
            raise ValueError("labels must be a 1-D array aligned with texts")
        if len(labels) and (labels.min() < 0 or labels.max() > 2):
            raise ValueError("labels must be in {0, 1, 2}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.texts)

    @property
    def class_counts(self) -> dict[Sentiment, int]:
        counts = Counter(self.labels.tolist())
        return {c: counts.get(int(c), 0) for c in Sentiment}

    def subset(self, indices: Sequence[int]) -> "LabeledCorpus":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledCorpus(tuple(self.texts[i] for i in idx), self.labels[idx])


def as_sentiment(value) -> Sentiment:
    """Accept a Sentiment, a class index, or a class name."""
    if isinstance(value, str) and not value.strip().lstrip("-").isdigit():
        try:
            return Sentiment[value.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown class name {value!r}") from None
    return Sentiment(int(value))


def parse_label(token: str, label_map: Mapping[str, Sentiment] | None = None) -> Sentiment:
    mapping = DEFAULT_LABEL_MAP if label_map is None else label_map
    key = token.strip().lower()
    if key not in mapping:
        raise KeyError(token)
    return Sentiment(mapping[key])


def load_dataset(
    path: str | Path,
    text_column: str = "text",
    label_column: str = "label",
    delimiter: str | None = None,
    label_map: Mapping[str, Sentiment | int | str] | None = None,
) -> LabeledCorpus:
    """Read a CSV/TSV file with a header row into a :class:`LabeledCorpus`.

    The delimiter defaults to a tab for ``.tsv`` files and a comma otherwise.
    Labels are matched case-insensitively against ``label_map`` (default:
    negative/neutral/positive or 0/1/2). Line numbers in errors are 1-based
    physical lines of the file, the header being line 1.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    if label_map is not None:
        label_map = {str(k).strip().lower(): as_sentiment(v) for k, v in label_map.items()}

    texts: list[str] = []
    labels: list[int] = []
    with path.open(encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty file, header row required", line=1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DatasetError(f"unparseable header: {exc}", line=1) from None
        header = [h.strip() for h in header]
        for col in (text_column, label_column):
            if col not in header:
                raise DatasetError(f"column {col!r} not in header {header}", line=1)
        ti, li = header.index(text_column), header.index(label_column)

        while True:
            start_line = reader.line_num + 1
            try:
                row = next(reader)
            except StopIteration:
                break
            except (csv.Error, UnicodeDecodeError) as exc:
                raise DatasetError(f"unparseable row: {exc}", line=start_line) from None
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"expected {len(header)} fields, found {len(row)}", line=start_line
                )
            try:
                label = parse_label(row[li], label_map)
            except KeyError:
                raise DatasetError(f"unknown label {row[li]!r}", line=start_line) from None
            texts.append(row[ti])
            labels.append(int(label))
    return LabeledCorpus(tuple(texts), np.asarray(labels, dtype=np.int64))


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class SplitPlan:
    folds: tuple[Fold, ...]
    ratio: float
    seed: int
    n_samples: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "folds": [
                {"train": f.train.tolist(), "test": f.test.tolist()} for f in self.folds
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        folds = tuple(
            Fold(np.asarray(f["train"], dtype=np.int64), np.asarray(f["test"], dtype=np.int64))
            for f in d["folds"]
        )
        return cls(folds, float(d["ratio"]), int(d["seed"]), int(d.get("n_samples", 0)))


def stratified_train_size(class_size: int, ratio: float) -> int:
    # nearest integer, exact halves go to train; both sides keep >= 1 record
    n = math.floor(ratio * class_size + 0.5)
    return min(max(n, 1), class_size - 1)


def stratified_splits(
    corpus: LabeledCorpus | np.ndarray, ratio: float = 0.7, n_folds: int = 10, seed: int = 0
) -> SplitPlan:
    """Draw ``n_folds`` independent stratified train/test partitions.

    Fold ``i`` is shuffled with seed ``seed + i`` so that any fold can be
    regenerated on its own. Accepts a corpus or a bare label array.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if n_folds < 1:
        raise ValueError(f"n_folds must be >= 1, got {n_folds}")
    labels = corpus.labels if isinstance(corpus, LabeledCorpus) else np.asarray(corpus)
    by_class = {c: np.flatnonzero(labels == c) for c in np.unique(labels)}
    for c, idx in by_class.items():
        if len(idx) < 2:
            raise ValueError(f"class {Sentiment(int(c)).name} has {len(idx)} record(s); need >= 2")

    folds = []
    for i in range(n_folds):
        rng = np.random.default_rng(seed + i)
        train, test = [], []
        for c in sorted(by_class):
            idx = rng.permutation(by_class[c])
            n_train = stratified_train_size(len(idx), ratio)
            train.append(idx[:n_train])
            test.append(idx[n_train:])
        folds.append(Fold(np.sort(np.concatenate(train)), np.sort(np.concatenate(test))))
    return SplitPlan(tuple(folds), ratio, seed, len(labels))
