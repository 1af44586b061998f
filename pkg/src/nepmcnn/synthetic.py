"""Synthetic Devanagari tweet corpora with planted, learnable class structure.

Every tweet mixes three kinds of tokens:

* content tokens drawn from a large per-class pool; their embeddings sit
  around a class centroid, so the averaged embedding (ft) separates classes
  even for tokens never seen in training;
* marker tokens, a handful per class and frequent enough to enter the
  bag-of-words vocabulary (bow) and dominate the per-token class table (ds);
* shared filler tokens with class-free embeddings.

Raw tweets are also sprinkled with URLs, mentions, digits, Latin words and
stopwords that preprocessing must remove.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CLASS_NAMES, LabeledCorpus
from .features import EmbeddingTable, save_embeddings
from .preprocess import PreprocessConfig, preprocess

_CONSONANTS = [chr(c) for c in range(0x0915, 0x093A)]
_VOWEL_SIGNS = ["", "", "ा", "ि", "ी", "ु", "ू", "े", "ै", "ो", "ौ"]
_NOISE = ["https://t.co/x1Yz", "@user_42", "2021", "covid", "RT", "19", "www.example.com", ":)"]


@dataclass
class SyntheticSpec:
    n_per_class: int = 400
    dim: int = 300
    content_pool: int = 1500
    shared_pool: int = 60
    markers_per_class: int = 12
    content_per_tweet: tuple[int, int] = (3, 6)
    shared_per_tweet: tuple[int, int] = (2, 5)
    marker_prob: float = 0.5
    noise_prob: float = 0.3
    centroid_scale: float = 0.18
    token_noise: float = 1.0
    seed: int = 0


@dataclass
class SyntheticData:
    corpus: LabeledCorpus
    embeddings: EmbeddingTable
    content_tokens: list[list[str]]
    markers: list[list[str]]
    shared: list[str]


def _pseudo_words(n: int, rng: np.random.Generator, config: PreprocessConfig, taken: set[str]) -> list[str]:
    words: list[str] = []
    while len(words) < n:
        syllables = rng.integers(2, 4)
        w = "".join(
            _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWEL_SIGNS[rng.integers(len(_VOWEL_SIGNS))]
            for _ in range(syllables)
        )
        # keep only words that survive preprocessing unchanged
        if w in taken or preprocess(w, config) != [w]:
            continue
        taken.add(w)
        words.append(w)
    return words


def make_synthetic(spec: SyntheticSpec, config: PreprocessConfig) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    taken: set[str] = set()
    content = [_pseudo_words(spec.content_pool, rng, config, taken) for _ in CLASS_NAMES]
    markers = [_pseudo_words(spec.markers_per_class, rng, config, taken) for _ in CLASS_NAMES]
    shared = _pseudo_words(spec.shared_pool, rng, config, taken)

    vectors: dict[str, np.ndarray] = {}
    centroids = rng.normal(0.0, spec.centroid_scale, size=(len(CLASS_NAMES), spec.dim))
    for c in range(len(CLASS_NAMES)):
        for t in content[c] + markers[c]:
            vectors[t] = centroids[c] + rng.normal(0.0, spec.token_noise, spec.dim)
    for t in shared:
        vectors[t] = rng.normal(0.0, spec.token_noise, spec.dim)
    # 6 decimals keep the written .vec file small and its reload exact
    table = EmbeddingTable.from_dict({t: np.round(v, 6) for t, v in vectors.items()}, spec.dim)

    stop = sorted(config.stopwords)
    texts, labels = [], []
    for c in range(len(CLASS_NAMES)):
        for _ in range(spec.n_per_class):
            lo, hi = spec.content_per_tweet
            words = list(rng.choice(content[c], size=rng.integers(lo, hi + 1)))
            lo, hi = spec.shared_per_tweet
            words += list(rng.choice(shared, size=rng.integers(lo, hi + 1)))
            if rng.random() < spec.marker_prob:
                words.append(markers[c][rng.integers(len(markers[c]))])
            if stop and rng.random() < spec.noise_prob:
                words.append(stop[rng.integers(len(stop))])
            if rng.random() < spec.noise_prob:
                words.append(_NOISE[rng.integers(len(_NOISE))])
            if rng.random() < spec.noise_prob:
                words[0] = "#" + words[0]
            words = [str(w) for w in rng.permutation(words)]
            if rng.random() < spec.noise_prob:
                words[-1] += "।"
            texts.append(" ".join(words))
            labels.append(c)
    order = rng.permutation(len(texts))
    corpus = LabeledCorpus(tuple(texts[i] for i in order), np.asarray(labels)[order])
    return SyntheticData(corpus, table, content, markers, shared)


def write_corpus_csv(corpus: LabeledCorpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["text", "label"])
        for text, label in zip(corpus.texts, corpus.labels):
            w.writerow([text, CLASS_NAMES[label]])


def write_synthetic(directory: str | Path, spec: SyntheticSpec, config: PreprocessConfig) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = make_synthetic(spec, config)
    paths = {"dataset": directory / "tweets.csv", "embeddings": directory / "vectors.vec"}
    write_corpus_csv(data.corpus, paths["dataset"])
    save_embeddings(data.embeddings, paths["embeddings"])
    return paths
