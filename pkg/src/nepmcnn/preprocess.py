"""Tweet normalization: stopword removal, character stripping and suffix stemming.

Pipeline order is fixed:

1. whitespace tokenization
2. stopword removal
3. removal of URLs, mentions, hashtag markers and every character outside the
   Devanagari letter/sign ranges (Latin letters, digits of any script,
   punctuation, emoji, joiners); tokens left empty or holding only
   combining marks are dropped
4. single-pass longest-suffix stemming

Tokens that only become stopwords after stripping or stemming (``को,`` or a
stem equal to a function word) are filtered again after steps 3 and 4, so
no output token is ever a stopword. Stems left holding only combining marks
are dropped as well.
"""

from __future__ import annotations

import os
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

RESOURCE_ENV = "NEPMCNN_RESOURCES"

_URL = re.compile(r"^(?:https?://|www\.)", re.IGNORECASE)
# Devanagari block minus danda, double danda, digits and abbreviation sign (U+0964-U+0970)
_STRIP = re.compile(r"[^\u0900-\u0963\u0971-\u097F]+")


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str]
    suffixes: tuple[str, ...]
    min_stem_length: int = 2

    def __post_init__(self):
        if self.min_stem_length < 1:
            raise ValueError("min_stem_length must be >= 1")
        ordered = tuple(sorted(set(self.suffixes), key=lambda s: (-len(s), s)))
        object.__setattr__(self, "suffixes", ordered)
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))


def read_resource_list(path: str | Path) -> list[str]:
    """One entry per line, UTF-8; blank lines and ``#`` comments are skipped."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                entries.append(unicodedata.normalize("NFC", line))
    return entries


def default_resource_dir() -> Path:
    env = os.environ.get(RESOURCE_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("nepmcnn") / "resources"))


def load_config(
    stopwords_path: str | Path | None = None,
    suffixes_path: str | Path | None = None,
    min_stem_length: int = 2,
) -> PreprocessConfig:
    base = default_resource_dir()
    stop = read_resource_list(stopwords_path or base / "stopwords.txt")
    suff = read_resource_list(suffixes_path or base / "suffixes.txt")
    return PreprocessConfig(frozenset(stop), tuple(suff), min_stem_length)


def stem(token: str, config: PreprocessConfig) -> str:
    # only the longest matching suffix is considered; no iteration
    for suffix in config.suffixes:
        if token.endswith(suffix):
            if len(token) - len(suffix) >= config.min_stem_length:
                return token[: -len(suffix)]
            return token
    return token


def _marks_only(token: str) -> bool:
    return all(unicodedata.category(ch).startswith("M") for ch in token)


def strip_token(token: str) -> str:
    """Remove non-Devanagari content from one token; '' if nothing survives."""
    if _URL.match(token) or token.startswith("@"):
        return ""
    token = _STRIP.sub("", token)
    if _marks_only(token):
        return ""
    return token


def preprocess(raw: str, config: PreprocessConfig) -> list[str]:
    tokens = unicodedata.normalize("NFC", raw).split()
    tokens = [t for t in tokens if t not in config.stopwords]
    tokens = [s for s in map(strip_token, tokens) if s and s not in config.stopwords]
    tokens = [stem(t, config) for t in tokens]
    # a stem can be bare vowel signs ("ााको" -> "ाा"); those go like stripped ones
    return [t for t in tokens if t not in config.stopwords and not _marks_only(t)]


def preprocess_all(texts: Iterable[str], config: PreprocessConfig) -> list[list[str]]:
    return [preprocess(t, config) for t in texts]
