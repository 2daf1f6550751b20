"""Deterministic text embedding and exact cosine retrieval.

Embeddings are L2-normalized counts of hashed character 3-grams. The
hash is crc32, so vectors are identical across processes and platforms
regardless of interpreter hash randomization. Queries are exact k-NN by
cosine similarity with stable, insertion-order tie-breaking.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

DEFAULT_DIMENSION = 256


def embed_text(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Hashed character-3-gram count vector, L2 normalized.

    Case-folded; texts shorter than 3 characters embed as the zero vector.
    """
    vec = np.zeros(dimension, dtype=np.float64)
    folded = text.lower()
    for i in range(len(folded) - 2):
        gram = folded[i : i + 3]
        vec[zlib.crc32(gram.encode("utf-8")) % dimension] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; zero vectors have similarity 0 with everything."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass
class RetrievalIndex:
    """Texts embedded once, queried by exact cosine scan."""

    texts: list[str]
    dimension: int = DEFAULT_DIMENSION

    def __post_init__(self) -> None:
        self._matrix = (
            np.stack([embed_text(t, self.dimension) for t in self.texts])
            if self.texts
            else np.zeros((0, self.dimension))
        )

    def __len__(self) -> int:
        return len(self.texts)

    def query(self, text: str, k: int = 4) -> list[tuple[int, float]]:
        """Top-k (index, score) pairs, score descending.

        Equal scores keep insertion order (stable sort on the negated
        scores), so ties go to the earlier entry.
        """
        if not self.texts:
            return []
        q = embed_text(text, self.dimension)
        scores = self._matrix @ q
        order = np.argsort(-scores, kind="stable")[: max(k, 0)]
        return [(int(i), float(scores[i])) for i in order]

    def save(self, path: str | Path) -> None:
        payload = {"dimension": self.dimension, "texts": self.texts}
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> "RetrievalIndex":
        try:
            payload = json.loads(Path(path).read_text())
            return cls(texts=list(payload["texts"]), dimension=int(payload["dimension"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: bad retrieval index ({exc})") from exc


def build_index(texts: Sequence[str], dimension: int = DEFAULT_DIMENSION) -> RetrievalIndex:
    return RetrievalIndex(texts=list(texts), dimension=dimension)
