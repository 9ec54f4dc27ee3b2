"""Frozen feature extraction: hashed character n-grams.

Stands in for the frozen backbone representation.  Character n-grams work on
Korean text without a morphological analyzer, and the hashing keeps the
dimension fixed regardless of vocabulary.  A remote backend can substitute
for the local featurizer while preserving the output type.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import httpx
import numpy as np

from querygate.errors import RemoteFeaturizerUnavailable

DEFAULT_DIM = 2**18


@dataclass(frozen=True)
class FeaturizerConfig:
    dim: int = DEFAULT_DIM
    ngram_min: int = 1
    ngram_max: int = 3
    # When set, featurize() calls this HTTP endpoint instead of hashing locally.
    remote_url: str | None = None
    remote_timeout: float = 5.0

    def config_hash(self) -> str:
        payload = json.dumps(
            {"dim": self.dim, "ngram_min": self.ngram_min, "ngram_max": self.ngram_max},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class SparseFeatureVector:
    dim: int
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    weights: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.indices.shape != self.weights.shape:
            raise ValueError("indices and weights must have equal length")
        if len(self.indices) and (self.indices[0] < 0 or self.indices[-1] >= self.dim):
            raise ValueError("feature index out of range")


def _hash_ngram(ngram: str, dim: int) -> int:
    digest = hashlib.blake2b(ngram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def featurize(text: str, config: FeaturizerConfig | None = None) -> SparseFeatureVector:
    """Deterministic hashed character n-grams with L2-normalized counts."""
    config = config or FeaturizerConfig()
    if config.remote_url is not None:
        return _featurize_remote(text, config)

    counts: dict[int, float] = {}
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(text) - n + 1):
            idx = _hash_ngram(text[i : i + n], config.dim)
            counts[idx] = counts.get(idx, 0.0) + 1.0
    if not counts:
        return SparseFeatureVector(dim=config.dim)

    indices = np.array(sorted(counts), dtype=np.int64)
    weights = np.array([counts[i] for i in indices], dtype=np.float64)
    norm = math.sqrt(float(np.dot(weights, weights)))
    weights /= norm
    return SparseFeatureVector(dim=config.dim, indices=indices, weights=weights)


def _featurize_remote(text: str, config: FeaturizerConfig) -> SparseFeatureVector:
    try:
        resp = httpx.post(config.remote_url, json={"text": text}, timeout=config.remote_timeout)
        resp.raise_for_status()
        body = resp.json()
    except (httpx.HTTPError, ValueError) as exc:
        raise RemoteFeaturizerUnavailable(str(exc)) from exc
    try:
        entries = body["entries"]
        dim = int(body["dimension"])
        indices = np.array([e[0] for e in entries], dtype=np.int64)
        weights = np.array([e[1] for e in entries], dtype=np.float64)
    except (KeyError, TypeError, IndexError) as exc:
        raise RemoteFeaturizerUnavailable(f"malformed response: {exc}") from exc
    return SparseFeatureVector(dim=dim, indices=indices, weights=weights)
