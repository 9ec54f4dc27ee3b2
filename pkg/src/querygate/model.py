"""13-way linear head over frozen features: scoring, training, evaluation.

Only W and b are trainable; the featurizer configuration never changes during
training (frozen-backbone analog).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from querygate.errors import (
    DimensionMismatch,
    EmptyDataset,
    MissingCategoryExamples,
    NonFiniteLoss,
)
from querygate.features import FeaturizerConfig, SparseFeatureVector, featurize
from querygate.taxonomy import (
    NUM_CATEGORIES,
    Category,
    ReferenceDistribution,
    category_catalog,
    parse_category,
)

ORIGINS = ("public_corpus", "internal_annotation", "rule_derived")


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: Category
    origin: str = "internal_annotation"

    def __post_init__(self):
        if not self.text:
            raise ValueError("example text must be non-empty")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")


@dataclass
class ModelWeights:
    dim: int
    W: np.ndarray  # (13, dim)
    b: np.ndarray  # (13,)
    model_version: str
    featurizer_config_hash: str

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        if self.W.shape != (NUM_CATEGORIES, self.dim) or self.b.shape != (NUM_CATEGORIES,):
            raise ValueError("weight shapes do not match dimension")
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise ValueError("weights must be finite")


def zero_weights(config: FeaturizerConfig, model_version: str = "zero") -> ModelWeights:
    return ModelWeights(
        dim=config.dim,
        W=np.zeros((NUM_CATEGORIES, config.dim)),
        b=np.zeros(NUM_CATEGORIES),
        model_version=model_version,
        featurizer_config_hash=config.config_hash(),
    )


@dataclass(frozen=True)
class Prediction:
    label: Category
    scores: np.ndarray
    model_version: str


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def score(weights: ModelWeights, features: SparseFeatureVector) -> np.ndarray:
    """softmax(W.x + b) over the 13 categories."""
    if features.dim != weights.dim:
        raise DimensionMismatch(weights.dim, features.dim)
    if len(features.indices):
        logits = weights.W[:, features.indices] @ features.weights + weights.b
    else:
        logits = weights.b.copy()
    return _softmax(logits)


def predict(weights: ModelWeights, text: str, config: FeaturizerConfig | None = None) -> Prediction:
    """1-best label; ties break toward the lowest ordinal (conservative)."""
    scores = score(weights, featurize(text, config))
    label = category_catalog()[int(np.argmax(scores))]  # argmax returns first max
    return Prediction(label=label, scores=scores, model_version=weights.model_version)


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.1
    l2: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0


def _design_matrix(examples: list[LabeledExample], config: FeaturizerConfig) -> tuple[sparse.csr_matrix, np.ndarray]:
    rows, cols, vals = [], [], []
    labels = np.empty(len(examples), dtype=np.int64)
    for i, ex in enumerate(examples):
        fv = featurize(ex.text, config)
        rows.extend([i] * len(fv.indices))
        cols.extend(fv.indices.tolist())
        vals.extend(fv.weights.tolist())
        labels[i] = ex.label.ordinal
    X = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(examples), config.dim), dtype=np.float64
    )
    return X, labels


def loss_and_grad(
    W: np.ndarray, b: np.ndarray, X: sparse.csr_matrix, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy plus L2 penalty on W, with gradients.

    Kept separate from train() so gradient checks can exercise it directly.
    """
    n = X.shape[0]
    logits = X @ W.T + b  # (n, 13)
    probs = _softmax(logits)
    eps = 1e-12
    loss = -np.log(probs[np.arange(n), y] + eps).mean() + 0.5 * l2 * float((W * W).sum())
    delta = probs
    delta[np.arange(n), y] -= 1.0
    grad_W = (delta.T @ X) / n + l2 * W
    grad_b = delta.mean(axis=0)
    return float(loss), np.asarray(grad_W), grad_b


def train(
    examples: list[LabeledExample],
    hp: Hyperparameters | None = None,
    config: FeaturizerConfig | None = None,
    model_version: str = "v1",
) -> ModelWeights:
    """Mini-batch gradient descent on the linear head; deterministic under hp.seed."""
    if not examples:
        raise EmptyDataset("no training examples")
    hp = hp or Hyperparameters()
    config = config or FeaturizerConfig()

    X, y = _design_matrix(examples, config)
    n = X.shape[0]
    W = np.zeros((NUM_CATEGORIES, config.dim))
    b = np.zeros(NUM_CATEGORIES)
    rng = np.random.default_rng(hp.seed)

    for _ in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = order[start : start + hp.batch_size]
            loss, gW, gb = loss_and_grad(W, b, X[batch], y[batch], hp.l2)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged to {loss}")
            W -= hp.learning_rate * gW
            b -= hp.learning_rate * gb

    return ModelWeights(
        dim=config.dim,
        W=W,
        b=b,
        model_version=model_version,
        featurizer_config_hash=config.config_hash(),
    )


@dataclass
class EvalReport:
    confusion: np.ndarray  # (13, 13), rows = true label, cols = predicted
    per_category_accuracy: dict[str, float | None]
    safe_recall: float | None
    category_accuracy: float | None  # exact-category accuracy over sensitive-labeled items
    overall_accuracy: float


def report_from_pairs(pairs: list[tuple[Category, Category]]) -> EvalReport:
    """Build an EvalReport from (true, predicted) label pairs."""
    if not pairs:
        raise EmptyDataset("no evaluation pairs")
    confusion = np.zeros((NUM_CATEGORIES, NUM_CATEGORIES), dtype=np.int64)
    for true, pred in pairs:
        confusion[true.ordinal, pred.ordinal] += 1

    catalog = category_catalog()
    per_cat: dict[str, float | None] = {}
    for c in catalog:
        total = int(confusion[c.ordinal].sum())
        per_cat[c.id] = (confusion[c.ordinal, c.ordinal] / total) if total else None

    safe_total = int(confusion[12].sum())
    safe_recall = (int(confusion[12, 12]) / safe_total) if safe_total else None
    sens_total = int(confusion[:12].sum())
    sens_correct = int(np.trace(confusion[:12, :12]))
    category_accuracy = (sens_correct / sens_total) if sens_total else None
    overall = int(np.trace(confusion)) / int(confusion.sum())

    return EvalReport(
        confusion=confusion,
        per_category_accuracy=per_cat,
        safe_recall=safe_recall,
        category_accuracy=category_accuracy,
        overall_accuracy=overall,
    )


def evaluate(
    weights: ModelWeights,
    testset: list[LabeledExample],
    config: FeaturizerConfig | None = None,
) -> EvalReport:
    if not testset:
        raise EmptyDataset("no test examples")
    pairs = [(ex.label, predict(weights, ex.text, config).label) for ex in testset]
    return report_from_pairs(pairs)


def resample_to_distribution(
    corpus: list[LabeledExample],
    target: ReferenceDistribution,
    size: int,
    seed: int = 0,
) -> list[LabeledExample]:
    """Sample (with replacement if needed) so category counts match target shares.

    Counts come from largest-remainder allocation of the normalized shares, so
    each is within +/-1 of round(share/100 * size) and the total is exactly size.
    """
    total_share = sum(target.avg.values())
    quotas = {cid: share / total_share * size for cid, share in target.avg.items() if share > 0}
    counts = {cid: int(q) for cid, q in quotas.items()}
    shortfall = size - sum(counts.values())
    for cid, _ in sorted(quotas.items(), key=lambda kv: (kv[1] - int(kv[1]), kv[0]), reverse=True)[:shortfall]:
        counts[cid] += 1

    by_cat: dict[str, list[LabeledExample]] = {}
    for ex in corpus:
        by_cat.setdefault(ex.label.id, []).append(ex)

    rng = np.random.default_rng(seed)
    out: list[LabeledExample] = []
    for cid in sorted(counts):
        k = counts[cid]
        if k == 0:
            continue
        pool = by_cat.get(cid)
        if not pool:
            raise MissingCategoryExamples(cid)
        picks = rng.choice(len(pool), size=k, replace=len(pool) < k)
        out.extend(pool[int(i)] for i in picks)
    return out


# --- dataset file format: one JSON object per line -------------------------

def write_dataset(path, examples: list[LabeledExample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(
                {"text": ex.text, "label": ex.label.id, "origin": ex.origin},
                ensure_ascii=False,
            ) + "\n")


def read_dataset(path) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(LabeledExample(
                text=obj["text"],
                label=parse_category(obj["label"]),
                origin=obj.get("origin", "internal_annotation"),
            ))
    return out


# --- model file format ------------------------------------------------------
# magic | format byte | u32 header len | JSON header | W bytes | b bytes | sha256

_MAGIC = b"QGMW"
_FORMAT_VERSION = 1


def save_model(path, weights: ModelWeights) -> None:
    header = json.dumps({
        "dim": weights.dim,
        "model_version": weights.model_version,
        "featurizer_config_hash": weights.featurizer_config_hash,
    }).encode("utf-8")
    body = (
        _MAGIC
        + bytes([_FORMAT_VERSION])
        + struct.pack("<I", len(header))
        + header
        + weights.W.tobytes()
        + weights.b.tobytes()
    )
    with open(path, "wb") as f:
        f.write(body + hashlib.sha256(body).digest())


def load_model(path) -> ModelWeights:
    with open(path, "rb") as f:
        blob = f.read()
    body, checksum = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise ValueError("model file checksum mismatch")
    if body[:4] != _MAGIC:
        raise ValueError("not a model file")
    if body[4] != _FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {body[4]}")
    (header_len,) = struct.unpack("<I", body[5:9])
    header = json.loads(body[9 : 9 + header_len])
    dim = header["dim"]
    offset = 9 + header_len
    w_bytes = NUM_CATEGORIES * dim * 8
    W = np.frombuffer(body[offset : offset + w_bytes], dtype=np.float64).reshape(NUM_CATEGORIES, dim)
    b = np.frombuffer(body[offset + w_bytes : offset + w_bytes + NUM_CATEGORIES * 8], dtype=np.float64)
    return ModelWeights(
        dim=dim,
        W=W.copy(),
        b=b.copy(),
        model_version=header["model_version"],
        featurizer_config_hash=header["featurizer_config_hash"],
    )
