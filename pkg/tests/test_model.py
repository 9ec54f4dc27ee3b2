import numpy as np
import pytest
from scipy import sparse

from querygate.errors import (
    DimensionMismatch,
    EmptyDataset,
    MissingCategoryExamples,
)
from querygate.features import FeaturizerConfig, SparseFeatureVector, featurize
from querygate.model import (
    Hyperparameters,
    LabeledExample,
    ModelWeights,
    evaluate,
    load_model,
    loss_and_grad,
    predict,
    read_dataset,
    report_from_pairs,
    resample_to_distribution,
    save_model,
    score,
    train,
    write_dataset,
    zero_weights,
)
from querygate.taxonomy import (
    NUM_CATEGORIES,
    category_catalog,
    parse_category,
    reference_distribution,
)

CFG = FeaturizerConfig(dim=64)


def make_weights(W=None, b=None, dim=64):
    return ModelWeights(
        dim=dim,
        W=W if W is not None else np.zeros((NUM_CATEGORIES, dim)),
        b=b if b is not None else np.zeros(NUM_CATEGORIES),
        model_version="t",
        featurizer_config_hash="x",
    )


# --- score -------------------------------------------------------------

def test_uniform_scores_for_zero_weights():
    fv = featurize("whatever", CFG)
    s = score(make_weights(), fv)
    assert s == pytest.approx(np.full(13, 1 / 13), abs=1e-12)
    assert s.sum() == pytest.approx(1.0, abs=1e-9)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(13, 64))
    fv = featurize("shift test", CFG)
    s1 = score(make_weights(W=W), fv)
    s2 = score(make_weights(W=W, b=np.full(13, 3.7)), fv)
    assert np.abs(s1 - s2).max() < 1e-9


def test_large_bias_dominates():
    b = np.zeros(13)
    b[0] = 10.0
    s = score(make_weights(b=b), featurize("x", CFG))
    # e^10 / (e^10 + 12) ~= 0.999455
    assert s[0] > 0.99
    assert s[0] == pytest.approx(np.exp(10) / (np.exp(10) + 12), rel=1e-9)


def test_dimension_mismatch():
    fv = SparseFeatureVector(dim=32, indices=np.array([1]), weights=np.array([1.0]))
    with pytest.raises(DimensionMismatch):
        score(make_weights(dim=64), fv)


def test_score_sums_to_one_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        W = rng.normal(scale=3.0, size=(13, 64))
        s = score(make_weights(W=W), featurize("random text", CFG))
        assert s.sum() == pytest.approx(1.0, abs=1e-6)
        assert (s >= 0).all()


# --- predict -----------------------------------------------------------

def test_tie_break_lowest_ordinal():
    p = predict(make_weights(), "anything", CFG)
    assert p.label.ordinal == 0
    assert p.label.id == "felony_crimes"


def test_positive_scaling_preserves_label():
    rng = np.random.default_rng(2)
    W = rng.normal(size=(13, 64))
    for c in (0.5, 2.0, 10.0):
        a = predict(make_weights(W=W), "scaling check", CFG)
        b = predict(make_weights(W=c * W), "scaling check", CFG)
        assert a.label == b.label


# --- train -------------------------------------------------------------

def toy_separable(n_per_class=10):
    felony, safe = category_catalog()[0], category_catalog()[12]
    examples = []
    for i in range(n_per_class):
        examples.append(LabeledExample(text=f"aaa token{i}", label=felony))
        examples.append(LabeledExample(text=f"zzz token{i}", label=safe))
    return examples


def test_train_reaches_100_percent_on_separable_toy_set():
    examples = toy_separable()
    assert len(examples) == 20
    hp = Hyperparameters(learning_rate=0.5, epochs=1000, seed=3)
    weights = train(examples, hp, CFG)
    correct = sum(predict(weights, ex.text, CFG).label == ex.label for ex in examples)
    assert correct == len(examples)


def test_train_determinism():
    examples = toy_separable(5)
    hp = Hyperparameters(epochs=20, seed=11)
    w1 = train(examples, hp, CFG)
    w2 = train(examples, hp, CFG)
    assert w1.W.tobytes() == w2.W.tobytes()
    assert w1.b.tobytes() == w2.b.tobytes()


def test_train_rejects_empty():
    with pytest.raises(EmptyDataset):
        train([], Hyperparameters(), CFG)


def test_gradient_matches_finite_differences():
    # central finite-difference oracle on small random instances
    rng = np.random.default_rng(5)
    rel_errors = []
    for _ in range(20):
        n, d = 4, 16
        X = sparse.csr_matrix(rng.normal(size=(n, d)) * (rng.random((n, d)) < 0.4))
        y = rng.integers(0, 13, size=n)
        W = rng.normal(scale=0.5, size=(13, d))
        b = rng.normal(scale=0.5, size=13)
        l2 = 1e-3
        _, gW, gb = loss_and_grad(W, b, X, y, l2)

        eps = 1e-6
        for _ in range(5):  # spot-check random coordinates
            i, j = rng.integers(0, 13), rng.integers(0, d)
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += eps
            Wm[i, j] -= eps
            lp, _, _ = loss_and_grad(Wp, b, X, y, l2)
            lm, _, _ = loss_and_grad(Wm, b, X, y, l2)
            numeric = (lp - lm) / (2 * eps)
            denom = max(abs(numeric), abs(gW[i, j]), 1e-8)
            rel_errors.append(abs(numeric - gW[i, j]) / denom)
        k = rng.integers(0, 13)
        bp, bm = b.copy(), b.copy()
        bp[k] += eps
        bm[k] -= eps
        lp, _, _ = loss_and_grad(W, bp, X, y, l2)
        lm, _, _ = loss_and_grad(W, bm, X, y, l2)
        numeric = (lp - lm) / (2 * eps)
        denom = max(abs(numeric), abs(gb[k]), 1e-8)
        rel_errors.append(abs(numeric - gb[k]) / denom)
    assert max(rel_errors) < 1e-4


# --- evaluate ----------------------------------------------------------

def test_perfect_predictor_report():
    catalog = category_catalog()
    pairs = [(c, c) for c in catalog for _ in range(3)]
    report = report_from_pairs(pairs)
    assert report.overall_accuracy == 1.0
    assert report.safe_recall == 1.0
    assert report.category_accuracy == 1.0
    assert np.trace(report.confusion) == report.confusion.sum()


def test_paper_shaped_confusion():
    catalog = category_catalog()
    safe = catalog[12]
    pairs = []
    # 175 safe items, 157 predicted safe, 18 over-blocked to felony
    pairs += [(safe, safe)] * 157
    pairs += [(safe, catalog[0])] * 18
    # 125 sensitive items, 100 exactly right, 25 wrong
    pairs += [(catalog[4], catalog[4])] * 100
    pairs += [(catalog[4], catalog[10])] * 25
    report = report_from_pairs(pairs)
    assert report.safe_recall == pytest.approx(157 / 175)
    assert round(report.safe_recall * 100, 1) == 89.7
    assert report.category_accuracy == pytest.approx(100 / 125)
    # brute-force recount of overall accuracy over the synthetic confusion
    assert report.overall_accuracy == pytest.approx((157 + 100) / 300)


def test_confusion_row_sums_match_counts():
    catalog = category_catalog()
    pairs = [(catalog[0], catalog[1])] * 4 + [(catalog[0], catalog[0])] * 6
    report = report_from_pairs(pairs)
    assert report.confusion[0].sum() == 10
    assert report.per_category_accuracy["felony_crimes"] == pytest.approx(0.6)


def test_overall_equals_weighted_per_class():
    rng = np.random.default_rng(9)
    catalog = category_catalog()
    pairs = [
        (catalog[int(rng.integers(0, 13))], catalog[int(rng.integers(0, 13))])
        for _ in range(500)
    ]
    report = report_from_pairs(pairs)
    weighted = sum(
        report.confusion[c.ordinal].sum() * (report.per_category_accuracy[c.id] or 0.0)
        for c in catalog
    ) / report.confusion.sum()
    assert report.overall_accuracy == pytest.approx(weighted)


def test_evaluate_runs_end_to_end(sig_model, small_featurizer):
    testset = [
        LabeledExample(text="sig_safe 방법 n1", label=parse_category("safe")),
        LabeledExample(text="sig_felony_crimes 마약 n1", label=parse_category("felony_crimes")),
    ]
    report = evaluate(sig_model, testset, small_featurizer)
    assert report.overall_accuracy == 1.0


def test_evaluate_rejects_empty(sig_model):
    with pytest.raises(EmptyDataset):
        evaluate(sig_model, [])


# --- resample ----------------------------------------------------------

def corpus_with_all_categories():
    out = []
    for c in category_catalog()[:12]:
        for i in range(3):
            out.append(LabeledExample(text=f"{c.id} example {i}", label=c))
    return out


def test_resample_matches_reference_counts():
    corpus = corpus_with_all_categories()
    sampled = resample_to_distribution(corpus, reference_distribution(), size=1000, seed=0)
    assert len(sampled) == 1000
    counts = {}
    for ex in sampled:
        counts[ex.label.id] = counts.get(ex.label.id, 0) + 1
    ref = reference_distribution()
    total_share = sum(ref.avg.values())
    for cid, share in ref.avg.items():
        expected = round(share / total_share * 1000)
        assert abs(counts.get(cid, 0) - expected) <= 1, cid
    assert abs(counts["discrimination"] - 361) <= 2


def test_resample_single_category_target():
    corpus = corpus_with_all_categories()
    ref = reference_distribution()
    target = type(ref)(
        avg={cid: (100.0 if cid == "privacy" else 0.0) for cid in ref.avg},
        max=ref.max, upper_bound=frozenset(),
    )
    sampled = resample_to_distribution(corpus, target, size=50, seed=1)
    assert all(ex.label.id == "privacy" for ex in sampled)


def test_resample_deterministic():
    corpus = corpus_with_all_categories()
    a = resample_to_distribution(corpus, reference_distribution(), 200, seed=5)
    b = resample_to_distribution(corpus, reference_distribution(), 200, seed=5)
    assert [ex.text for ex in a] == [ex.text for ex in b]


def test_resample_missing_category():
    corpus = [ex for ex in corpus_with_all_categories() if ex.label.id != "privacy"]
    with pytest.raises(MissingCategoryExamples) as exc:
        resample_to_distribution(corpus, reference_distribution(), 100, seed=0)
    assert exc.value.category_id == "privacy"


# --- persistence -------------------------------------------------------

def test_model_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(13)
    weights = make_weights(W=rng.normal(size=(13, 64)), b=rng.normal(size=13))
    path = tmp_path / "model.qgm"
    save_model(path, weights)
    loaded = load_model(path)
    assert loaded.W.tobytes() == weights.W.tobytes()
    assert loaded.b.tobytes() == weights.b.tobytes()
    assert loaded.model_version == weights.model_version
    assert loaded.featurizer_config_hash == weights.featurizer_config_hash


def test_model_file_checksum_detects_corruption(tmp_path):
    path = tmp_path / "model.qgm"
    save_model(path, zero_weights(CFG))
    blob = bytearray(path.read_bytes())
    blob[20] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="checksum"):
        load_model(path)


def test_dataset_round_trip(tmp_path):
    examples = [
        LabeledExample(text="마약 뜻", label=parse_category("safe"), origin="rule_derived"),
        LabeledExample(text="sig_privacy 주소", label=parse_category("privacy")),
    ]
    path = tmp_path / "data.jsonl"
    write_dataset(path, examples)
    loaded = read_dataset(path)
    assert loaded == examples
