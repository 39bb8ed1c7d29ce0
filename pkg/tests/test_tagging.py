import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poirec.alignment import AlignmentPair, train_user_model
from poirec.domain import CheckIn, DomainError, UserRecord, VenueRecord
from poirec.tagging import (
    NULL_LABEL,
    LabeledSequence,
    TaggerModel,
    derive_labeled_sequences,
    label_pair,
    predict_tags,
    predicted_tag_set,
    tagger_metrics,
    train_tagger,
)

KINDS = ("maxent", "svm")


def test_worked_annotation():
    keywords = ("burgers", "chicken", "good-for-a-late-night", "pasta", "good-for-groups", "lively")
    tags = ("restaurants", "beer", "cocktails", "food")
    seq = label_pair(AlignmentPair(keywords, tags), (1, 2, 3, 4, 0, 0))
    assert seq.labels == ("restaurants", "beer", "cocktails", "food", "null", "null")


def test_trivial_annotations():
    pair = AlignmentPair(("a", "b"), ("x",))
    assert label_pair(pair, (0, 0)).labels == (NULL_LABEL, NULL_LABEL)
    assert label_pair(AlignmentPair(("a",), ("x",)), (1,)).labels == ("x",)
    with pytest.raises(DomainError):
        LabeledSequence(("a",), ())


def test_derive_from_trained_model():
    venues = {
        "v1": VenueRecord("v1", keywords=("pasta", "quiet")),
        "v2": VenueRecord("v2", keywords=("pasta", "lively")),
        "v3": VenueRecord("v3", keywords=("beer", "lively")),
    }
    user = UserRecord("u", (CheckIn("v1", 5, ("food",)), CheckIn("v2", 4, ("food",)), CheckIn("v3", 4, ("drinks",))))
    seqs = derive_labeled_sequences(user, train_user_model(user, venues), venues)
    assert len(seqs) == 3
    assert all(len(s.tokens) == len(s.labels) for s in seqs)
    assert seqs[0].labels[0] == "food"
    assert derive_labeled_sequences(user, None, venues) == []


@pytest.mark.parametrize("kind", KINDS)
def test_deterministic_toy(kind):
    model = train_tagger([LabeledSequence(("burgers",), ("food",))] * 50, kind=kind)
    assert predict_tags(model, ("burgers",)) == ("food",)
    # Single-label corpus: constant predictor.
    assert model.labels == ("food",)
    assert model.posteriors(("burgers",))[0, 0] > 0.99


def test_maxent_separable_probability():
    corpus = [LabeledSequence(("burgers", "lively"), ("food", NULL_LABEL))] * 50
    model = train_tagger(corpus, kind="maxent")
    post = model.posteriors(("burgers",))[0]
    assert post[model.labels.index("food")] > 0.99


def test_contradictory_corpus_is_half():
    corpus = [LabeledSequence(("a",), ("x",)), LabeledSequence(("a",), ("y",))]
    model = train_tagger(corpus, kind="maxent")
    np.testing.assert_allclose(model.posteriors(("a",))[0], [0.5, 0.5], atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_seed_determinism(kind):
    corpus = [
        LabeledSequence(("a", "b", "c"), ("x", NULL_LABEL, "y")),
        LabeledSequence(("b", "d"), (NULL_LABEL, "x")),
    ]
    a = train_tagger(corpus, kind=kind, seed=3)
    b = train_tagger(corpus, kind=kind, seed=3)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.weights.shape == (len(a.labels), len(a.features) + 1)


@pytest.mark.parametrize("kind", KINDS)
def test_unseen_and_empty(kind):
    corpus = [LabeledSequence(("a", "b", "c", "d"), ("x", NULL_LABEL, NULL_LABEL, NULL_LABEL))] * 5
    model = train_tagger(corpus, kind=kind)
    assert predict_tags(model, ()) == ()
    assert predicted_tag_set(model, ()) == set()
    assert predict_tags(model, ("never-seen",)) == (NULL_LABEL,)


def _separable_corpus(seed, n_seq=30):
    rng = np.random.default_rng(seed)
    vocab = [f"w{i}" for i in range(15)]
    label_of = {w: (rng.choice(["x", "y", "z"]) if i < 8 else NULL_LABEL) for i, w in enumerate(vocab)}
    out = []
    for _ in range(n_seq):
        toks = tuple(rng.choice(vocab, int(rng.integers(1, 6))))
        out.append(LabeledSequence(toks, tuple(label_of[t] for t in toks)))
    return out


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(KINDS))
def test_separable_training_f_is_one(seed, kind):
    corpus = _separable_corpus(seed)
    model = train_tagger(corpus, kind=kind)
    pred = [LabeledSequence(s.tokens, model.predict(s.tokens)) for s in corpus]
    if any(l != NULL_LABEL for s in corpus for l in s.labels):
        assert tagger_metrics(pred, corpus)[2] == pytest.approx(1.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_zero_order_and_normalized(seed):
    corpus = _separable_corpus(seed)
    model = train_tagger(corpus, kind="maxent")
    toks = corpus[0].tokens + ("w3", "w9")
    perm = np.random.default_rng(seed).permutation(len(toks))
    assert model.predict(tuple(toks[i] for i in perm)) == tuple(model.predict(toks)[i] for i in perm)
    np.testing.assert_allclose(model.posteriors(toks).sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip(kind):
    model = train_tagger(_separable_corpus(0), kind=kind)
    back = TaggerModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.weights, model.weights)
    assert back.predict(("w1", "w12")) == model.predict(("w1", "w12"))


def test_bad_arguments():
    corpus = [LabeledSequence(("a",), ("x",))]
    with pytest.raises(ValueError):
        train_tagger(corpus, kind="crf2")
    with pytest.raises(ValueError):
        train_tagger(corpus, reg=0.0)
    with pytest.raises(DomainError):
        train_tagger([])


class TestMetrics:
    def test_perfect(self):
        gold = [LabeledSequence(("a", "b"), ("x", NULL_LABEL))]
        assert tagger_metrics(gold, gold) == (1.0, 1.0, 1.0)

    def test_all_null_predictions(self):
        gold = [LabeledSequence(("a", "b"), ("x", "y"))]
        pred = [LabeledSequence(("a", "b"), (NULL_LABEL, NULL_LABEL))]
        assert tagger_metrics(pred, gold) == (0.0, 0.0, 0.0)

    def test_two_two_two(self):
        gold = [LabeledSequence(("a", "b", "c", "d", "e"), ("x", "y", "z", "w", NULL_LABEL))]
        pred = [LabeledSequence(("a", "b", "c", "d", "e"), ("x", "y", NULL_LABEL, "q", "r"))]
        # tp: a, b. fp: d (wrong), e (spurious). fn: c, d.
        assert tagger_metrics(pred, gold) == pytest.approx((0.5, 0.5, 0.5))
