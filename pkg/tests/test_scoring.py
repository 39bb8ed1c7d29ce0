import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poirec.alignment import AlignmentPair, em_train
from poirec.boosting import boost_keywords
from poirec.domain import CheckIn, Review, UserRecord, VenueRecord, build_profiles
from poirec.scoring import (
    MODEL_ROWS,
    ScoringConfig,
    TfidfVectorizer,
    UserState,
    frequency_score,
    review_score,
    score_candidate,
    tfidf_vectorize,
    tokenize,
    train_review_classifier,
)


class TestFrequencyScore:
    def test_hand_value(self):
        assert frequency_score({"c1": 1 / 3}, {"c1": 1 / 3}, ["c1"]) == pytest.approx(0.0)

    def test_empty_and_unseen(self):
        assert frequency_score({"a": 0.5}, {}, []) == 0.0
        assert frequency_score({"a": 0.5}, {"b": 0.2}, ["x", "y"]) == 0.0

    @given(
        st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 1)),
        st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 1)),
        st.lists(st.sampled_from("abcdefgh"), unique=True),
        st.lists(st.sampled_from("ijk"), unique=True),
    )
    def test_additive_and_bounded(self, pos, neg, left, right):
        total = frequency_score(pos, neg, left + right)
        assert total == pytest.approx(frequency_score(pos, neg, left) + frequency_score(pos, neg, right))
        assert abs(total) <= len(left + right) + 1e-12


class TestTfidf:
    def test_single_document(self):
        vec = TfidfVectorizer().fit(["alpha beta gamma delta"])
        tf = vec.term_frequencies(["alpha beta gamma delta"])
        assert tf[0, vec.vocabulary["alpha"]] == 0.25
        np.testing.assert_allclose(vec.idf, 1.0)
        raw = vec.transform(["alpha beta gamma delta"], normalize=False)
        assert raw[0, vec.vocabulary["alpha"]] == 0.25

    def test_idf_floor_and_rare(self):
        vec = TfidfVectorizer().fit(["aa bb", "aa cc", "aa dd"])
        assert vec.idf[vec.vocabulary["aa"]] == pytest.approx(1.0)
        assert vec.idf[vec.vocabulary["bb"]] == pytest.approx(math.log(4 / 2) + 1)

    def test_normalized_and_empty(self):
        vocab, X = tfidf_vectorize(["great food great", "awful service", ""])
        np.testing.assert_allclose(np.linalg.norm(X[:2], axis=1), 1.0)
        np.testing.assert_array_equal(X[2], 0.0)
        assert vocab == sorted(vocab)

    def test_tokenize(self):
        assert tokenize("It's a GREAT-place, 10/10!") == ["it", "great", "place", "10", "10"]


def _review_world():
    pos = ["great tasty friendly lovely", "great amazing friendly staff", "lovely tasty great"]
    neg = ["awful rude dirty slow", "awful cold rude", "dirty slow awful"]
    venues = {
        "good1": VenueRecord("good1", reviews=tuple(Review(5, t) for t in pos[:2]) + (Review(1, neg[0]),)),
        "good2": VenueRecord("good2", reviews=(Review(4, pos[2]),)),
        "bad1": VenueRecord("bad1", reviews=tuple(Review(1, t) for t in neg[1:]) + (Review(5, pos[0]),)),
        "fresh_good": VenueRecord("fresh_good", reviews=(Review(5, "great friendly tasty"),)),
        "fresh_bad": VenueRecord("fresh_bad", reviews=(Review(1, "rude awful dirty"),)),
        "silent": VenueRecord("silent"),
    }
    user = UserRecord("u", (CheckIn("good1", 5), CheckIn("good2", 4), CheckIn("bad1", 1)))
    return user, venues


class TestReviewClassifier:
    def test_separable_training_accuracy(self):
        user, venues = _review_world()
        model = train_review_classifier(user, venues)
        assert model.available
        texts = [r.text for r in venues["good1"].reviews[:2]] + [r.text for r in venues["bad1"].reviews[:2]]
        pred = model.classifier.predict(model.vectorizer.transform(texts))
        assert list(pred) == [1, 1, -1, -1]

    def test_scores_sign(self):
        user, venues = _review_world()
        model = train_review_classifier(user, venues)
        assert review_score(model, venues["fresh_good"]) > 0
        assert review_score(model, venues["fresh_bad"]) < 0
        assert review_score(model, venues["silent"]) is None
        dup = VenueRecord("dup", reviews=(venues["good1"].reviews[0],))
        assert review_score(model, dup) > 0

    def test_one_sided_is_unavailable(self):
        user, venues = _review_world()
        liked_only = UserRecord("u", user.history[:2])
        model = train_review_classifier(liked_only, venues)
        assert not model.available
        assert review_score(model, venues["fresh_good"]) is None

    def test_review_order_invariance(self):
        user, venues = _review_world()
        model = train_review_classifier(user, venues)
        v = VenueRecord("mix", reviews=(Review(5, "great tasty"), Review(1, "rude slow")))
        w = VenueRecord("mix", reviews=v.reviews[::-1])
        assert review_score(model, v) == pytest.approx(review_score(model, w), abs=1e-12)

    def test_duplicated_training_set_same_direction(self):
        user, venues = _review_world()
        doubled = UserRecord("u", user.history + user.history)
        a = train_review_classifier(user, venues).classifier.weights
        b = train_review_classifier(doubled, venues).classifier.weights
        cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        assert cos > 0.9


def _candidate_world():
    venues = {
        "h1": VenueRecord("h1", categories=("italian", "bar"), keywords=("pasta", "lively", "wine")),
        "h2": VenueRecord("h2", categories=("museum",), keywords=("quiet", "art")),
        "cand": VenueRecord("cand", categories=("italian", "bar"), keywords=("pasta", "cheap")),
        "alien": VenueRecord("alien", categories=("zoo",), keywords=("animals",)),
    }
    user = UserRecord("u", (CheckIn("h1", 5, ("food",)),))
    return user, venues


def _state(user, venues):
    model, _ = em_train([AlignmentPair(venues["h1"].keywords, ("food",))])
    return UserState(user, build_profiles(user, venues), alignment=model, boosted=boost_keywords(user, model, venues))


def test_single_liked_venue_same_categories():
    user, venues = _candidate_world()
    sv = score_candidate(_state(user, venues), venues["cand"], ScoringConfig(wanted=("s_cat",)))
    # Denominator counts 2 category slots, each liked: cf+ = 1/2 per category.
    assert sv.s_cat == pytest.approx(len(venues["cand"].categories) * 0.5)


def test_no_shared_vocabulary_zero():
    user, venues = _candidate_world()
    cfg = ScoringConfig(wanted=("s_cat", "s_key", "s_boost", "s_ml"))
    sv = score_candidate(_state(user, venues), venues["alien"], cfg)
    assert sv.s_cat == sv.s_key == sv.s_boost == sv.s_ml == 0.0


def test_pk_boosting_columns():
    user, venues = _candidate_world()
    cfg = ScoringConfig(wanted=MODEL_ROWS["PK-Boosting"])
    sv = score_candidate(_state(user, venues), venues["cand"], cfg)
    assert set(sv.scores) == {"s_cat", "s_rev", "s_key", "s_boost", "s_cxt"}
    # No reviews, no context model: flagged and zeroed.
    assert {"s_rev", "s_cxt"} <= sv.missing
    assert sv.s_rev == 0.0 and sv.s_cxt == 0.0
