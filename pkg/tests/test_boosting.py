import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poirec.alignment import AlignmentModel, AlignmentPair, Mapping, train_user_model
from poirec.boosting import (
    BoostedProfile,
    boost_keywords,
    boosted_keywords,
    choose_components,
    pca_keywords,
    pca_profile,
    pca_reduce,
)
from poirec.domain import CheckIn, UserRecord, VenueRecord, build_profiles

from oracles import jacobi_eigh

FIG_TAGS = ("beer", "cocktails", "food", "restaurants")
FIG_SIGNATURE = {"beer": "chicken", "cocktails": "good-for-a-late-night", "food": "pasta", "restaurants": "burgers"}
FIG_FILLERS = tuple(f"kw{i:02d}" for i in range(15))


def fig_model():
    """Hand-set tables: each tag owns its signature keyword, NULL owns the fillers."""
    keywords = tuple(sorted(FIG_SIGNATURE.values()) + list(FIG_FILLERS))
    col = {f: k for k, f in enumerate(keywords)}
    trans = np.full((len(FIG_TAGS) + 1, len(keywords)), 1e-3)
    for f in FIG_FILLERS:
        trans[0, col[f]] = 1.0
    for r, t in enumerate(FIG_TAGS, start=1):
        trans[r, col[FIG_SIGNATURE[t]]] = 1.0
    trans /= trans.sum(axis=1, keepdims=True)
    prior = {4: np.full(5, 0.2)}
    return AlignmentModel(FIG_TAGS, keywords, trans, prior, {t: 0.25 for t in FIG_TAGS}, user_id="user1")


def test_fig3_shape_nineteen_to_four():
    venue = VenueRecord("fig", keywords=tuple(FIG_SIGNATURE.values()) + FIG_FILLERS)
    assert len(venue.keywords) == 19
    user = UserRecord("user1", (CheckIn("fig", 5, FIG_TAGS),))
    prof = boost_keywords(user, fig_model(), {"fig": venue})
    assert set(prof.keywords) == set(FIG_SIGNATURE.values())
    assert len(prof.keywords) == 4
    # Frequencies are over the boosted item space: four slots, all liked.
    assert prof.pos == {f: pytest.approx(1 / 4) for f in FIG_SIGNATURE.values()}


def test_mapping_filter():
    pair = AlignmentPair(("k1", "k2", "k3", "k4"), ("a", "b"))
    m = Mapping((0, 1, 2, 0))
    assert {pair.keywords[j] for j in m.mapped_positions()} == {"k2", "k3"}


def test_no_tags_empty_profile():
    venues = {"v": VenueRecord("v", keywords=("a", "b"))}
    user = UserRecord("u", (CheckIn("v", 5),))
    assert train_user_model(user, venues) is None
    prof = boost_keywords(user, None, venues)
    assert prof.empty and prof.pos == {} and prof.neg == {}


def _tagged_world(seed):
    rng = np.random.default_rng(seed)
    kws = [f"k{i}" for i in range(12)]
    venues, history = {}, []
    for n in range(8):
        vk = tuple(rng.choice(kws, 4, replace=False))
        venues[f"v{n}"] = VenueRecord(f"v{n}", keywords=vk)
        tags = ("t0",) if n % 3 == 0 else (("t1", "t2") if n % 3 == 1 else ())
        history.append(CheckIn(f"v{n}", int(rng.integers(1, 6)), tags))
    return UserRecord("u", tuple(history)), venues


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_boost_invariants(seed):
    user, venues = _tagged_world(seed)
    model = train_user_model(user, venues)
    prof = boost_keywords(user, model, venues)
    history_kw = {f for c in user.history for f in venues[c.venue_id].keywords}
    tagged_kw = {f for c in user.tagged() for f in venues[c.venue_id].keywords}
    assert set(prof.keywords) <= tagged_kw <= history_kw
    profiles = build_profiles(user, venues)
    assert len(prof.keywords) <= len(set(profiles.pos_key) | set(profiles.neg_key) | history_kw)
    again = boost_keywords(user, train_user_model(user, venues), venues)
    assert again.to_dict() == prof.to_dict()
    for f in prof.keywords:
        assert prof.pos.get(f, 0.0) + prof.neg.get(f, 0.0) <= 1.0 + 1e-12


def test_boosted_frequencies_use_full_history():
    venues = {
        "a": VenueRecord("a", keywords=("x", "y")),
        "b": VenueRecord("b", keywords=("x",)),
        "c": VenueRecord("c", keywords=("x", "z")),
        "d": VenueRecord("d", keywords=("w", "y", "z")),
    }
    history = (CheckIn("a", 5, ("t",)), CheckIn("b", 1), CheckIn("c", 3, ("t",)), CheckIn("d", 4, ("s",)))
    user = UserRecord("u", history)
    model = train_user_model(user, venues)
    keep = boosted_keywords(user, model, venues)
    prof = boost_keywords(user, model, venues)
    assert keep
    # Occurrences of kept keywords across the whole history, untagged b included.
    slots = sum(f in keep for v in venues for f in venues[v].keywords)
    assert "x" in keep
    assert prof.pos["x"] == pytest.approx(1 / slots)
    assert prof.neg["x"] == pytest.approx(1 / slots)


def test_profile_round_trip():
    prof = BoostedProfile("u", ("a", "b"), {"a": 0.5}, {"b": 0.25}, "pca")
    assert BoostedProfile.from_dict(prof.to_dict()) == prof


class TestPCA:
    def test_collinear(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [-1.0, -1.0]])
        res = pca_reduce(X, 1)
        np.testing.assert_allclose(res.components[0], np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-12)
        assert res.explained_ratio[0] == pytest.approx(1.0)

    def test_isotropic_split(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        res = pca_reduce(X, 2)
        # Covariance is diag(2/3, 2/3): closed-form eigenvalues are equal.
        np.testing.assert_allclose(res.explained_variance, [2 / 3, 2 / 3], atol=1e-12)

    def test_full_rank_reconstruction(self):
        X = np.random.default_rng(0).normal(size=(10, 4))
        res = pca_reduce(X, 4)
        np.testing.assert_allclose(res.projected @ res.components + res.mean, X, atol=1e-8)
        assert res.explained_variance.sum() == pytest.approx(res.total_variance)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(3, 12), st.integers(2, 6))
    def test_against_jacobi_oracle(self, seed, n, d):
        X = np.random.default_rng(seed).normal(size=(n, d))
        k = min(n, d)
        res = pca_reduce(X, k)
        gram = res.components @ res.components.T
        np.testing.assert_allclose(gram, np.eye(k), atol=1e-8)
        assert np.all(np.diff(res.explained_variance) <= 1e-10)
        evals, _ = jacobi_eigh(np.cov(X, rowvar=False))
        np.testing.assert_allclose(res.explained_variance, np.sort(evals)[::-1][:k], atol=1e-8)
        np.testing.assert_allclose(res.projected, (X - X.mean(axis=0)) @ res.components.T, atol=1e-10)

    def test_degenerate_rows(self):
        res = pca_reduce(np.ones((4, 3)), 2)
        assert res.status == "degenerate"
        np.testing.assert_array_equal(res.components, 0.0)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            pca_reduce(np.eye(3), 4)
        with pytest.raises(ValueError):
            pca_reduce(np.ones((1, 3)), 1)

    def test_choose_components(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        assert choose_components(X) == 1
        Y = np.random.default_rng(1).normal(size=(3, 10))
        assert choose_components(Y, 0.999) <= 2


def test_pca_profile_reduces():
    rng = np.random.default_rng(3)
    kws = [f"k{i}" for i in range(20)]
    venues = {f"v{n}": VenueRecord(f"v{n}", keywords=tuple(rng.choice(kws, 5, replace=False))) for n in range(6)}
    user = UserRecord("u", tuple(CheckIn(v, 5 if n % 2 else 1) for n, v in enumerate(venues)))
    keep = pca_keywords(user, venues)
    vocab = {f for v in venues.values() for f in v.keywords}
    assert 0 < len(keep) <= len(user.history) - 1 < len(vocab)
    prof = pca_profile(user, venues)
    assert prof.method == "pca" and set(prof.keywords) == keep
