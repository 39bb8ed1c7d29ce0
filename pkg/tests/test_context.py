import numpy as np
import pytest

from poirec.context import (
    AppropriatenessExample,
    ContextFeatureTable,
    FeatureTableError,
    context_feature_vector,
    context_score,
    example_matrix,
    load_feature_table,
    train_appropriateness,
)
from poirec.domain import CONTEXT_VALUES, DURATIONS, GROUPS, TRIP_TYPES, ContextSpec, VenueRecord

CTX = ContextSpec("weekend-trip", "with-family", "holiday-trip")


def _write(tmp_path, body):
    p = tmp_path / "table.csv"
    p.write_text("category,context,value\n" + body)
    return p


def test_load_table_rows(tmp_path):
    table = load_feature_table(_write(tmp_path, "Beach,holiday-trip,1.0\nMuseum,business-trip,-0.66\n"))
    assert table.get("beach", "holiday-trip") == 1.0
    assert table.get("museum", "business-trip") == -0.66
    assert table.get("zoo", "holiday-trip") == 0.0


@pytest.mark.parametrize(
    "body,line",
    [("Beach,holiday-trip,1.5\n", 2), ("Beach,holiday-trip,1.0\nBeach,space-trip,0.1\n", 3), ("Beach,day-trip,abc\n", 2)],
)
def test_load_table_errors(tmp_path, body, line):
    with pytest.raises(FeatureTableError, match=f":{line}:"):
        load_feature_table(_write(tmp_path, body))


def test_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,c\n")
    with pytest.raises(FeatureTableError, match=":1:"):
        load_feature_table(p)


def test_csv_round_trip(tmp_path):
    table = ContextFeatureTable({("beach", "holiday-trip"): 1.0, ("museum", "alone"): -0.25})
    table.write_csv(tmp_path / "t.csv")
    assert load_feature_table(tmp_path / "t.csv").values == table.values


def _table():
    return ContextFeatureTable(
        {
            ("beach", "holiday-trip"): 1.0,
            ("beach", "with-family"): 0.8,
            ("beach", "weekend-trip"): 0.5,
            ("bar", "with-family"): -1.0,
            ("museum", "with-family"): 1.0,
        }
    )


def test_single_category_collapses():
    v = context_feature_vector(_table(), ["beach"], CTX)
    np.testing.assert_array_equal(v, [1.0] * 3 + [0.8] * 3 + [0.5] * 3)


def test_unknown_category_zero():
    np.testing.assert_array_equal(context_feature_vector(_table(), ["spaceport"], CTX), np.zeros(9))
    np.testing.assert_array_equal(context_feature_vector(_table(), [], CTX), np.zeros(9))


def test_mean_min_max():
    v = context_feature_vector(_table(), ["bar", "museum"], CTX)
    np.testing.assert_array_equal(v[3:6], [0.0, -1.0, 1.0])


def test_duplicate_single_value_invariant():
    a = context_feature_vector(_table(), ["beach"], CTX)
    b = context_feature_vector(_table(), ["beach", "beach"], CTX)
    np.testing.assert_array_equal(a, b)


def _planted_examples(n, seed):
    rng = np.random.default_rng(seed)
    cats = [f"c{i}" for i in range(10)]
    table = ContextFeatureTable({(c, x): float(rng.uniform(-1, 1)) for c in cats for x in CONTEXT_VALUES})
    out = []
    while len(out) < n:
        cs = tuple(rng.choice(cats, int(rng.integers(1, 3)), replace=False))
        ctx = ContextSpec(rng.choice(DURATIONS), rng.choice(GROUPS), rng.choice(TRIP_TYPES))
        m = context_feature_vector(table, cs, ctx)[[0, 3, 6]].sum()
        if abs(m) > 0.2:
            out.append(AppropriatenessExample(cs, ctx, bool(m > 0)))
    return table, out


def test_separable_accuracy_and_determinism():
    table, ex = _planted_examples(300, 0)
    model = train_appropriateness(ex, table, seed=4)
    X, y = example_matrix(table, ex)
    assert np.mean(model.predict(X) == y) == 1.0
    again = train_appropriateness(ex, table, seed=4)
    np.testing.assert_array_equal(model.weights, again.weights)


def test_label_flip_negates_direction():
    table, ex = _planted_examples(200, 1)
    flipped = [AppropriatenessExample(e.categories, e.context, not e.label) for e in ex]
    a = train_appropriateness(ex, table).weights
    b = train_appropriateness(flipped, table).weights
    assert a @ b / (np.linalg.norm(a) * np.linalg.norm(b)) < -0.9


def test_single_class_degenerate():
    table, ex = _planted_examples(50, 2)
    same = [AppropriatenessExample(e.categories, e.context, True) for e in ex]
    assert train_appropriateness(same, table).status == "degenerate"


def test_context_score():
    table = _table()
    ex = [AppropriatenessExample(("beach",), CTX, True), AppropriatenessExample(("bar",), CTX, False)] * 10
    model = train_appropriateness(ex, table)
    beach = VenueRecord("v1", categories=("beach",))
    assert context_score(model, table, beach, CTX) > 0
    assert context_score(model, table, VenueRecord("v2", categories=("beach",)), CTX) == context_score(model, table, beach, CTX)
    unknown = VenueRecord("v3", categories=("spaceport",))
    assert context_score(model, table, unknown, CTX) == pytest.approx(model.bias)
    assert context_score(model, table, beach, None) is None
    assert context_score(None, table, beach, CTX) is None


def test_example_serialization():
    e = AppropriatenessExample(("beach",), CTX, False)
    assert AppropriatenessExample.from_dict(e.to_dict()) == e
