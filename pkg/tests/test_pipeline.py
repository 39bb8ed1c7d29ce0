import json
from dataclasses import replace

import pytest

from poirec import pipeline as pl
from poirec import synth
from poirec.cli import main
from poirec.domain import CheckIn, UserRecord, VenueRecord
from poirec.io import read_jsonl_rows, write_candidates

SMALL = dict(n_users=24, n_venues=200, n_appropriateness=300)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("syn")
    synth.synth_generate(d, synth.SynthConfig(seed=4, **SMALL))
    return d


@pytest.fixture(scope="module")
def dataset(data_dir):
    return pl.load_dataset(pl.PipelineConfig(data_dir=str(data_dir)))


class TestConfig:
    def test_file_and_flag_precedence(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("model = PK-PCA\nlambda = 0.5\nseed = 3\nuse_reviews = no\nablate = s_cat, s_key\ndata_dir = d\n")
        cfg = pl.load_config(f, {"seed": 9})
        assert (cfg.model, cfg.lam, cfg.seed, cfg.use_reviews) == ("PK-PCA", 0.5, 9, False)
        assert cfg.ablate == ("s_cat", "s_key")
        assert cfg.data_dir == str(tmp_path / "d")

    @pytest.mark.parametrize("body", ["colour = red\n", "seed = many\n", "model = Best\n", "lambda = -1\n"])
    def test_bad_file(self, tmp_path, body):
        f = tmp_path / "bad.cfg"
        f.write_text(body)
        with pytest.raises((pl.ConfigError, ValueError)):
            pl.load_config(f)

    def test_columns(self):
        assert pl.PipelineConfig().columns == ("s_cat", "s_rev", "s_key", "s_boost", "s_cxt")
        assert pl.PipelineConfig(ablate=("s_rev",)).columns == ("s_cat", "s_key", "s_boost", "s_cxt")
        assert pl.PipelineConfig(use_keywords=False).columns == ("s_cat", "s_rev", "s_cxt")
        assert pl.PipelineConfig(use_reviews=False).columns == ("s_cat", "s_key", "s_boost", "s_cxt")
        assert pl.PipelineConfig(context_mode="rerank").columns == ("s_cat", "s_rev", "s_key", "s_boost")
        assert pl.PipelineConfig(model="LinearCatRev").columns == ("s_cat", "s_rev")

    def test_unknown_ablation(self):
        with pytest.raises(pl.ConfigError):
            pl.PipelineConfig(ablate=("s_nope",))


class TestHistory:
    def _setup(self):
        venues = {f"a{i}": VenueRecord(f"a{i}", "A") for i in range(3)}
        venues.update({f"b{i}": VenueRecord(f"b{i}", "B") for i in range(3)})
        hist = tuple(CheckIn(v, 4) for v in ("a0", "b0", "a1", "b1", "a2", "b2"))
        return UserRecord("u", hist), venues

    def test_sequential(self):
        user, venues = self._setup()
        cities = [venues[c.venue_id].city for c in pl.order_history(user, venues, "sequential").history]
        assert cities == ["A"] * 3 + ["B"] * 3

    def test_interleaved(self):
        user, venues = self._setup()
        cities = [venues[c.venue_id].city for c in pl.order_history(user, venues, "interleaved").history]
        assert cities == ["A", "B"] * 3

    def test_order_keeps_multiset_and_limit_takes_prefix(self):
        user, venues = self._setup()
        seq = pl.order_history(user, venues, "sequential", seed=5)
        assert sorted(c.venue_id for c in seq.history) == sorted(c.venue_id for c in user.history)
        assert pl.limit_history(seq, 2).history == seq.history[:2]
        assert pl.order_history(user, venues, None) is user


def test_run_deterministic_and_artifacts(dataset, tmp_path):
    cfg = pl.PipelineConfig(out_dir=str(tmp_path / "a"), seed=2)
    r1 = pl.run_pipeline(cfg, dataset)
    r2 = pl.run_pipeline(replace(cfg, out_dir=str(tmp_path / "b")), dataset)
    assert r1.run_text == r2.run_text
    assert (tmp_path / "a" / "run.txt").read_bytes() == (tmp_path / "b" / "run.txt").read_bytes()
    scores = list(read_jsonl_rows(tmp_path / "a" / "scores.jsonl"))
    assert {tuple(sorted(r["scores"])) for r in scores} == {("s_boost", "s_cat", "s_cxt", "s_key", "s_rev")}
    for r in scores:
        assert r["user_id"] in dataset.users and r["venue_id"] in dataset.venues
        assert r["venue_id"] in dataset.candidates[r["user_id"]]
    for row in read_jsonl_rows(tmp_path / "a" / "boosted.jsonl"):
        kws = {k for c in dataset.users[row["user_id"]].history for k in dataset.venues[c.venue_id].keywords}
        assert set(row["keywords"]) <= kws
    report = json.loads((tmp_path / "a" / "metrics.json").read_text())
    assert report["metrics"]["users"] == len(dataset.candidates)
    assert set(r1.ranked) == set(dataset.candidates)


def test_score_ablation_retrains_without_column(dataset):
    res = pl.run_variants(dataset, {"full": pl.PipelineConfig(), "-s_rev": pl.PipelineConfig(ablate=("s_rev",))})
    assert "s_rev" not in res["-s_rev"].models[0].columns
    assert "s_rev" in res["full"].models[0].columns


def test_rerank_lambda_zero_is_noop(dataset):
    base = pl.run_pipeline(pl.PipelineConfig(context_mode="rerank", lam=0.0), dataset)
    plain = pl.run_pipeline(pl.PipelineConfig(model="PK-Boosting", ablate=("s_cxt",)), dataset)
    assert base.run_text == plain.run_text


def test_history_sweep_rows(dataset):
    rows = pl.history_sweep(dataset, pl.PipelineConfig(epochs=50), [5, 10, 20])
    assert list(rows) == [5, 10, 20]
    assert all("P@5" in r.metrics for r in rows.values())


@pytest.mark.parametrize("model", sorted(pl.MODEL_ROWS))
def test_every_model_row_runs(dataset, model):
    res = pl.run_pipeline(pl.PipelineConfig(model=model, epochs=30, tagger_scope="pooled"), dataset)
    assert 0.0 <= res.metrics["P@5"] <= 1.0


class TestCli:
    def test_run_twice_identical(self, data_dir, tmp_path):
        for name in ("a", "b"):
            assert main(["run", "--data", str(data_dir), "--out", str(tmp_path / name), "--epochs", "40"]) == 0
        assert (tmp_path / "a" / "run.txt").read_bytes() == (tmp_path / "b" / "run.txt").read_bytes()

    def test_staged_commands(self, data_dir, tmp_path, capsys):
        d, t = str(data_dir), tmp_path
        assert main(["train-mapping", "--data", d, "--out", str(t / "m.jsonl")]) == 0
        assert main(["boost", "--data", d, "--models", str(t / "m.jsonl"), "--out", str(t / "b.jsonl")]) == 0
        assert main(["train-tagger", "--data", d, "--kind", "svm", "--out", str(t / "tag.json")]) == 0
        assert main(["score", "--data", d, "--out", str(t / "s.jsonl")]) == 0
        assert main(["train-ranker", "--scores", str(t / "s.jsonl"), "--qrels", f"{d}/qrels.txt", "--out", str(t / "r.json")]) == 0
        assert main(["rank", "--scores", str(t / "s.jsonl"), "--ranker", str(t / "r.json"), "--out", str(t / "run.txt")]) == 0
        capsys.readouterr()
        assert main(["evaluate", "--run", str(t / "run.txt"), "--qrels", f"{d}/qrels.txt"]) == 0
        assert "P@5" in json.loads(capsys.readouterr().out)["metrics"]

    def test_ablate_table(self, data_dir, capsys):
        assert main(["ablate", "--data", str(data_dir), "--epochs", "30"]) == 0
        out = capsys.readouterr().out
        assert "-s_rev" in out and "LinearCatRev" in out

    def test_empty_candidates_warns_and_succeeds(self, data_dir, tmp_path, capsys):
        write_candidates(tmp_path / "c.jsonl", {})
        rc = main(["run", "--data", str(data_dir), "--candidates", str(tmp_path / "c.jsonl"), "--out", str(tmp_path / "o")])
        assert rc == 0
        assert "no candidates" in capsys.readouterr().err
        assert (tmp_path / "o" / "run.txt").read_text() == ""

    def test_duplicate_venue_is_data_error(self, data_dir, tmp_path):
        lines = (data_dir / "venues.jsonl").read_text().splitlines()
        (tmp_path / "v.jsonl").write_text("\n".join(lines + lines[:1]) + "\n")
        assert main(["ingest", "--data", str(data_dir), "--venues", str(tmp_path / "v.jsonl")]) == 2

    def test_usage_errors(self, tmp_path):
        assert main(["run", "--model", "Nope"]) == 1
        assert main(["frobnicate"]) == 1
        assert main(["run"]) == 1
        assert main(["run", "--data", str(tmp_path / "missing")]) == 2
