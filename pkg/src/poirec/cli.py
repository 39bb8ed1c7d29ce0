"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from . import synth
from .alignment import AlignmentModel, train_user_model
from .boosting import boost_keywords, pca_profile
from .domain import DomainError
from .evaluation import summarize, per_user_metrics
from .io import read_jsonl_rows, read_qrels, read_run, write_jsonl, write_run
from .ranking import KINDS as RANKER_KINDS
from .ranking import RankingModel, rank_candidates, rerank_with_context
from .scoring import MODEL_ROWS, ScoreVector
from .tagging import KINDS as TAGGER_KINDS
from .tagging import derive_labeled_sequences, train_tagger

log = logging.getLogger("poirec")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf8")
    else:
        print(text)


# -- shared argument groups -------------------------------------------------------

DATA_FILES = ("venues", "users", "candidates", "qrels", "features", "appropriateness")


def _add_data(p, required=("venues", "users")):
    g = p.add_argument_group("data")
    g.add_argument("--data", metavar="DIR", help="directory holding the standard file names")
    for name in DATA_FILES:
        g.add_argument(f"--{name}", metavar="PATH")
    p.set_defaults(_required=required)


def _data_overrides(args) -> dict:
    out = {name: getattr(args, name, None) for name in DATA_FILES}
    out["data_dir"] = getattr(args, "data", None)
    return out


def _add_knobs(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", metavar="FILE", help="key = value configuration file; flags win")
    g.add_argument("--model", choices=sorted(MODEL_ROWS))
    g.add_argument("--ranker", choices=RANKER_KINDS)
    g.add_argument("--context-mode", choices=("fusion", "rerank"))
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--theta-ml", type=float)
    g.add_argument("--max-tags", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--em-iters", type=int)
    g.add_argument("--review-reg", type=float)
    g.add_argument("--tagger-reg", type=float)
    g.add_argument("--context-reg", type=float)
    g.add_argument("--tagger-scope", choices=("user", "pooled"))
    g.add_argument("--lr", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--folds", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--history-limit", type=int)
    g.add_argument("--history-order", choices=("sequential", "interleaved"))
    g.add_argument("--no-keywords", dest="use_keywords", action="store_const", const=False)
    g.add_argument("--no-reviews", dest="use_reviews", action="store_const", const=False)
    g.add_argument("--score-ablate", dest="ablate", action="append", metavar="SCORE",
                   help="drop a score column (repeatable), e.g. s_rev or S_rev")


KNOBS = ("model", "ranker", "context_mode", "lam", "epsilon", "theta_ml", "max_tags", "alpha", "em_iters",
         "review_reg", "tagger_reg", "context_reg", "tagger_scope", "lr", "epochs", "folds", "k", "seed",
         "history_limit", "history_order", "use_keywords", "use_reviews")


def _config(args, **extra) -> pl.PipelineConfig:
    over = _data_overrides(args)
    over.update({k: getattr(args, k, None) for k in KNOBS})
    if getattr(args, "ablate", None):
        over["ablate"] = tuple(a.lower() for a in args.ablate)
    over.update(extra)
    cfg = pl.load_config(getattr(args, "config", None), over)
    for name in getattr(args, "_required", ()):
        p = cfg.path(name)
        if p is None:
            raise UsageError(f"missing --{name} (or --data)")
    return cfg


# -- commands ---------------------------------------------------------------------


def cmd_ingest(args) -> int:
    ds = pl.load_dataset(_config(args))
    _emit(ds.report(), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        n_users=args.users, n_venues=args.venues, n_cities=args.cities, history_size=args.history,
        candidates_per_user=args.candidates, noise=args.noise, seed=args.seed,
    )
    paths = synth.synth_generate(args.out, cfg)
    _emit({k: str(v) for k, v in paths.items()})
    return EXIT_OK


def _users(ds, only):
    users = sorted(ds.users)
    if only:
        missing = [u for u in only if u not in ds.users]
        if missing:
            raise DomainError(f"unknown user(s): {missing}")
        users = sorted(only)
    return users


def cmd_train_mapping(args) -> int:
    cfg = _config(args)
    ds = pl.load_dataset(cfg)
    rows = []
    for uid in _users(ds, args.user):
        model = train_user_model(ds.users[uid], ds.venues, max_iters=cfg.em_iters)
        if model is None:
            log.warning("user %s has no tagged check-ins; no model", uid)
            continue
        model.epsilon = cfg.epsilon
        rows.append(model.to_dict())
    write_jsonl(args.out, rows)
    return EXIT_OK


def _load_models(path) -> dict[str, AlignmentModel]:
    return {m.user_id: m for m in (AlignmentModel.from_dict(r) for r in read_jsonl_rows(path))}


def cmd_boost(args) -> int:
    cfg = _config(args)
    ds = pl.load_dataset(cfg)
    models = _load_models(args.models) if args.models else None
    rows = []
    for uid in _users(ds, args.user):
        user = ds.users[uid]
        if args.method == "pca":
            prof = pca_profile(user, ds.venues, ds.scale)
        else:
            model = models.get(uid) if models is not None else train_user_model(user, ds.venues, cfg.em_iters)
            prof = boost_keywords(user, model, ds.venues, ds.scale)
        rows.append(prof.to_dict())
    write_jsonl(args.out, rows)
    return EXIT_OK


def cmd_train_tagger(args) -> int:
    cfg = _config(args)
    ds = pl.load_dataset(cfg)
    models = _load_models(args.models) if args.models else {}
    seqs = []
    for uid in _users(ds, args.user):
        model = models.get(uid) or train_user_model(ds.users[uid], ds.venues, cfg.em_iters)
        seqs.extend(derive_labeled_sequences(ds.users[uid], model, ds.venues))
    if not seqs:
        raise DomainError("no tagged check-ins to train a tagger on")
    tagger = train_tagger(seqs, args.kind, reg=cfg.tagger_reg, seed=cfg.seed)
    _emit(tagger.to_dict(), args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _config(args)
    ds = pl.load_dataset(cfg)
    if not any(ds.candidates.values()):
        write_jsonl(args.out, [])
        return EXIT_OK
    scored = pl.score_dataset(ds, cfg, pl.needed_scores(MODEL_ROWS[cfg.model], "rerank"))
    write_jsonl(args.out, (v.to_dict() for _, vs in sorted(scored.vectors.items()) for v in vs))
    return EXIT_OK


def _read_scores(path) -> dict[str, list[ScoreVector]]:
    out: dict[str, list[ScoreVector]] = {}
    for row in read_jsonl_rows(path):
        v = ScoreVector.from_dict(row)
        out.setdefault(v.user_id, []).append(v)
    return out


def cmd_train_ranker(args) -> int:
    cfg = _config(args)
    vectors = _read_scores(args.scores)
    judgments = read_qrels(args.qrels)
    kind = "linearcatrev" if cfg.model == "LinearCatRev" else cfg.ranker
    groups = pl.make_groups(vectors, cfg.columns, judgments)
    judged = [g for u, g in groups.items() if judgments.user_labels(u)]
    if not judged:
        raise DomainError("no judged users in the score file")
    model = pl.fit_ranker(judged, cfg, judgments, kind)
    _emit(model.to_dict(), args.out)
    return EXIT_OK


def cmd_rank(args) -> int:
    vectors = _read_scores(args.scores)
    model = RankingModel.from_dict(json.loads(Path(args.ranker).read_text(encoding="utf8")))
    groups = pl.make_groups(vectors, model.columns)
    ranked = {}
    for uid, g in groups.items():
        ranked[uid] = rank_candidates(model, g)
        if args.lam is not None:
            s_cxt = {v.venue_id: v.scores.get("s_cxt", 0.0) for v in vectors[uid]}
            ranked[uid] = rerank_with_context(ranked[uid], s_cxt, args.lam)
    write_run(args.out, ranked, args.tag)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ranked = read_run(args.run)
    judgments = read_qrels(args.qrels)
    lists = {u: [v for v, _ in lst] for u, lst in ranked.items() if judgments.user_labels(u)}
    per_user = per_user_metrics(lists, judgments, args.k)
    report = {"metrics": summarize(per_user)}
    if args.per_user:
        report["per_user"] = per_user
    _emit(report, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args, out_dir=args.out)
    ds = pl.load_dataset(cfg)
    result = pl.run_pipeline(cfg, ds)
    for w in ds.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit({"metrics": result.metrics, "columns": list(cfg.columns), "out": args.out})
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    ds = pl.load_dataset(cfg)
    rows = []
    if args.kind == "history":
        limits = [int(x) for x in args.limits.split(",")]
        for n, res in pl.history_sweep(ds, cfg, limits).items():
            rows.append({"history_limit": n, **res.metrics})
    else:
        results = pl.run_variants(ds, pl.score_ablation_variants(cfg))
        base = results[cfg.model].metrics.get("P@5", 0.0)
        for name, res in results.items():
            rows.append({"variant": name, **res.metrics, "delta_P@5": res.metrics.get("P@5", 0.0) - base})
    if args.out:
        _emit(rows, args.out)
    else:
        key = "history_limit" if args.kind == "history" else "variant"
        print(f"{key:<14} {'P@5':>7} {'nDCG@5':>7} {'MRR':>7}")
        for r in rows:
            print(f"{str(r[key]):<14} {r.get('P@5', 0):7.4f} {r.get('nDCG@5', 0):7.4f} {r.get('MRR', 0):7.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poirec", description="Personalized context-aware POI recommendation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load a dataset and print its integrity report")
    _add_data(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic dataset with planted preferences")
    p.add_argument("--out", required=True)
    defaults = synth.SynthConfig()
    p.add_argument("--users", type=int, default=defaults.n_users)
    p.add_argument("--venues", type=int, default=defaults.n_venues)
    p.add_argument("--cities", type=int, default=defaults.n_cities)
    p.add_argument("--history", type=int, default=defaults.history_size)
    p.add_argument("--candidates", type=int, default=defaults.candidates_per_user)
    p.add_argument("--noise", type=float, default=defaults.noise)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-mapping", help="per-user keyword-to-tag alignment (EM)")
    _add_data(p)
    _add_knobs(p)
    p.add_argument("--user", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_mapping)

    p = sub.add_parser("boost", help="boosted (or PCA-reduced) keyword profiles")
    _add_data(p)
    _add_knobs(p)
    p.add_argument("--models", help="alignment models from train-mapping (trained on the fly otherwise)")
    p.add_argument("--method", choices=("boost", "pca"), default="boost")
    p.add_argument("--user", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("train-tagger", help="pooled sequence tagger over mapped history pairs")
    _add_data(p)
    _add_knobs(p)
    p.add_argument("--kind", choices=TAGGER_KINDS, default="svm")
    p.add_argument("--models")
    p.add_argument("--user", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_tagger)

    p = sub.add_parser("score", help="score every candidate (all columns of the model row plus s_cxt)")
    _add_data(p, required=("venues", "users", "candidates"))
    _add_knobs(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train-ranker", help="fit fusion weights on scored, judged candidates")
    _add_knobs(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_ranker, _required=())

    p = sub.add_parser("rank", help="apply a fusion model and write a run file")
    p.add_argument("--scores", required=True)
    p.add_argument("--ranker", required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="context re-rank weight (off when omitted)")
    p.add_argument("--tag", default="poirec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="P@k, nDCG@k and MRR of a run file")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--per-user", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline with cross-validated fusion")
    _add_data(p)
    _add_knobs(p)
    p.add_argument("--out", help="artifact directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="score/source ablation table or history-length sweep")
    _add_data(p)
    _add_knobs(p)
    p.add_argument("--kind", choices=("scores", "history"), default="scores")
    p.add_argument("--limits", default="10,20,30,40,50,60")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, pl.ConfigError) as exc:
        print(f"poirec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"poirec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
