"""Command-line entry point: ``hybridmf <command> [options]``.

Exit codes: 0 success, 2 input/validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .config import RunConfig
from .data import SyntheticScale, generate_synthetic, load_dataset, read_posts, save_dataset
from .errors import HybridMFError, InputError, NumericError
from .evaluation import (GridCellError, build_content_similarity, report_csv,
                         run_experiment_grid, split)
from .factorization import load_model, save_model, train
from .profiles import (ProfileSelector, WeightTable, build_rating_matrix,
                       category_coverage, read_ratings, write_ratings)
from .similarity import build_similarity, build_tfidf, read_similarity, read_stop_words, write_similarity

log = logging.getLogger("hybridmf")


def _data_args(p):
    g = p.add_argument_group("input data")
    g.add_argument("--events", help="events file (user_id,post_id,interaction_type,value,timestamp)")
    g.add_argument("--posts", help="posts file (post_id,text)")
    g.add_argument("--users", help="optional users file (user_id)")
    g.add_argument("--weights", help="weight table (interaction_type,weight,category)")


def _profile_args(p):
    g = p.add_argument_group("profile")
    g.add_argument("--selector", help="all | direct | social | reading")
    g.add_argument("--normalization", choices=["none", "minmax", "log1p_then_minmax"])
    g.add_argument("--rating-min", type=float)
    g.add_argument("--rating-max", type=float)


def _sim_args(p):
    g = p.add_argument_group("content similarity")
    g.add_argument("--top-k", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--stop-words", help="whitespace-separated stop-word file")


def _model_args(p):
    g = p.add_argument_group("factorization")
    g.add_argument("--d", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--init-scale", type=float)
    g.add_argument("--zero-samples", type=int)
    g.add_argument("--include-diagonal", choices=["true", "false"])


def _eval_args(p):
    g = p.add_argument_group("evaluation")
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--split-seed", type=int)
    g.add_argument("--relevance-threshold", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--candidates", choices=["test", "all-unrated"])
    g.add_argument("--clamp", choices=["true", "false"])


_NON_CONFIG = {"command", "func", "config", "verbose", "out", "loss_out", "model", "user",
               "ratings", "similarity", "scale", "model_kind", "model_out", "backend"}


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    return cfg.update(overrides)


def _require(cfg, *names):
    missing = [n for n in names if not getattr(cfg, n)]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _weights(cfg) -> WeightTable:
    return WeightTable.load(cfg.weights) if cfg.weights else WeightTable.default()


def _dataset(cfg, weights):
    _require(cfg, "events", "posts")
    return load_dataset(cfg.events, cfg.posts, cfg.users, weights.types)


def _stop_words(cfg):
    return read_stop_words(cfg.stop_words) if cfg.stop_words else None


def _write_meta(path, cfg, **extra):
    meta = {"config": cfg.to_dict(), **extra}
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def cmd_synth(args):
    cfg = _config(args)
    scale = SyntheticScale.full() if args.scale == "full" else SyntheticScale.structured()
    dataset = generate_synthetic(cfg.seed, scale)
    paths = save_dataset(dataset, args.out)
    print(f"wrote {len(dataset.users)} users, {len(dataset.posts)} posts, "
          f"{len(dataset.events)} events to {args.out}")
    for name, path in paths.items():
        print(f"  {name}: {path}")


def cmd_ingest(args):
    cfg = _config(args)
    weights = _weights(cfg)
    dataset = _dataset(cfg, weights)
    print(f"users\t{len(dataset.users)}")
    print(f"posts\t{len(dataset.posts)}")
    print(f"events\t{len(dataset.events)}")
    print("category\tevents\tusers")
    for cat, (n_events, n_users) in category_coverage(dataset, weights).items():
        print(f"{cat}\t{n_events}\t{n_users}")
    ratings = build_rating_matrix(dataset, weights, ProfileSelector.ALL, cfg.normalization_spec())
    print(f"rating_pairs\t{ratings.nnz}\t(density {ratings.density:.6f})")


def _ratings_from(args, cfg):
    if args.ratings:
        return read_ratings(args.ratings, (cfg.rating_min, cfg.rating_max))
    weights = _weights(cfg)
    return build_rating_matrix(_dataset(cfg, weights), weights, cfg.profile_selector(),
                               cfg.normalization_spec())


def cmd_profiles(args):
    cfg = _config(args)
    ratings = _ratings_from(args, cfg)
    write_ratings(ratings, args.out)
    _write_meta(args.out, cfg)
    print(f"{ratings.shape[0]} users x {ratings.shape[1]} posts, {ratings.nnz} ratings -> {args.out}")


def cmd_similarity(args):
    cfg = _config(args)
    _require(cfg, "posts")
    _, profiles = build_tfidf(read_posts(cfg.posts), _stop_words(cfg))
    sim = build_similarity(profiles, cfg.top_k, cfg.threshold)
    write_similarity(sim, args.out)
    _write_meta(args.out, cfg)
    print(f"{sim.n_items} posts, {len(sim)} stored entries -> {args.out}")


def cmd_train(args):
    cfg = _config(args)
    ratings = _ratings_from(args, cfg)
    hp = cfg.hyperparams()
    sim = None
    if hp.alpha > 0:
        if args.similarity:
            sim = read_similarity(args.similarity, ratings.items,
                                  exact=cfg.top_k >= len(ratings.items) - 1)
        elif cfg.posts:
            _, profiles = build_tfidf(read_posts(cfg.posts), _stop_words(cfg))
            sim = build_similarity(profiles, cfg.top_k, cfg.threshold).restrict(ratings.items)
        else:
            raise InputError("--alpha > 0 needs --similarity or --posts")
    model, report = train(ratings, sim, hp)
    save_model(model, args.out, cfg.to_dict())
    loss_out = args.loss_out or str(args.out) + ".loss.csv"
    report.write_csv(loss_out)
    _write_meta(loss_out, cfg, backend=report.backend, halvings=report.halvings,
                final_learning_rate=report.final_learning_rate, stopped_early=report.stopped_early)
    print(f"trained {ratings.shape[0]}x{ratings.shape[1]} d={hp.d} alpha={hp.alpha}: "
          f"{report.objective} {report.initial_loss:.6g} -> {report.final_loss:.6g} "
          f"in {len(report.losses)} epochs")
    print(f"model -> {args.out}\nloss  -> {loss_out}")


def cmd_recommend(args):
    model = load_model(args.model)
    try:
        u = model.users.index(args.user)
    except ValueError:
        raise InputError(f"unknown user {args.user!r}") from None
    seen = model.seen_items(u)
    if len(seen) == 0:
        print(f"warning: user {args.user} has no training ratings; scores come from "
              "near-initial factors", file=sys.stderr)
    mask = np.ones(len(model.items), dtype=bool)
    mask[seen] = False
    cands = np.flatnonzero(mask)
    scores = model.Q[cands] @ model.P[u]
    order = np.lexsort((cands, -scores))[: args.k]
    print("rank,post_id,score")
    for rank, pos in enumerate(order, start=1):
        print(f"{rank},{model.items[cands[pos]]},{scores[pos]:.6f}")


def cmd_evaluate(args):
    cfg = _config(args)
    weights = _weights(cfg)
    dataset = _dataset(cfg, weights)
    models = ("basic", "hybrid") if args.model_kind == "both" else (args.model_kind,)
    reports = run_experiment_grid(
        dataset, weights, cfg.hyperparams(), cfg.split_spec(), cfg.relevance(),
        norm=cfg.normalization_spec(), selectors=[cfg.profile_selector()], models=models,
        k=cfg.k, top_k=cfg.top_k, threshold=cfg.threshold, candidates=cfg.candidates,
        clamp=cfg.clamp, stop_words=_stop_words(cfg))
    _emit_report(reports, args.out, cfg)
    if args.model_out:
        if len(models) != 1:
            raise InputError("--model-out needs a single --model-kind")
        ratings = build_rating_matrix(dataset, weights, cfg.profile_selector(), cfg.normalization_spec())
        train_r, _ = split(ratings, cfg.split_spec())
        hp = cfg.hyperparams()
        sim = None
        if models[0] == "basic":
            hp = hp.replace(alpha=0.0)
        else:
            sim = build_content_similarity(dataset, cfg.top_k, cfg.threshold,
                                           _stop_words(cfg)).restrict(ratings.items)
        model, _ = train(train_r, sim, hp)
        save_model(model, args.model_out, cfg.to_dict())


def _emit_report(reports, out, cfg):
    text = report_csv(reports)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        _write_meta(out, cfg, backend=kernels.backend())
        print(f"{len(reports)} rows -> {out}")
    else:
        sys.stdout.write(text)


def cmd_experiment(args):
    cfg = _config(args)
    weights = _weights(cfg)
    dataset = _dataset(cfg, weights)
    reports = run_experiment_grid(
        dataset, weights, cfg.hyperparams(), cfg.split_spec(), cfg.relevance(),
        norm=cfg.normalization_spec(), selectors=cfg.profile_selectors(), k=cfg.k,
        top_k=cfg.top_k, threshold=cfg.threshold, candidates=cfg.candidates, clamp=cfg.clamp,
        stop_words=_stop_words(cfg))
    out = args.out or str(Path(cfg.output_dir) / "report.csv")
    _emit_report(reports, out, cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridmf", description="Implicit-feedback matrix factorization with a content-similarity regularizer.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--backend", choices=["cython", "python"], help="kernel backend override")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a planted-topic synthetic dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", choices=["full", "structured"], default="full")
    p.add_argument("--out", required=True, help="output directory")

    p = add("ingest", cmd_ingest, "validate input files and summarise them")
    _data_args(p)
    _profile_args(p)

    p = add("profiles", cmd_profiles, "build a rating matrix from events")
    _data_args(p)
    _profile_args(p)
    p.add_argument("--ratings", help=argparse.SUPPRESS)
    p.add_argument("--out", required=True)

    p = add("similarity", cmd_similarity, "build the TF-IDF cosine similarity matrix")
    p.add_argument("--posts")
    _sim_args(p)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train a basic (alpha=0) or hybrid model")
    _data_args(p)
    _profile_args(p)
    _model_args(p)
    _sim_args(p)
    p.add_argument("--ratings", help="ratings file from `profiles` (instead of --events/--posts)")
    p.add_argument("--similarity", help="similarity file from `similarity`")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--loss-out", help="per-epoch loss CSV (default: <out>.loss.csv)")

    p = add("recommend", cmd_recommend, "top-k unseen posts for one user")
    p.add_argument("--model", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--k", type=int, default=10)

    p = add("evaluate", cmd_evaluate, "split, train and score one profile")
    _data_args(p)
    _profile_args(p)
    _model_args(p)
    _sim_args(p)
    _eval_args(p)
    p.add_argument("--model-kind", choices=["basic", "hybrid", "both"], default="both")
    p.add_argument("--model-out", help="also save the model trained on the train split")
    p.add_argument("--out", help="report CSV (default: stdout)")

    p = add("experiment", cmd_experiment, "run the profile x model grid")
    _data_args(p)
    _profile_args(p)
    _model_args(p)
    _sim_args(p)
    _eval_args(p)
    p.add_argument("--selectors", help="comma-separated subset of all,direct,social,reading")
    p.add_argument("--output-dir")
    p.add_argument("--out", help="report CSV (default: <output-dir>/report.csv)")
    return parser


def _exit_code(exc) -> int:
    if isinstance(exc, GridCellError):
        exc = exc.cause
    if isinstance(exc, NumericError):
        return 3
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.backend:
        kernels.use(args.backend)
    try:
        args.func(args)
    except (HybridMFError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
