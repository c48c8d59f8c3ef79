"""Command-line entry point: train, eval, sweep, query, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, build_config
from .corpus import Question, load_entity_sidecar, load_split
from .evaluation import SweepConfig, evaluate_split, run_experiment, write_reports
from .training import (
    build_pipeline,
    corpus_vocab,
    gbdt_params,
    load_run_embeddings,
    stance_config,
    train_agreement,
    train_full,
)


class CliError(SystemExit):
    def __init__(self, message: str):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(2)


def _require(config: RunConfig, **flags: str | None) -> None:
    for flag, value in flags.items():
        if value is None:
            raise CliError(f"--{flag.replace('_', '-')} is required for this command")


def cmd_train(config: RunConfig) -> int:
    _require(
        config,
        bodies=config.bodies,
        stances_train=config.stances_train,
        embeddings=config.embeddings,
    )
    from .artifacts import save_models

    feature_models, relatedness, agreement, _, _ = train_full(config)
    target = save_models(
        config.model_dir, feature_models, relatedness, agreement, config.list_sizes()
    )
    print(f"wrote {target}")
    return 0


def _load_pipeline_for_eval(config: RunConfig, split):
    from .artifacts import load_models

    sidecar = load_entity_sidecar(config.entity_sidecar) if config.entity_sidecar else None
    embeddings = load_run_embeddings(config, corpus_vocab(split))
    try:
        return load_models(config.model_dir, embeddings, sidecar), embeddings
    except FileNotFoundError:
        raise CliError(f"--model-dir {config.model_dir!r} has no trained models; run train first")


def cmd_eval(config: RunConfig) -> int:
    _require(
        config,
        bodies=config.bodies,
        stances_test=config.stances_test,
        embeddings=config.embeddings,
    )
    split = load_split(config.bodies, config.stances_test, "test")
    pipeline, _ = _load_pipeline_for_eval(config, split)
    report = evaluate_split(pipeline, split, name="test")
    print(report.render())
    print(f"controversial questions: {report.controversial_count}")
    report_path = config.report_path or str(Path(config.model_dir) / "eval_report.jsonl")
    write_reports([report], report_path)
    print(f"wrote {report_path}")
    return 0


def cmd_sweep(config: RunConfig, k_values: list[int], epoch_values: list[int], seeds: list[int]) -> int:
    _require(
        config,
        bodies=config.bodies,
        stances_train=config.stances_train,
        stances_test=config.stances_test,
        embeddings=config.embeddings,
    )
    train_split = load_split(config.bodies, config.stances_train, "train")
    test_split = load_split(config.bodies, config.stances_test, "test")
    vocab = corpus_vocab(train_split) | corpus_vocab(test_split)
    embeddings = load_run_embeddings(config, vocab)
    sidecar = load_entity_sidecar(config.entity_sidecar) if config.entity_sidecar else None

    from .features import FeatureExtractor
    from .training import fit_features_for_split, train_relatedness

    feature_models = fit_features_for_split(train_split, embeddings, config, sidecar)
    relatedness = train_relatedness(
        train_split, FeatureExtractor(feature_models), gbdt_params(config)
    )

    def train_fn(k: int, epochs: int, seed: int):
        net_config = stance_config(config, embeddings.dim, k=k, epochs=epochs, seed=seed)
        model, _ = train_agreement(train_split, embeddings, net_config)
        return model

    def eval_fn(model):
        pipeline = build_pipeline(
            feature_models, relatedness, model, embeddings, config.list_sizes()
        )
        return evaluate_split(pipeline, test_split, name="sweep")

    reports = run_experiment(
        train_fn,
        eval_fn,
        SweepConfig(k_values=tuple(k_values), epoch_values=tuple(epoch_values), seeds=tuple(seeds)),
    )
    for report in reports:
        print(report.render())
    report_path = config.report_path or str(Path(config.model_dir) / "sweep_reports.jsonl")
    write_reports(reports, report_path)
    print(f"wrote {report_path}")
    return 0


def cmd_query(config: RunConfig, question_text: str) -> int:
    _require(config, bodies=config.bodies, embeddings=config.embeddings)
    from .artifacts import load_models
    from .corpus import load_bodies
    from .pipeline import Bm25Index

    store = load_bodies(config.bodies)
    if len(store) == 0:
        raise CliError("article store is empty")
    vocab = set()
    for article_id in store:
        vocab.update(store[article_id].tokens)
    vocab.update(Question(question_text).tokens)
    sidecar = load_entity_sidecar(config.entity_sidecar) if config.entity_sidecar else None
    embeddings = load_run_embeddings(config, vocab)
    try:
        pipeline = load_models(config.model_dir, embeddings, sidecar)
    except FileNotFoundError:
        raise CliError(f"--model-dir {config.model_dir!r} has no trained models; run train first")

    question = Question(text=question_text)
    index = Bm25Index(store)
    result = pipeline.query(question, store, index, pool_size=config.pool_size)
    _print_result(question_text, result)
    return 0


def _print_result(question_text: str, result) -> None:
    print(f"question: {question_text}")
    for title, ranked in (("agree", result.agree), ("disagree", result.disagree), ("discuss", result.discuss)):
        print(f"[{title}]")
        if not ranked:
            print("  (no articles)")
            continue
        for item in ranked:
            print(f"  article {item.article_id}  p={item.p:.3f}")
            for text, sim in item.key_sentences:
                print(f"    {sim:+.3f}  {text}")


def cmd_serve(config: RunConfig) -> int:
    _require(config, bodies=config.bodies, embeddings=config.embeddings)
    import uvicorn

    from .artifacts import load_models, model_hash
    from .corpus import load_bodies
    from .pipeline import Bm25Index
    from .service import ServiceState, create_app

    store = load_bodies(config.bodies)
    if len(store) == 0:
        raise CliError("article store is empty")
    vocab = set()
    for article_id in store:
        vocab.update(store[article_id].tokens)
    sidecar = load_entity_sidecar(config.entity_sidecar) if config.entity_sidecar else None
    embeddings = load_run_embeddings(config, vocab)
    try:
        pipeline = load_models(config.model_dir, embeddings, sidecar)
    except FileNotFoundError:
        raise CliError(f"--model-dir {config.model_dir!r} has no trained models; run train first")

    state = ServiceState(
        pipeline=pipeline,
        store=store,
        index=Bm25Index(store),
        model_version=model_hash(config.model_dir),
        pool_size=config.pool_size,
    )
    app = create_app(state, cors_origin=config.cors_origin)
    uvicorn.run(app, host="0.0.0.0", port=config.port)
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--bodies", help="bodies file (Body ID, articleBody)")
    parser.add_argument("--stances-train", dest="stances_train", help="training stance file")
    parser.add_argument("--stances-test", dest="stances_test", help="test stance file")
    parser.add_argument("--embeddings", help="word vector file")
    parser.add_argument("--embeddings-format", dest="embeddings_format", choices=("text", "binary"))
    parser.add_argument("--entity-sidecar", dest="entity_sidecar", help="precomputed entity file")
    parser.add_argument("--model-dir", dest="model_dir", help="artifact directory (default: models)")
    parser.add_argument("--report-path", dest="report_path", help="where to write JSONL reports")
    parser.add_argument("--k", type=int, help="key sentences per article (default: 3)")
    parser.add_argument("--epochs", type=int, help="agreement training epochs (default: 10)")
    parser.add_argument("--seed", type=int, help="global seed (default: 13)")
    parser.add_argument("--svd-rank", dest="svd_rank", type=int, help="latent feature rank (default: 50)")
    parser.add_argument("--hidden-dim", dest="hidden_dim", type=int, help="LSTM hidden size (default: 100)")
    parser.add_argument("--gbdt-rounds", dest="gbdt_rounds", type=int, help="boosting rounds (default: 200)")
    parser.add_argument("--gbdt-depth", dest="gbdt_depth", type=int, help="tree depth (default: 4)")
    parser.add_argument("--sizes", help="ranked list caps, e.g. 3,3,5")
    parser.add_argument("--pool-size", dest="pool_size", type=int, help="retrieval pool size (default: 100)")
    parser.add_argument("--port", type=int, help="service port (default: 8000)")
    parser.add_argument("--cors-origin", dest="cors_origin", help="allowed UI origin (default: *)")
    parser.add_argument(
        "--no-embedding-filter",
        dest="filter_embeddings",
        action="store_const",
        const=False,
        help="load the full embedding file instead of corpus words only",
    )


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "question", "k_values", "epoch_values", "seeds")
    }
    try:
        return build_config(args.config, overrides)
    except (ConfigError, FileNotFoundError) as exc:
        raise CliError(str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="agreesearch",
        description="Agreement-aware article search: train, evaluate, and serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("train", "fit features, the relatedness model, and the agreement model"),
        ("eval", "evaluate trained models on a test split"),
        ("sweep", "sensitivity sweep over k / epochs / seeds"),
        ("query", "answer one question from the command line"),
        ("serve", "run the HTTP query service"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        if name == "query":
            p.add_argument("question", help="investigative question text")
        if name == "sweep":
            p.add_argument("--k-values", dest="k_values", default="1,3,5",
                           help="comma-separated k values (default: 1,3,5)")
            p.add_argument("--epoch-values", dest="epoch_values", default=None,
                           help="comma-separated epoch counts (default: configured epochs)")
            p.add_argument("--seeds", dest="seeds", default=None,
                           help="comma-separated seeds (default: configured seed)")

    args = parser.parse_args(argv)
    config = _config_from_args(args)

    if args.command == "train":
        return cmd_train(config)
    if args.command == "eval":
        return cmd_eval(config)
    if args.command == "sweep":
        k_values = [int(v) for v in args.k_values.split(",")]
        epoch_values = (
            [int(v) for v in args.epoch_values.split(",")] if args.epoch_values else [config.epochs]
        )
        seeds = [int(v) for v in args.seeds.split(",")] if args.seeds else [config.seed]
        return cmd_sweep(config, k_values, epoch_values, seeds)
    if args.command == "query":
        return cmd_query(config, args.question)
    if args.command == "serve":
        return cmd_serve(config)
    raise CliError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
