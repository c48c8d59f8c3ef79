"""End-to-end training orchestration shared by the CLI and the test harness."""

from __future__ import annotations

import time

import numpy as np

from .config import RunConfig
from .corpus import DatasetSplit, load_entity_sidecar, load_split
from .embeddings import EmbeddingStore, load_embeddings
from .features import FeatureConfig, FeatureExtractor, FeatureModels, fit_feature_models
from .gbdt import GbdtModel, GbdtParams, train_gbdt
from .pipeline import StanceSearchPipeline
from .stancenet import (
    MatchLstmModel,
    StanceNetConfig,
    build_training_examples,
    train_stance,
)


def corpus_vocab(split: DatasetSplit) -> set[str]:
    vocab: set[str] = set()
    for article_id in split.articles:
        vocab.update(split.articles[article_id].tokens)
    for pair in split.pairs:
        vocab.update(pair.question.tokens)
    return vocab


def load_run_embeddings(config: RunConfig, vocab: set[str] | None) -> EmbeddingStore:
    effective = vocab if config.filter_embeddings else None
    return load_embeddings(config.embeddings, fmt=config.embeddings_format, vocab=effective)


def gbdt_params(config: RunConfig) -> GbdtParams:
    return GbdtParams(
        num_rounds=config.gbdt_rounds,
        max_depth=config.gbdt_depth,
        learning_rate=config.gbdt_learning_rate,
        min_child_weight=config.gbdt_min_child_weight,
        reg_lambda=config.gbdt_lambda,
        gamma=config.gbdt_gamma,
        subsample=config.gbdt_subsample,
        seed=config.seed,
    )


def stance_config(config: RunConfig, embed_dim: int, k: int | None = None,
                  epochs: int | None = None, seed: int | None = None) -> StanceNetConfig:
    return StanceNetConfig(
        embed_dim=embed_dim,
        hidden_dim=config.hidden_dim,
        key_sentences=k if k is not None else config.k,
        max_question_tokens=config.max_question_tokens,
        max_article_tokens=config.max_article_tokens,
        epochs=epochs if epochs is not None else config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.stance_learning_rate,
        grad_clip=config.grad_clip,
        seed=seed if seed is not None else config.seed,
    )


def fit_features_for_split(
    split: DatasetSplit,
    embeddings: EmbeddingStore,
    config: RunConfig,
    entity_sidecar: dict[int, list[str]] | None = None,
) -> FeatureModels:
    questions = []
    seen = set()
    for pair in split.pairs:
        if pair.question.text not in seen:
            seen.add(pair.question.text)
            questions.append(pair.question)
    articles = [split.articles[article_id] for article_id in sorted(split.articles)]
    return fit_feature_models(
        articles,
        questions,
        embeddings,
        config=FeatureConfig(svd_rank=config.svd_rank, svd_seed=config.seed),
        entity_sidecar=entity_sidecar,
    )


def relatedness_training_data(
    split: DatasetSplit, extractor: FeatureExtractor
) -> tuple[np.ndarray, np.ndarray]:
    rows = [(pair.question, split.articles[pair.article_id]) for pair in split.pairs]
    X = extractor.matrix(rows)
    y = np.array([1.0 if pair.label.is_related else 0.0 for pair in split.pairs])
    return X, y


def train_relatedness(split: DatasetSplit, extractor: FeatureExtractor, params: GbdtParams) -> GbdtModel:
    X, y = relatedness_training_data(split, extractor)
    return train_gbdt(X, y, params)


def train_agreement(
    split: DatasetSplit,
    embeddings: EmbeddingStore,
    net_config: StanceNetConfig,
) -> tuple[MatchLstmModel, list[float]]:
    related = [pair for pair in split.pairs if pair.label.is_related]
    examples = build_training_examples(related, split.articles, embeddings, net_config.key_sentences)
    return train_stance(examples, embeddings, net_config)


def train_full(config: RunConfig, log=print) -> tuple[FeatureModels, GbdtModel, MatchLstmModel, DatasetSplit, EmbeddingStore]:
    """The whole offline path: corpus -> features -> both models."""
    started = time.perf_counter()
    split = load_split(config.bodies, config.stances_train, "train")
    log(f"loaded {len(split.articles)} articles, {len(split.pairs)} labeled pairs")

    sidecar = load_entity_sidecar(config.entity_sidecar) if config.entity_sidecar else None
    embeddings = load_run_embeddings(config, corpus_vocab(split))
    log(f"loaded {len(embeddings)} word vectors (dim {embeddings.dim})")

    feature_models = fit_features_for_split(split, embeddings, config, sidecar)
    log(f"fitted tf-idf vocabulary of {len(feature_models.tfidf.vocabulary)} words, "
        f"latent rank {feature_models.svd.rank}")

    extractor = FeatureExtractor(feature_models)
    relatedness = train_relatedness(split, extractor, gbdt_params(config))
    log(f"trained relatedness model: {len(relatedness.trees)} trees, "
        f"final train loss {relatedness.train_losses[-1]:.4f}")

    net_config = stance_config(config, embeddings.dim)
    agreement, history = train_agreement(split, embeddings, net_config)
    log(f"trained agreement model: epoch losses {['%.4f' % v for v in history]}")
    log(f"total training time {time.perf_counter() - started:.1f}s")
    return feature_models, relatedness, agreement, split, embeddings


def build_pipeline(
    feature_models: FeatureModels,
    relatedness: GbdtModel,
    agreement: MatchLstmModel,
    embeddings: EmbeddingStore,
    sizes: tuple[int, int, int] = (3, 3, 5),
) -> StanceSearchPipeline:
    return StanceSearchPipeline(
        extractor=FeatureExtractor(feature_models),
        relatedness=relatedness,
        agreement=agreement,
        embeddings=embeddings,
        list_sizes=sizes,
    )
