import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agreesearch.config import RunConfig
from agreesearch.embeddings import EmbeddingStore
from agreesearch.evaluation import EvalReport, SweepConfig, evaluate_split, run_experiment
from agreesearch.features import FeatureExtractor
from agreesearch.pipeline import StanceSearchPipeline
from agreesearch.training import (
    build_pipeline,
    fit_features_for_split,
    gbdt_params,
    stance_config,
    train_agreement,
    train_relatedness,
)

from synthdata import make_world

# Settings tuned so the synthetic corpus trains in seconds while leaving the
# relatedness margin unsaturated enough for agree/disagree verdicts to win.
SYNTH_SETTINGS = dict(
    svd_rank=20,
    gbdt_rounds=8,
    gbdt_depth=3,
    gbdt_learning_rate=0.12,
    hidden_dim=16,
    epochs=30,
    stance_learning_rate=8e-3,
    batch_size=16,
    seed=13,
)


def make_store(vectors: dict[str, list[float]]) -> EmbeddingStore:
    table = {w: np.array(v, dtype=np.float64) for w, v in vectors.items()}
    dims = {len(v) for v in table.values()}
    assert len(dims) <= 1
    return EmbeddingStore(dim=dims.pop() if dims else 0, table=table)


@pytest.fixture(scope="session")
def world():
    """One shared synthetic corpus; treat it as read-only."""
    return make_world(seed=0)


@pytest.fixture(scope="session")
def toy_store():
    return make_store(
        {
            "alpha": [1.0, 0.0, 0.0],
            "bravo": [0.0, 1.0, 0.0],
            "charlie": [0.0, 0.0, 1.0],
            "delta": [1.0, 1.0, 0.0],
        }
    )


@pytest.fixture(scope="session")
def synth_config():
    return RunConfig(**SYNTH_SETTINGS)


@pytest.fixture(scope="session")
def relatedness_bundle(world, synth_config):
    feature_models = fit_features_for_split(world.train, world.embeddings, synth_config)
    model = train_relatedness(world.train, FeatureExtractor(feature_models), gbdt_params(synth_config))
    return feature_models, model


@dataclass
class SweepBundle:
    reports: list[EvalReport]
    models: dict[int, object]  # k -> trained agreement model
    pipeline: StanceSearchPipeline  # the k=3 pipeline

    def report_for(self, k: int) -> EvalReport:
        return next(r for r in self.reports if r.extra["k"] == k)


@pytest.fixture(scope="session")
def sweep_bundle(world, synth_config, relatedness_bundle):
    """The k in {1,3,5} sensitivity sweep, trained once per session."""
    feature_models, rel_model = relatedness_bundle
    trained = {}

    def train_fn(k, epochs, seed):
        net = stance_config(synth_config, world.embeddings.dim, k=k, epochs=epochs, seed=seed)
        model, _ = train_agreement(world.train, world.embeddings, net)
        trained[k] = model
        return model

    def eval_fn(model):
        pipe = build_pipeline(feature_models, rel_model, model, world.embeddings)
        return evaluate_split(pipe, world.test, name="sweep")

    reports = run_experiment(
        train_fn,
        eval_fn,
        SweepConfig(k_values=(1, 3, 5), epoch_values=(synth_config.epochs,), seeds=(synth_config.seed,)),
    )
    pipeline = build_pipeline(feature_models, rel_model, trained[3], world.embeddings)
    return SweepBundle(reports=reports, models=trained, pipeline=pipeline)
