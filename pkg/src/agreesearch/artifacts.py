"""Save/load the trained pipeline as one container file (models.mstr)."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .container import BinaryReader, BinaryWriter, find_section, read_container, write_container
from .embeddings import EmbeddingStore
from .features import (
    FeatureConfig,
    FeatureExtractor,
    FeatureModels,
    deserialize_feature_models,
    serialize_feature_models,
)
from .gbdt import GbdtModel, deserialize_gbdt, serialize_gbdt
from .pipeline import StanceSearchPipeline
from .stancenet import MatchLstmModel, deserialize_stancenet, serialize_stancenet

MODEL_FILE = "models.mstr"


def _conf_payload(sizes: tuple[int, int, int], feature_config: FeatureConfig) -> bytes:
    w = BinaryWriter()
    for value in sizes:
        w.u32(value)
    w.u32(feature_config.svd_rank)
    w.u32(feature_config.svd_seed)
    w.u32(1 if feature_config.skip_stopwords_in_w2v else 0)
    w.u32(1 if feature_config.include_length_features else 0)
    return w.getvalue()


def _parse_conf(payload: bytes) -> tuple[tuple[int, int, int], FeatureConfig]:
    r = BinaryReader(payload)
    sizes = (r.u32(), r.u32(), r.u32())
    config = FeatureConfig(
        svd_rank=r.u32(),
        svd_seed=r.u32(),
        skip_stopwords_in_w2v=bool(r.u32()),
        include_length_features=bool(r.u32()),
    )
    r.expect_end()
    return sizes, config


def save_models(
    model_dir: str | Path,
    feature_models: FeatureModels,
    relatedness: GbdtModel,
    agreement: MatchLstmModel,
    sizes: tuple[int, int, int] = (3, 3, 5),
) -> Path:
    path = Path(model_dir)
    path.mkdir(parents=True, exist_ok=True)
    sections = serialize_feature_models(feature_models)
    sections.append(("GBDT", serialize_gbdt(relatedness)))
    sections.append(("MLSTM", serialize_stancenet(agreement)))
    sections.append(("CONF", _conf_payload(sizes, feature_models.config)))
    target = path / MODEL_FILE
    target.write_bytes(write_container(sections))
    return target


def load_models(
    model_dir: str | Path,
    embeddings: EmbeddingStore,
    entity_sidecar: dict[int, list[str]] | None = None,
) -> StanceSearchPipeline:
    blob = (Path(model_dir) / MODEL_FILE).read_bytes()
    sections = read_container(blob)
    sizes, feature_config = _parse_conf(find_section(sections, "CONF"))
    feature_models = deserialize_feature_models(
        {tag: payload for tag, payload in sections},
        embeddings=embeddings,
        config=feature_config,
        entity_sidecar=entity_sidecar,
    )
    relatedness = deserialize_gbdt(find_section(sections, "GBDT"))
    agreement = deserialize_stancenet(find_section(sections, "MLSTM"))
    return StanceSearchPipeline(
        extractor=FeatureExtractor(feature_models),
        relatedness=relatedness,
        agreement=agreement,
        embeddings=embeddings,
        list_sizes=sizes,
    )


def model_hash(model_dir: str | Path) -> str:
    """Stable content hash of the artifact file, for health reporting."""
    blob = (Path(model_dir) / MODEL_FILE).read_bytes()
    return hashlib.sha256(blob).hexdigest()[:16]
