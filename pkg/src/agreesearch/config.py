"""Run configuration with flags > config file > defaults precedence.

The config file is a flat ``key = value`` text format (# comments allowed);
keys match the dataclass field names. Values are coerced by the declared
field type, so the file never needs quoting.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # Paths
    bodies: str | None = None
    stances_train: str | None = None
    stances_test: str | None = None
    embeddings: str | None = None
    embeddings_format: str = "text"
    entity_sidecar: str | None = None
    model_dir: str = "models"
    report_path: str | None = None

    # Feature / relatedness hyperparameters
    svd_rank: int = 50
    gbdt_rounds: int = 200
    gbdt_depth: int = 4
    gbdt_learning_rate: float = 0.1
    gbdt_min_child_weight: float = 1.0
    gbdt_lambda: float = 1.0
    gbdt_gamma: float = 0.0
    gbdt_subsample: float = 0.8

    # Agreement model hyperparameters
    k: int = 3
    epochs: int = 10
    hidden_dim: int = 100
    batch_size: int = 32
    stance_learning_rate: float = 1e-3
    grad_clip: float = 5.0
    max_question_tokens: int = 30
    max_article_tokens: int = 120

    seed: int = 13
    sizes: str = "3,3,5"
    pool_size: int = 100

    # Service
    port: int = 8000
    cors_origin: str = "*"
    filter_embeddings: bool = True

    def list_sizes(self) -> tuple[int, int, int]:
        try:
            a, d, s = (int(part) for part in self.sizes.split(","))
        except ValueError:
            raise ConfigError(f"sizes must be 'agree,disagree,discuss', got {self.sizes!r}") from None
        return a, d, s


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    declared = _FIELDS[name].type
    text = raw.strip()
    if "bool" in declared:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in declared:
        return int(text)
    if "float" in declared:
        return float(text)
    return text


def load_config_file(path: str | Path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as handle:
        for line_num, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{line_num}: expected key = value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{line_num}: unknown key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def build_config(file_path: str | None, overrides: dict) -> RunConfig:
    """Defaults, then config-file values, then explicit flag overrides."""
    config = RunConfig()
    if file_path:
        for key, value in load_config_file(file_path).items():
            setattr(config, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config
