"""Run configuration: YAML file with ${ENV_VAR} interpolation, overridable by CLI flags."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .embedding import EmbeddingProviderConfig
from .reformulate import LLMProviderConfig

_ENV_PATTERN = re.compile(r"\$\{(?P<name>[A-Za-z_][A-Za-z0-9_]*)(?::-(?P<default>[^}]*))?\}")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def interpolate_env(value):
    """Replace ${VAR} / ${VAR:-default} in strings, recursively through containers."""
    if isinstance(value, str):

        def _sub(match: re.Match) -> str:
            name = match.group("name")
            if name in os.environ:
                return os.environ[name]
            default = match.group("default")
            if default is not None:
                return default
            raise ConfigError(f"environment variable {name} is not set and has no default")

        return _ENV_PATTERN.sub(_sub, value)
    if isinstance(value, dict):
        return {key: interpolate_env(item) for key, item in value.items()}
    if isinstance(value, list):
        return [interpolate_env(item) for item in value]
    return value


@dataclass
class RunConfig:
    dataset_dir: Path | None = None
    dataset_name: str | None = None
    methods: list[str] = field(default_factory=lambda: ["noqr", "q2e", "query2doc", "eqr"])
    encoders: list[EmbeddingProviderConfig] = field(default_factory=lambda: [EmbeddingProviderConfig()])
    llm: LLMProviderConfig | None = None
    n: int = 50
    cutoffs: list[int] = field(default_factory=lambda: [10, 30])
    eqr_k: int = 5
    top_k: int = 10
    out_dir: Path = Path("out")
    cache_dir: Path | None = None
    replay_log: Path | None = None
    char_budget: int = 20000
    on_parse_failure: str = "retry-once"
    seed: int = 0
    ui_dir: Path | None = None

    @property
    def encoder(self) -> EmbeddingProviderConfig:
        return self.encoders[0]

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.eqr_k < 1:
            raise ConfigError("eqr_k must be >= 1")
        if not self.encoders:
            raise ConfigError("at least one encoder must be configured")
        if self.dataset_dir is not None and not Path(self.dataset_dir).exists():
            raise ConfigError(f"dataset directory does not exist: {self.dataset_dir}")
        if self.llm is not None and self.llm.provider_kind in ("scripted-stub", "replay"):
            if not self.llm.fixtures_path or not Path(self.llm.fixtures_path).exists():
                raise ConfigError(f"LLM fixtures/replay file does not exist: {self.llm.fixtures_path}")


def _encoder_from_dict(raw: dict) -> EmbeddingProviderConfig:
    return EmbeddingProviderConfig(
        provider_kind=raw.get("kind", raw.get("provider_kind", "deterministic-test")),
        model_name=raw.get("model_name", "det-hash"),
        dim=int(raw.get("dim", 64)),
        batch_size=int(raw.get("batch_size", 64)),
        endpoint=raw.get("endpoint"),
        api_key_env=raw.get("api_key_env", "EQR_EMBED_API_KEY"),
        input_limit=raw.get("input_limit"),
        max_retries=int(raw.get("max_retries", 3)),
        seed=int(raw.get("seed", 0)),
    )


def _llm_from_dict(raw: dict) -> LLMProviderConfig:
    return LLMProviderConfig(
        provider_kind=raw.get("kind", raw.get("provider_kind", "scripted-stub")),
        model_name=raw.get("model_name", "stub"),
        endpoint=raw.get("endpoint"),
        temperature=float(raw.get("temperature", 0.0)),
        max_output_tokens=int(raw.get("max_output_tokens", 1024)),
        api_key_env=raw.get("api_key_env", "EQR_LLM_API_KEY"),
        max_retries=int(raw.get("max_retries", 3)),
        fixtures_path=raw.get("fixtures"),
    )


def config_from_dict(raw: dict) -> RunConfig:
    raw = interpolate_env(raw)
    config = RunConfig()
    dataset = raw.get("dataset", {})
    if isinstance(dataset, str):
        config.dataset_dir = Path(dataset)
    elif dataset:
        if "dir" in dataset:
            config.dataset_dir = Path(dataset["dir"])
        config.dataset_name = dataset.get("name")
    if "methods" in raw:
        config.methods = list(raw["methods"])
    if "encoders" in raw:
        config.encoders = [_encoder_from_dict(e) for e in raw["encoders"]]
    elif "encoder" in raw:
        config.encoders = [_encoder_from_dict(raw["encoder"])]
    if "llm" in raw:
        config.llm = _llm_from_dict(raw["llm"])
    for key in ("n", "eqr_k", "top_k", "char_budget", "seed"):
        if key in raw:
            setattr(config, key, int(raw[key]))
    if "cutoffs" in raw:
        config.cutoffs = [int(k) for k in raw["cutoffs"]]
    for key in ("out_dir", "cache_dir", "replay_log", "ui_dir"):
        if key in raw and raw[key] is not None:
            setattr(config, key, Path(raw[key]))
    if "on_parse_failure" in raw:
        config.on_parse_failure = raw["on_parse_failure"]
    return config


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus flag overrides (flags win)."""
    raw: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigError(f"config root must be a mapping: {path}")
            raw = loaded
    config = config_from_dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("dataset_dir", "out_dir", "cache_dir", "replay_log"):
            setattr(config, key, Path(value))
        elif key == "methods":
            config.methods = list(value)
        elif key == "encoder_model":
            chosen = [e for e in config.encoders if e.model_name == value]
            if chosen:
                config.encoders = chosen
            else:
                config.encoders[0].model_name = value
        else:
            setattr(config, key, value)
    return config
