"""Application configuration loaded from a TOML file.

Relative paths inside the file resolve against the file's own directory,
so a config can travel with its fixtures. COMPASS_CONFIG overrides the
default path when no explicit --config is given.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .orchestrator import NaPolicy, SynthesisPolicy
from .provider import GenerationParams, Provider, ProviderConfig, HttpProvider, ScriptedProvider
from .rag import DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP, DEFAULT_TOP_K
from .scoring import Pillar

__all__ = [
    "ENV_CONFIG_VAR",
    "ConfigError",
    "RagSettings",
    "PathSettings",
    "ScriptedSettings",
    "AppConfig",
    "load_config",
    "build_provider",
]

ENV_CONFIG_VAR = "COMPASS_CONFIG"
DEFAULT_CONFIG_NAME = "compass.toml"


class ConfigError(Exception):
    """Configuration is missing, unreadable, or fails validation."""


@dataclass(frozen=True)
class RagSettings:
    chunk_size: int = DEFAULT_CHUNK_SIZE
    overlap: int = DEFAULT_OVERLAP
    k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if self.chunk_size <= 0 or self.k <= 0:
            raise ConfigError("rag.chunk_size and rag.k must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ConfigError("rag.overlap must satisfy 0 <= overlap < chunk_size")


@dataclass(frozen=True)
class PathSettings:
    corpus_manifest: Path | None = None
    template_dir: Path | None = None
    output_dir: Path = Path("out")
    index: Path | None = None


@dataclass(frozen=True)
class ScriptedSettings:
    chat_fixtures: Path | None = None
    embedding_fixtures: Path | None = None


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    provider_mode: str = "http"
    scripted: ScriptedSettings = field(default_factory=ScriptedSettings)
    generation: GenerationParams = field(default_factory=GenerationParams)
    policy: SynthesisPolicy = field(default_factory=SynthesisPolicy.default)
    rag: RagSettings = field(default_factory=RagSettings)
    paths: PathSettings = field(default_factory=PathSettings)


_PROVIDER_KEYS = {
    "mode",
    "base_url",
    "api_key",
    "timeout",
    "retries",
    "embedding_model",
    "chat_fixtures",
    "embedding_fixtures",
}
_GENERATION_KEYS = {
    "model_name",
    "max_new_tokens",
    "temperature",
    "top_p",
    "repetition_penalty",
    "do_sample",
    "num_beams",
}
_POLICY_KEYS = {"weights", "thresholds", "conflict_gap", "na_policy"}
_RAG_KEYS = {"chunk_size", "overlap", "k"}
_PATH_KEYS = {"corpus_manifest", "template_dir", "output_dir", "index"}
_TOP_KEYS = {"provider", "generation", "policy", "rag", "paths"}


def _reject_unknown(section: str, data: dict, allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def _resolve(base: Path, raw: str) -> Path:
    path = Path(raw)
    return path if path.is_absolute() else (base / path)


def _existing(base: Path, raw: str, key: str, want_dir: bool = False) -> Path:
    path = _resolve(base, raw)
    if want_dir and not path.is_dir():
        raise ConfigError(f"paths.{key}: directory not found: {path}")
    if not want_dir and not path.is_file():
        raise ConfigError(f"{key}: file not found: {path}")
    return path


def _pillar_map(section: str, data: dict) -> dict[Pillar, float]:
    out = {}
    for key, value in data.items():
        try:
            pillar = Pillar.from_code(key.upper())
        except ValueError as exc:
            raise ConfigError(f"[{section}] unknown pillar {key!r}") from exc
        out[pillar] = float(value)
    return out


def _parse_policy(data: dict) -> SynthesisPolicy:
    _reject_unknown("policy", data, _POLICY_KEYS)
    default = SynthesisPolicy.default()
    weights = _pillar_map("policy.weights", data.get("weights", {})) or dict(default.weights)
    thresholds = (
        _pillar_map("policy.thresholds", data.get("thresholds", {})) or dict(default.thresholds)
    )
    na_raw = data.get("na_policy", default.na_policy.value)
    try:
        na_policy = NaPolicy(na_raw)
    except ValueError as exc:
        raise ConfigError(f"policy.na_policy must be one of {[p.value for p in NaPolicy]}") from exc
    try:
        return SynthesisPolicy(
            weights=weights,
            thresholds=thresholds,
            conflict_gap=float(data.get("conflict_gap", default.conflict_gap)),
            na_policy=na_policy,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load and validate configuration; defaults apply when no file exists.

    Resolution order: explicit ``path``, then COMPASS_CONFIG, then
    ``compass.toml`` in the working directory (optional). An explicitly
    named file must exist.
    """
    explicit = path is not None or bool(os.environ.get(ENV_CONFIG_VAR))
    if path is None:
        path = os.environ.get(ENV_CONFIG_VAR) or DEFAULT_CONFIG_NAME
    path = Path(path)
    if not path.is_file():
        if explicit:
            raise ConfigError(f"config file not found: {path}")
        return AppConfig()
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    _reject_unknown("top level", data, _TOP_KEYS)
    base = path.parent.resolve()

    prov = data.get("provider", {})
    _reject_unknown("provider", prov, _PROVIDER_KEYS)
    mode = prov.get("mode", "http")
    if mode not in ("http", "scripted"):
        raise ConfigError(f"provider.mode must be 'http' or 'scripted', got {mode!r}")
    try:
        provider_config = ProviderConfig(
            base_url=prov.get("base_url", ProviderConfig.base_url),
            api_key=prov.get("api_key"),
            timeout=float(prov.get("timeout", ProviderConfig.timeout)),
            retries=int(prov.get("retries", ProviderConfig.retries)),
            embedding_model=prov.get("embedding_model"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    scripted = ScriptedSettings(
        chat_fixtures=(
            _existing(base, prov["chat_fixtures"], "provider.chat_fixtures")
            if "chat_fixtures" in prov
            else None
        ),
        embedding_fixtures=(
            _existing(base, prov["embedding_fixtures"], "provider.embedding_fixtures")
            if "embedding_fixtures" in prov
            else None
        ),
    )
    if mode == "scripted" and scripted.chat_fixtures is None:
        raise ConfigError("provider.mode 'scripted' requires provider.chat_fixtures")

    gen = data.get("generation", {})
    _reject_unknown("generation", gen, _GENERATION_KEYS)
    try:
        generation = GenerationParams(**gen)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[generation]: {exc}") from exc

    paths_raw = data.get("paths", {})
    _reject_unknown("paths", paths_raw, _PATH_KEYS)
    paths = PathSettings(
        corpus_manifest=(
            _existing(base, paths_raw["corpus_manifest"], "paths.corpus_manifest")
            if "corpus_manifest" in paths_raw
            else None
        ),
        template_dir=(
            _existing(base, paths_raw["template_dir"], "template_dir", want_dir=True)
            if "template_dir" in paths_raw
            else None
        ),
        output_dir=_resolve(base, paths_raw.get("output_dir", "out")),
        index=_resolve(base, paths_raw["index"]) if "index" in paths_raw else None,
    )

    rag_raw = data.get("rag", {})
    _reject_unknown("rag", rag_raw, _RAG_KEYS)
    try:
        rag = RagSettings(**rag_raw)
    except TypeError as exc:
        raise ConfigError(f"[rag]: {exc}") from exc

    return AppConfig(
        provider=provider_config,
        provider_mode=mode,
        scripted=scripted,
        generation=generation,
        policy=_parse_policy(data.get("policy", {})),
        rag=rag,
        paths=paths,
    )


def build_provider(config: AppConfig) -> Provider:
    """Instantiate the provider the config names (live HTTP or scripted)."""
    if config.provider_mode == "scripted":
        if config.scripted.chat_fixtures is None:
            raise ConfigError("scripted provider requires chat fixtures")
        return ScriptedProvider.from_files(
            config.scripted.chat_fixtures, config.scripted.embedding_fixtures
        )
    return HttpProvider(config.provider)
