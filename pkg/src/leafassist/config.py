"""Application configuration: one TOML file plus environment overrides.

Every key can be overridden with ``LEAFASSIST_<SECTION>_<KEY>`` (upper case,
e.g. ``LEAFASSIST_DETECTOR_MODE=remote``). Values are coerced to the type of
the field they override; list-valued fields take comma-separated strings.
Validation happens eagerly so a process with a bad config refuses to start.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .boxes import DEFAULT_CLASSES
from .errors import ConfigError

ENV_PREFIX = "LEAFASSIST"


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8077
    cors_origins: list = field(default_factory=lambda: ["*"])
    max_upload_bytes: int = 10 * 1024 * 1024
    session_ttl_seconds: float = 3600.0


@dataclass(frozen=True)
class DetectorConfig:
    mode: str = "fixture"  # "fixture" | "remote"
    remote_url: str = ""
    labels_dir: str = ""
    conf_threshold: float = 0.25
    iou_threshold: float = 0.45
    classes: list = field(default_factory=lambda: list(DEFAULT_CLASSES))
    timeout_seconds: float = 30.0


@dataclass(frozen=True)
class EmbeddingConfig:
    provider: str = "local"  # "local" | "remote"
    dim: int = 384
    endpoint: str = ""
    model: str = "all-MiniLM-L6-v2"
    api_key_env: str = "EMBEDDING_API_KEY"
    batch_size: int = 64
    timeout_seconds: float = 30.0


@dataclass(frozen=True)
class StoreConfig:
    path: str = "store.jsonl"


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 800
    overlap: int = 100


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 4
    context_char_budget: int = 4000


@dataclass(frozen=True)
class ChatConfig:
    window_size: int = 5


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = "https://api.groq.com/openai/v1/chat/completions"
    model: str = "llama3-8b-8192"
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 0.2
    max_tokens: int = 1024
    timeout_seconds: float = 30.0
    max_retries: int = 3
    backoff_seconds: float = 0.5


@dataclass(frozen=True)
class AppConfig:
    server: ServerConfig = field(default_factory=ServerConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    chat: ChatConfig = field(default_factory=ChatConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, list):
        return [part.strip() for part in raw.split(",") if part.strip()]
    return raw


def _section_from(cls, data: dict, section_name: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"[{section_name}] has unknown keys: {', '.join(unknown)}")
    return cls(**data)


def _apply_env(section, section_name: str, environ) -> object:
    updates = {}
    for f in fields(section):
        env_key = f"{ENV_PREFIX}_{section_name}_{f.name}".upper()
        if env_key in environ:
            try:
                updates[f.name] = _coerce(environ[env_key], getattr(section, f.name))
            except ValueError as exc:
                raise ConfigError(f"bad value for {env_key}: {exc}") from exc
    return replace(section, **updates) if updates else section


def validate(config: AppConfig) -> AppConfig:
    if config.detector.mode not in ("fixture", "remote"):
        raise ConfigError(f"detector.mode must be fixture|remote, got {config.detector.mode!r}")
    if config.detector.mode == "remote" and not config.detector.remote_url:
        raise ConfigError("detector.mode=remote requires detector.remote_url")
    if not 0.0 <= config.detector.conf_threshold <= 1.0:
        raise ConfigError("detector.conf_threshold must be in [0, 1]")
    if not 0.0 <= config.detector.iou_threshold <= 1.0:
        raise ConfigError("detector.iou_threshold must be in [0, 1]")
    if config.embedding.provider not in ("local", "remote"):
        raise ConfigError(
            f"embedding.provider must be local|remote, got {config.embedding.provider!r}")
    if config.embedding.provider == "remote" and not config.embedding.endpoint:
        raise ConfigError("embedding.provider=remote requires embedding.endpoint")
    if config.embedding.dim < 1:
        raise ConfigError("embedding.dim must be >= 1")
    if not 0 <= config.chunking.overlap < config.chunking.chunk_size:
        raise ConfigError("chunking requires 0 <= overlap < chunk_size")
    if config.retrieval.k < 1:
        raise ConfigError("retrieval.k must be >= 1")
    if config.chat.window_size < 1:
        raise ConfigError("chat.window_size must be >= 1")
    if not 0.0 <= config.llm.temperature <= 2.0:
        raise ConfigError("llm.temperature must be in [0, 2]")
    if config.llm.timeout_seconds <= 0:
        raise ConfigError("llm.timeout_seconds must be positive")
    if config.server.max_upload_bytes < 1:
        raise ConfigError("server.max_upload_bytes must be >= 1")
    return config


_SECTIONS = {
    "server": ServerConfig,
    "detector": DetectorConfig,
    "embedding": EmbeddingConfig,
    "store": StoreConfig,
    "chunking": ChunkingConfig,
    "retrieval": RetrievalConfig,
    "chat": ChatConfig,
    "llm": LlmConfig,
}


def load_config(path=None, environ=None) -> AppConfig:
    """Build an AppConfig from an optional TOML file and the environment."""
    environ = os.environ if environ is None else environ
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")

    sections = {}
    for name, cls in _SECTIONS.items():
        try:
            section = _section_from(cls, data.get(name, {}), name)
        except TypeError as exc:
            raise ConfigError(f"bad [{name}] section: {exc}") from exc
        sections[name] = _apply_env(section, name, environ)
    return validate(AppConfig(**sections))
