"""Server configuration."""

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

ROLES = ("classifier", "masked-lm")


class ConfigError(ValueError):
    """Rejected server configuration."""


@dataclass(frozen=True)
class ServerConfig:
    """One model served in one role.

    `model` is a local directory or hub identifier loadable by
    transformers. `labels` names the classifier's output dimensions in
    index order; when omitted the model's own id2label mapping is used.
    """

    model: str
    role: str
    device: str = "cpu"
    max_batch: int = 32
    host: str = "127.0.0.1"
    port: int = 8760
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.model:
            raise ConfigError("model is required")
        if self.role not in ROLES:
            raise ConfigError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.max_batch < 1:
            raise ConfigError("max_batch must be >= 1")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")
        if self.labels is not None:
            if self.role != "classifier":
                raise ConfigError("labels only apply to the classifier role")
            object.__setattr__(self, "labels", tuple(self.labels))
            if not self.labels or not all(self.labels):
                raise ConfigError("labels must be non-empty strings")


def load_config(path) -> ServerConfig:
    """Read a ServerConfig from a JSON file, rejecting unknown keys."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = {f.name for f in fields(ServerConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return ServerConfig(**raw)
