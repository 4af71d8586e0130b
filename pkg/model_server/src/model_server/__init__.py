"""HTTP sidecar serving classifiers and masked LMs to the attack engine.

One server instance wraps one model in one role and exposes it behind the
JSON wire protocol the engine's HTTP client speaks: /v1/classify or
/v1/fill-mask, plus /v1/info and /healthz.
"""

__version__ = "0.1.0"

from model_server.config import ConfigError, ServerConfig, load_config
from model_server.service import build_app, serve

__all__ = [
    "ConfigError",
    "ServerConfig",
    "build_app",
    "load_config",
    "serve",
]
