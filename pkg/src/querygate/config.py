"""Service configuration: one YAML file plus QUERYGATE_* environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import yaml

from querygate.rules import SENTENCE_TERMINATORS


@dataclass
class GatewayConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    log_path: str = "decisions.log"
    model_path: str | None = None
    rules_path: str | None = None
    sample_size: int = 50
    sentence_terminators: str = SENTENCE_TERMINATORS
    operator_token: str | None = None


_ENV_PREFIX = "QUERYGATE_"


def load_config(path: str | None = None, env: dict[str, str] | None = None) -> GatewayConfig:
    env = env if env is not None else dict(os.environ)
    values: dict = {}
    if path:
        with open(path, encoding="utf-8") as f:
            values.update(yaml.safe_load(f) or {})
    config = GatewayConfig()
    for f_ in fields(GatewayConfig):
        env_key = _ENV_PREFIX + f_.name.upper()
        if env_key in env:
            raw: object = env[env_key]
            if f_.name in ("listen_port", "sample_size"):
                raw = int(raw)
            values[f_.name] = raw
        if f_.name in values and values[f_.name] is not None:
            setattr(config, f_.name, values[f_.name])
    return config
