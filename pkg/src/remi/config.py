"""Runtime configuration with file loading and environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

ENV_ADDR = "REMI_ADDR"
ENV_DATA_DIR = "REMI_DATA_DIR"


@dataclass
class EngineConfig:
    recent_window: int = 5            # K recently-asked questions / entity turns
    engagement_window: int = 4        # scored turns feeding the pivot check
    pivot_threshold: float = 0.0      # windowed sentiment below this pivots
    question_cap: int = 8             # per-memento elicitations before pivoting
    story_token_threshold: int = 12
    negation_window: int = 2
    suggestion_min_score: float = 0.2
    suggestion_refractory_days: int = 30
    suggestion_limit: int = 3
    single_active_session: bool = True
    rules_path: str | None = None
    templates_path: str | None = None
    lexicon_overrides: dict = field(default_factory=dict)
    language_adapter: dict | None = None   # AdapterDescriptor fields, external mode
    vision_adapter: dict | None = None

    @classmethod
    def from_doc(cls, doc: dict) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8765
    data_dir: str = "./remi-data"
    api_token: str | None = None
    wall_clock: bool = False  # default simulated clock keeps replays byte-stable
    ui_dir: str | None = "./frontend"  # static assets mounted at / when present
    engine: EngineConfig = field(default_factory=EngineConfig)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServiceConfig":
        doc: dict = {}
        if path is not None:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        config = cls(
            listen_host=doc.get("listen_host", "127.0.0.1"),
            listen_port=doc.get("listen_port", 8765),
            data_dir=doc.get("data_dir", "./remi-data"),
            api_token=doc.get("api_token"),
            wall_clock=doc.get("wall_clock", False),
            ui_dir=doc.get("ui_dir", "./frontend"),
            engine=EngineConfig.from_doc(doc.get("engine", {})),
        )
        addr = os.environ.get(ENV_ADDR)
        if addr:
            host, _, port = addr.rpartition(":")
            config.listen_host = host or config.listen_host
            config.listen_port = int(port)
        data_dir = os.environ.get(ENV_DATA_DIR)
        if data_dir:
            config.data_dir = data_dir
        return config
