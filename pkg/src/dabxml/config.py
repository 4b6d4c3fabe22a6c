"""Receiver server configuration: one YAML file plus command-line overrides."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, Field, field_validator


class EnsembleConfig(BaseModel):
    label: str = "Campus DAB"
    subchannels: list[int] = Field(default_factory=lambda: [1, 2])

    @field_validator("subchannels")
    @classmethod
    def _subchannel_range(cls, value: list[int]) -> list[int]:
        for sub in value:
            if not 0 <= sub <= 63:
                raise ValueError(f"subchannel {sub} not in 0..63")
        if not value:
            raise ValueError("ensemble needs at least one subchannel")
        return value


class TuningDefaults(BaseModel):
    subchannel: int = 1
    volume: int = Field(default=40, ge=0, le=100)


class ServerConfig(BaseModel):
    port: int = 8321
    input: Optional[str] = None  # file:PATH | tcp-listen:PORT | bare path
    watched_subchannel: int = 1
    pad_capacity: int = Field(default=58, ge=4, le=255)
    segment_size: int = Field(default=64, ge=1)
    output_dir: str = "received"
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    defaults: TuningDefaults = Field(default_factory=TuningDefaults)
    afc_drift: int = 0
    afc_tick_seconds: float = 0.05
    request_timeout_seconds: float = 5.0

    @field_validator("watched_subchannel")
    @classmethod
    def _watched_range(cls, value: int) -> int:
        if not 0 <= value <= 63:
            raise ValueError(f"watched subchannel {value} not in 0..63")
        return value


def load_config(path: Optional[str] = None, overrides: Optional[dict[str, Any]] = None) -> ServerConfig:
    """Load the config file (if any) and apply non-None overrides on top."""
    data: dict[str, Any] = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        data = loaded
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ServerConfig(**data)
