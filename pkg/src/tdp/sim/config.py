"""Simulation configuration."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import yaml

from ..trust import TrustParams

ATTACKER_MODELS = ("none", "TO1", "TO2", "TO3")
SELECTIONS = ("random", "topTV", "topTC")
QOS_MODELS = ("contact_duration", "data_volume", "constant")


class ConfigError(ValueError):
    pass


def default_sim_trust() -> TrustParams:
    # Infocom'05-like setting: sigma_bar 110 gives c_g 0.14; only the selected
    # peer's trust moves on a transaction.
    return TrustParams(
        c_g=0.14,
        c_w=0.5,
        alpha=0.5,
        beta=0.1,
        sigma_bar=110.0,
        task_types=["service"],
        pattern_map={"service": (0, 1)},
        ewma_weight=0.125,
    )


@dataclass
class SimConfig:
    trace_path: str | None = None
    trace_layout: str = "tdp"
    trace_granularity: float = 120.0
    n_devices: int = 40
    expected_contacts: float = 110.0
    mean_contact_duration: float = 600.0
    duration: float = 30000.0
    cycle_length: float | None = None
    upload_interval: float = 1000.0
    receipt_window: float | None = None
    seed: int = 0
    attacker_model: str = "none"
    attacker_selection: str = "random"
    attacker_pct: float = 0.1
    attack_intensity: float = 1.0
    qos_model: str = "contact_duration"
    qos_constant: float = 0.5
    data_rate: float = 1.0
    task_type: str = "service"
    task_value: float = 0.5
    min_contact: float = 0.0
    session_timeout_ticks: int = 5
    prototype_exclusion: bool = False
    trust: TrustParams = field(default_factory=default_sim_trust)

    def __post_init__(self):
        if isinstance(self.trust, Mapping):
            base = default_sim_trust().to_dict()
            base.update(self.trust)
            self.trust = TrustParams.from_dict(base)
        self.validate()

    @property
    def cycle(self) -> float:
        return self.cycle_length if self.cycle_length is not None else self.duration

    @property
    def freshness(self) -> float:
        return self.receipt_window if self.receipt_window is not None else self.cycle

    def validate(self) -> None:
        if self.attacker_model not in ATTACKER_MODELS:
            raise ConfigError(f"attacker_model must be one of {ATTACKER_MODELS}")
        if self.attacker_selection not in SELECTIONS:
            raise ConfigError(f"attacker_selection must be one of {SELECTIONS}")
        if self.qos_model not in QOS_MODELS:
            raise ConfigError(f"qos_model must be one of {QOS_MODELS}")
        if self.attacker_model != "none" and not 0 < self.attacker_pct < 1:
            raise ConfigError("attacker_pct must lie in (0, 1)")
        if not 0 <= self.attack_intensity <= 1:
            raise ConfigError("attack_intensity must lie in [0, 1]")
        if self.duration <= 0 or self.upload_interval <= 0 or self.cycle <= 0:
            raise ConfigError("duration, upload_interval and cycle_length must be positive")
        if self.trace_path is None and self.n_devices < 2:
            raise ConfigError("a synthetic trace needs at least two devices")
        if not 0 < self.task_value <= 1:
            raise ConfigError("task_value must lie in (0, 1]")
        if self.task_type not in self.trust.task_types:
            raise ConfigError(f"task_type {self.task_type!r} is not among {self.trust.task_types}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["trust"] = self.trust.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimConfig":
        data = dict(data)
        data.pop("artifact_version", None)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        """Read a YAML or JSON file; a run manifest's ``config`` block also works."""
        doc = yaml.safe_load(Path(path).read_text()) or {}
        if "config" in doc and isinstance(doc["config"], Mapping):
            doc = doc["config"]
        return cls.from_dict(doc)

    def replace(self, **changes) -> "SimConfig":
        d = self.to_dict()
        d.update(changes)
        return SimConfig.from_dict(d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
