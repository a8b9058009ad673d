"""Run configuration, loadable from a JSON or YAML document."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import yaml

from hybridsim import abm
from hybridsim.agent.drivers import DriverConfig
from hybridsim.environment import FeedPolicy, TIME_FORMAT

MODES = ("micro", "macro", "frozen_replicate", "calibrate")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "macro"
    model: abm.ModelParams = field(default_factory=abm.BCParams)
    driver: DriverConfig = field(default_factory=DriverConfig)
    rounds: int = 14
    seed: int = 0
    step_hours: float = 12.0
    start: str = "2018-01-01 00:00:00"
    feed_policy: FeedPolicy = field(default_factory=FeedPolicy)
    timeline_k: int = 5
    memory_k: int = 5
    reflection_period: int = 5
    topic: str = "#MeToo"
    lexicon: Mapping | None = None
    workers: int = 1
    failure_budget: float = 0.05
    replications: int = 10
    output_dir: str = "out"
    write_agent_trace: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.timeline_k < 1 or self.memory_k < 1:
            raise ValueError("timeline_k and memory_k must be >= 1")
        if self.step_hours <= 0:
            raise ValueError("step_hours must be > 0")
        if not 0.0 <= self.failure_budget <= 1.0:
            raise ValueError("failure_budget must be in [0, 1]")
        if self.workers < 1 or self.replications < 1:
            raise ValueError("workers and replications must be >= 1")
        datetime.strptime(self.start, TIME_FORMAT)

    @property
    def start_time(self) -> datetime:
        return datetime.strptime(self.start, TIME_FORMAT)

    @classmethod
    def from_dict(cls, data: Mapping) -> RunConfig:
        data = dict(data)
        if "model" in data:
            data["model"] = abm.params_from_dict(data["model"])
        if "driver" in data:
            data["driver"] = DriverConfig.from_dict(data["driver"])
        if "feed_policy" in data:
            data["feed_policy"] = FeedPolicy(**data["feed_policy"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["model"] = abm.params_to_dict(self.model)
        out["driver"] = self.driver.to_dict()
        fp = self.feed_policy
        out["feed_policy"] = {"mode": fp.mode.value, "fraction": fp.fraction,
                              "neutral_threshold": fp.neutral_threshold, "hashtag": fp.hashtag,
                              "pool_size": fp.pool_size}
        out["lexicon"] = dict(self.lexicon) if self.lexicon else None
        return out


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return RunConfig.from_dict(data or {})
