"""Run settings: built-in defaults, optionally overridden by a key=value file.

Command-line flags override the file.  Channel keys are c_I, c_M, c_D,
beta_u, beta_q, beta_n, strict_appendix_a and mu.<feature>.
"""
from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .channel import DEFAULT_MAX_EXTRA, DEFAULT_PRUNE_BUDGET, Channel
from .moves import MoveConfig
from .phonology import FEATURE_INDEX, ChannelParams

_logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


@dataclass
class Settings:
    mode: str = "text"
    iters: int = 15
    em_iters: int = 3
    em_mode: str = "complete"
    cost: str = "viterbi"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0
    overhead_bits: float = 0.0
    deletion_guard: float = 2.0
    merge_min_support: int = 3
    merge_min_fraction: float = 0.5
    new_word_discount: float = 1.0
    max_candidates: int = 10000
    audit: bool = False
    channel: Optional[bool] = None          # None: on in phoneme mode
    prune_budget: float = DEFAULT_PRUNE_BUDGET
    max_extra: int = DEFAULT_MAX_EXTRA
    case_fold: bool = True
    sentence_split: bool = True
    lines: bool = False
    c_I: float = 0.05
    c_M: float = 0.05
    c_D: float = 0.9
    beta_u: float = 1.0
    beta_q: float = 0.15
    beta_n: float = 0.15
    strict_appendix_a: bool = False
    mu: Dict[str, float] = field(default_factory=dict)

    def update(self, values: Mapping[str, Any]) -> "Settings":
        for key, value in values.items():
            if value is None:
                continue
            if key.startswith("mu."):
                name = key[3:]
                if name not in FEATURE_INDEX:
                    raise ConfigError(f"unknown feature {name!r}")
                self.mu[name] = _coerce(float, value, key)
                continue
            if key not in _FIELDS:
                raise ConfigError(f"unknown setting {key!r}")
            setattr(self, key, _coerce(_FIELDS[key], value, key))
        return self

    @property
    def use_channel(self) -> bool:
        return self.mode == "phoneme" if self.channel is None else bool(self.channel)

    def channel_params(self) -> ChannelParams:
        return ChannelParams(self.c_I, self.c_M, self.c_D, self.beta_u, self.beta_q,
                             self.beta_n, dict(self.mu), self.strict_appendix_a).validate()

    def make_channel(self) -> Optional[Channel]:
        if not self.use_channel:
            return None
        return Channel(self.channel_params(), self.prune_budget, self.max_extra)

    def move_config(self) -> MoveConfig:
        return MoveConfig(em_iters=self.em_iters, em_mode=self.em_mode, cost=self.cost,
                          max_outer=self.iters, deletion_guard=self.deletion_guard,
                          merge_min_support=self.merge_min_support,
                          merge_min_fraction=self.merge_min_fraction,
                          new_word_discount=self.new_word_discount,
                          max_candidates=self.max_candidates, threads=self.threads,
                          audit=self.audit)


_FIELDS = {f.name: f.type for f in dataclasses.fields(Settings) if f.name != "mu"}


def _coerce(kind, value, key):
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if kind in ("bool", "Optional[bool]"):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if kind in ("int",):
            return int(text)
        if kind in ("float", float):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return text


def parse_config(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_settings(path=None, overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """Defaults, then the config file, then explicit overrides."""
    settings = Settings()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
        settings.update(parse_config(text))
    if overrides:
        settings.update(overrides)
    return settings
