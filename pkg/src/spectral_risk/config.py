"""Experiment configuration: JSON schema, defaults and validation.

Precedence is command-line flags > config file > built-in defaults. The
defaults reproduce the reference experiment: universes of 5/10/20 assets,
windows of 20/30/40 days, 100 random universes per cell, 10 bp costs and 1%
tail level.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from .backtest import COST_CONVENTIONS
from .strategies import KINDS

DEFAULT_STRATEGIES = ("one_over_n", "rr", "random_control", "min_var", "min_var_quantile", "min_cvar")
SEED_ENV = "SPECTRAL_RISK_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyEntry:
    kind: str
    reduction: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    grid_N: tuple[int, ...] = (5, 10, 20)
    grid_w: tuple[int, ...] = (20, 30, 40)
    reps: int = 100
    cost_rate: float = 0.001
    alpha: float = 0.01
    optimizer_alpha: float = 0.01
    strategies: tuple[StrategyEntry, ...] = tuple(StrategyEntry(k) for k in DEFAULT_STRATEGIES)
    master_seed: int = 0
    cost_convention: str = "l1"
    save_runs: bool = False

    def __post_init__(self) -> None:
        if not self.grid_N or any(n < 2 for n in self.grid_N):
            raise ConfigError("grid_N: every universe size must be >= 2")
        if not self.grid_w or any(w < 2 for w in self.grid_w):
            raise ConfigError("grid_w: every window length must be >= 2")
        if self.reps < 1:
            raise ConfigError("reps: must be >= 1")
        if self.cost_rate < 0:
            raise ConfigError("cost_rate: must be non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha: must lie in (0, 1)")
        if not 0 < self.optimizer_alpha <= 0.5:
            raise ConfigError("optimizer_alpha: must lie in (0, 0.5]")
        if self.cost_convention not in COST_CONVENTIONS:
            raise ConfigError(f"cost_convention: expected one of {', '.join(COST_CONVENTIONS)}")
        if not self.strategies:
            raise ConfigError("strategies: at least one strategy is required")
        kinds = [s.kind for s in self.strategies]
        for s in self.strategies:
            if s.kind not in KINDS:
                raise ConfigError(f"strategies: unknown kind {s.kind!r}")
            if not 0 <= s.reduction <= 1:
                raise ConfigError(f"strategies: reduction for {s.kind!r} must lie in [0, 1]")
        if len(set(kinds)) != len(kinds):
            raise ConfigError("strategies: each kind may appear only once")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["grid_N"] = list(self.grid_N)
        d["grid_w"] = list(self.grid_w)
        d["strategies"] = [asdict(s) for s in self.strategies]
        return d

    def with_overrides(self, **kw: Any) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_FIELDS = {f for f in ExperimentConfig.__dataclass_fields__}


def _int_list(key: str, value: Any) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{key}: expected a list of integers")
    return tuple(value)


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number")
    return float(value)


def _strategies(value: Any, default_reduction: float) -> tuple[StrategyEntry, ...]:
    if not isinstance(value, list):
        raise ConfigError("strategies: expected a list")
    out = []
    for item in value:
        if isinstance(item, str):
            out.append(StrategyEntry(item, default_reduction))
        elif isinstance(item, dict):
            extra = set(item) - {"kind", "reduction"}
            if extra:
                raise ConfigError(f"strategies: unknown key {sorted(extra)[0]!r}")
            if "kind" not in item:
                raise ConfigError("strategies: entry is missing 'kind'")
            red = _number("strategies.reduction", item.get("reduction", default_reduction))
            out.append(StrategyEntry(str(item["kind"]), red))
        else:
            raise ConfigError("strategies: entries must be names or objects")
    return tuple(out)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = _FIELDS | {"reduction"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown configuration key")
    kw: dict[str, Any] = {}
    for key in ("grid_N", "grid_w"):
        if key in data:
            kw[key] = _int_list(key, data[key])
    for key in ("reps", "master_seed"):
        if key in data:
            if isinstance(data[key], bool) or not isinstance(data[key], int):
                raise ConfigError(f"{key}: expected an integer")
            kw[key] = data[key]
    for key in ("cost_rate", "alpha", "optimizer_alpha"):
        if key in data:
            kw[key] = _number(key, data[key])
    if "cost_convention" in data:
        kw["cost_convention"] = data["cost_convention"]
    if "save_runs" in data:
        if not isinstance(data["save_runs"], bool):
            raise ConfigError("save_runs: expected true or false")
        kw["save_runs"] = data["save_runs"]
    reduction = _number("reduction", data.get("reduction", 0.5))
    if "strategies" in data:
        kw["strategies"] = _strategies(data["strategies"], reduction)
    elif "reduction" in data:
        kw["strategies"] = tuple(StrategyEntry(k, reduction) for k in DEFAULT_STRATEGIES)
    if "master_seed" not in kw and os.environ.get(SEED_ENV):
        kw["master_seed"] = env_seed()
    return ExperimentConfig(**kw)


def env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}: expected an integer, got {raw!r}") from None


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    """Read a JSON config file; omitted fields take the reference defaults."""
    if path is None:
        return config_from_dict({})
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return config_from_dict(data)
