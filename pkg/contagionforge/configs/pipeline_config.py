"""
Run configuration: one JSON document, optionally overridden by CONTAGION_*
environment variables and then by CLI flags.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..data.ingest import SubPeriod, validate_schedule
from ..errors import ContagionError, DomainError, ParseError
from .channel_configs import CHANNELS, DEFAULT_INTERACTIONS
from .schedules import get_schedule

logger = logging.getLogger(__name__)

BASELINE_Q75 = "baseline-q75"

ENV_OVERRIDES = {
    "CONTAGION_OUTPUT_DIR": ("output_dir", str),
    "CONTAGION_SEED": ("seed", int),
    "CONTAGION_THREADS": ("threads", int),
}

PATH_FIELDS = ("prices_path", "channels_path", "classes_path", "output_dir")


def _default_schedule() -> List[SubPeriod]:
    return [SubPeriod(**p) for p in get_schedule()]


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prices_path: Optional[str] = None
    channels_path: Optional[str] = None
    classes_path: Optional[str] = None
    output_dir: str = "output"

    schedule: List[SubPeriod] = Field(default_factory=_default_schedule)
    baseline_period: Optional[str] = None
    periods: Optional[List[str]] = None

    levels: int = 6
    wavelet_filter: str = "LA8"
    scales: List[int] = Field(default_factory=lambda: [5])
    quantiles: List[float] = Field(default_factory=lambda: [0.05, 0.5, 0.95])
    reporting_scale: int = 5
    reporting_quantile: float = 0.5
    quantile_solver: Literal["irls", "highs"] = "irls"
    threshold: Union[float, Literal["baseline-q75"]] = BASELINE_Q75
    top_by: Literal["degree", "strength"] = "degree"
    top_links: int = 15
    min_rows: int = 30

    horizons: List[int] = Field(default_factory=lambda: [1, 5, 22])
    interaction_pairs: List[Tuple[str, str]] = Field(default_factory=lambda: list(DEFAULT_INTERACTIONS))
    bootstrap_reps: int = 300
    seed: int = 0
    sargan_gate: float = 0.5
    sargan_level: float = 0.05
    force_rigobon: bool = False
    regime_window: int = 22
    lasso_penalty: Optional[float] = None

    walk_steps: int = 4
    threads: int = 1

    @field_validator("quantiles")
    @classmethod
    def _quantiles_in_unit_interval(cls, v: List[float]) -> List[float]:
        if not v or any(not 0.0 < q < 1.0 for q in v):
            raise ValueError(f"quantiles must lie in (0, 1), got {v}")
        return sorted(set(v))

    @field_validator("horizons")
    @classmethod
    def _positive_horizons(cls, v: List[int]) -> List[int]:
        if any(h < 1 for h in v):
            raise ValueError(f"horizons must be positive, got {v}")
        return sorted(set(v))

    @field_validator("interaction_pairs")
    @classmethod
    def _known_channels(cls, v: List[Tuple[str, str]]) -> List[Tuple[str, str]]:
        for a, b in v:
            if a not in CHANNELS or b not in CHANNELS:
                raise ValueError(f"Unknown channel in interaction pair ({a}, {b})")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "PipelineConfig":
        if self.bootstrap_reps < 1:
            raise ValueError("bootstrap_reps must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.levels < 1 or any(not 1 <= s <= self.levels for s in self.scales):
            raise ValueError(f"scales must be a subset of 1..{self.levels}, got {self.scales}")
        if self.reporting_scale not in self.scales:
            raise ValueError(f"reporting_scale {self.reporting_scale} not in scales {self.scales}")
        if self.reporting_quantile not in self.quantiles:
            raise ValueError(f"reporting_quantile {self.reporting_quantile} not in quantiles {self.quantiles}")
        if not 0.0 <= self.sargan_gate <= 1.0 or not 0.0 < self.sargan_level < 1.0:
            raise ValueError("sargan_gate must lie in [0, 1] and sargan_level in (0, 1)")
        if not self.schedule:
            raise ValueError("schedule must contain at least one sub-period")
        try:
            validate_schedule(self.schedule)
        except DomainError as e:
            raise ValueError(str(e))
        names = [p.name for p in self.schedule]
        if self.baseline_period is None:
            self.baseline_period = names[0]
        elif self.baseline_period not in names:
            raise ValueError(f"baseline_period '{self.baseline_period}' is not in the schedule")
        unknown = [p for p in self.periods or [] if p not in names]
        if unknown:
            raise ValueError(f"Unknown periods requested: {unknown}")
        return self

    @property
    def baseline(self) -> SubPeriod:
        return next(p for p in self.schedule if p.name == self.baseline_period)

    def selected_periods(self) -> List[SubPeriod]:
        if not self.periods:
            return list(self.schedule)
        return [p for p in self.schedule if p.name in self.periods]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        try:
            return cls(**data)
        except ValidationError as e:
            raise DomainError(f"Invalid pipeline configuration: {e}")

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "PipelineConfig":
        """Load a config; relative paths resolve against the file's directory."""
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ContagionError(f"Config file {path} not found")
        except json.JSONDecodeError as e:
            raise ParseError(f"Config file {path} is not valid JSON: {e}")

        for key in PATH_FIELDS:
            value = data.get(key)
            if value and not Path(value).is_absolute():
                data[key] = str(path.parent / value)
        return cls.from_dict(data)

    def with_overrides(self, **updates: Any) -> "PipelineConfig":
        """Copy with the given non-None fields replaced and re-validated."""
        changes = {k: v for k, v in updates.items() if v is not None}
        if not changes:
            return self
        data = self.model_dump()
        data.update(changes)
        return PipelineConfig.from_dict(data)

    def with_env_overrides(self) -> "PipelineConfig":
        updates: Dict[str, Any] = {}
        for var, (key, cast) in ENV_OVERRIDES.items():
            raw = os.getenv(var)
            if raw:
                try:
                    updates[key] = cast(raw)
                except ValueError:
                    raise DomainError(f"Environment variable {var}={raw!r} is not a valid {cast.__name__}")
                logger.debug(f"{var} overrides {key}")
        return self.with_overrides(**updates)
