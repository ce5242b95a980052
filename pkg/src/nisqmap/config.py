"""Configuration models, logging setup and seeded random sub-streams.

Run options are pydantic models so that CLI flags, JSON plans and tests share
one validated definition. Environment settings come from ``.env``.
"""

import logging
import os
import zlib
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator
from rich.console import Console
from rich.logging import RichHandler

load_dotenv()

LOG_ENV_VAR = "NISQMAP_LOG"

DEFAULT_OMEGA = 0.4
DEFAULT_EPSILON = 0.15
DEFAULT_MAX_COLOC = 3
DEFAULT_WINDOW = 10
DEFAULT_EXTENDED_WEIGHT = 0.5


def configure_logging(level: Optional[str] = None) -> None:
    """Route package logs through rich on stderr.

    Args:
        level: explicit level name; falls back to ``NISQMAP_LOG`` then WARNING.
    """
    level = (level or os.getenv(LOG_ENV_VAR) or "WARNING").upper()
    root = logging.getLogger("nisqmap")
    root.handlers.clear()
    root.addHandler(RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True))
    root.setLevel(level)
    root.propagate = False


def substream(seed: int, name: str) -> np.random.Generator:
    """Named random stream derived from the single run seed."""
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


class CalibrationRanges(BaseModel):
    """Uniform sampling ranges for synthetic calibration data."""

    readout: Tuple[float, float] = (0.01, 0.05)
    sq: Tuple[float, float] = (0.0005, 0.002)
    cx: Tuple[float, float] = (0.005, 0.02)
    crosstalk_ratio: Tuple[float, float] = (1.0, 4.0)
    crosstalk_fraction: float = Field(default=0.3, ge=0.0, le=1.0)

    @field_validator("readout", "sq", "cx")
    @classmethod
    def _error_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = value
        if not (0.0 <= lo <= hi < 1.0):
            raise ValueError(f"error range {value} must satisfy 0 <= lo <= hi < 1")
        return value

    @field_validator("crosstalk_ratio")
    @classmethod
    def _ratio_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = value
        if not (0.0 <= lo <= hi):
            raise ValueError(f"ratio range {value} must satisfy 0 <= lo <= hi")
        return value


class RouteOptions(BaseModel):
    """Knobs of the mapping-transition search."""

    xswap_enabled: bool = True
    extended_weight: float = Field(default=DEFAULT_EXTENDED_WEIGHT, ge=0.0)
    crosstalk_aggregation: Literal["max", "product"] = "max"
    release_valve: bool = True
    release_after: Optional[int] = Field(default=None, ge=1)


class SchedulerConfig(BaseModel):
    """Admission parameters of the multi-programming scheduler."""

    epsilon: float = Field(default=DEFAULT_EPSILON, ge=0.0, lt=1.0)
    max_coloc: int = Field(default=DEFAULT_MAX_COLOC, ge=1)
    window: int = Field(default=DEFAULT_WINDOW, ge=1)
    omega: float = Field(default=DEFAULT_OMEGA, ge=0.0)


class RunConfig(BaseModel):
    """Everything one ``map`` or ``schedule`` invocation needs."""

    device: Path
    circuits: List[Path] = Field(default_factory=list)
    queue: Optional[Path] = None
    omega: float = Field(default=DEFAULT_OMEGA, ge=0.0)
    epsilon: float = Field(default=DEFAULT_EPSILON, ge=0.0, lt=1.0)
    max_coloc: int = Field(default=DEFAULT_MAX_COLOC, ge=1)
    window: int = Field(default=DEFAULT_WINDOW, ge=1)
    xswap: bool = True
    mode: Literal["single", "multi"] = "multi"
    layout: Literal["cdap", "random"] = "cdap"
    seed: int = 0
    out: Path = Path("out")
    jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _has_work(self) -> "RunConfig":
        if not self.circuits and self.queue is None:
            raise ValueError("at least one circuit or a queue file is required")
        return self

    @property
    def route_options(self) -> RouteOptions:
        return RouteOptions(xswap_enabled=self.xswap)

    @property
    def scheduler(self) -> SchedulerConfig:
        return SchedulerConfig(epsilon=self.epsilon, max_coloc=self.max_coloc, window=self.window, omega=self.omega)
