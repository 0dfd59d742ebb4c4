"""
Result containers shared by the Stage-2 estimators.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..configs.channel_configs import CHANNELS
from ..errors import DomainError

METHODS = ("IV2SLS", "LASSOIV", "LP1", "LP5", "LP22", "RIGOBON")


@dataclass
class StructuralEstimate:
    """Channel coefficients of one link under one identification method."""

    method: str
    theta: np.ndarray                              # 5 channel coefficients, CHANNELS order
    nuisance: Dict[str, float] = field(default_factory=dict)
    cov: Optional[np.ndarray] = None               # 5x5 or None
    dof: Optional[int] = None
    residuals: Optional[np.ndarray] = None
    flags: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (len(CHANNELS),):
            raise DomainError(f"theta must have {len(CHANNELS)} entries, got shape {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise DomainError(f"{self.method}: non-finite structural coefficients")

    @property
    def std_errors(self) -> Optional[np.ndarray]:
        if self.cov is None:
            return None
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def t_stats(self) -> Optional[np.ndarray]:
        se = self.std_errors
        if se is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, self.theta / se, np.where(self.theta == 0, 0.0, np.inf))
        return t


@dataclass
class DiagnosticsRecord:
    first_stage_F: np.ndarray                      # per channel
    sargan_stat: Optional[float] = None
    sargan_p: Optional[float] = None
    dwh_stat: Optional[float] = None
    dwh_p: Optional[float] = None
    robustness_value: Optional[np.ndarray] = None  # per channel, in [0, 1]
    n_instruments: int = 0
    flags: Dict[str, Any] = field(default_factory=dict)

    def sargan_rejects(self, level: float = 0.05) -> Optional[bool]:
        return None if self.sargan_p is None else bool(self.sargan_p < level)

    def dwh_rejects(self, level: float = 0.05) -> Optional[bool]:
        return None if self.dwh_p is None else bool(self.dwh_p < level)


@dataclass
class ShareTable:
    """Per-method share vectors and their dominant channel."""

    shares: Dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, method: str, vector: np.ndarray) -> None:
        self.shares[method] = np.asarray(vector, dtype=float)

    def dominant(self, method: str) -> str:
        return CHANNELS[int(np.argmax(self.shares[method]))]

    def dominants(self) -> Dict[str, str]:
        return {m: self.dominant(m) for m in self.shares}

    def methods(self) -> List[str]:
        return list(self.shares)
