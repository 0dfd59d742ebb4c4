"""
Identification through heteroskedasticity: a volatility-regime split and the
cross-regime covariance-difference estimator.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from ..configs.channel_configs import CHANNELS
from ..data.ingest import ReturnPanel
from ..errors import DomainError, InsufficientData, NoVarianceShift
from .results import StructuralEstimate
from .sample import LinkSample

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 22
MIN_REGIME_ROWS = 30
SHIFT_TOLERANCE = 1e-12
HIGH, LOW = "H", "L"


@dataclass(frozen=True)
class RegimeSplit:
    labels: pd.Series          # "H" / "L" per date
    median: float
    degenerate: bool = False

    @property
    def high(self) -> pd.Series:
        return self.labels == HIGH


def label_regimes(variance: pd.Series) -> RegimeSplit:
    """H strictly above the median of ``variance``, otherwise L."""
    filled = variance.bfill().ffill().fillna(0.0)
    median = float(filled.median())
    high = filled > median
    labels = pd.Series(np.where(high, HIGH, LOW), index=variance.index)
    degenerate = not high.any()
    if degenerate:
        logger.warning("Volatility regime split is degenerate: every date ties the median")
    return RegimeSplit(labels=labels, median=median, degenerate=degenerate)


def regime_partition(returns: ReturnPanel, window: int = DEFAULT_WINDOW) -> RegimeSplit:
    """Median split of the trailing rolling variance of the cross-market mean return."""
    if window < 2:
        raise DomainError(f"Regime window must be at least 2, got {window}")
    if len(returns) <= window:
        raise InsufficientData(f"Regime split needs more than {window} rows, got {len(returns)}")
    mean_return = returns.returns.mean(axis=1)
    variance = mean_return.rolling(window, min_periods=2).var()
    return label_regimes(variance)


def rigobon_slope(comovement: np.ndarray, channel: np.ndarray, high: np.ndarray) -> float:
    """(Cov_H(C, x) - Cov_L(C, x)) / (Var_H(x) - Var_L(x)) on within-regime demeaned series."""
    high = np.asarray(high, dtype=bool)
    cov_h = np.cov(comovement[high], channel[high])
    cov_l = np.cov(comovement[~high], channel[~high])
    var_shift = cov_h[1, 1] - cov_l[1, 1]
    if abs(var_shift) < SHIFT_TOLERANCE * cov_h[1, 1] or var_shift == 0.0:
        raise NoVarianceShift("Channel variance does not differ across regimes")
    return float((cov_h[0, 1] - cov_l[0, 1]) / var_shift)


def fit_rigobon(sample: LinkSample, regimes: RegimeSplit, strict: bool = False) -> StructuralEstimate:
    """Per-channel heteroskedasticity-identified coefficients.

    Channels without a variance shift get theta = 0 and are listed in
    ``flags["no_variance_shift"]``; ``strict=True`` raises instead.
    """
    labels = regimes.labels.reindex(sample.dates)
    if labels.isna().any():
        raise DomainError("Regime labels do not cover the link sample dates")
    high = (labels == HIGH).to_numpy()
    n_high, n_low = int(high.sum()), int((~high).sum())
    if min(n_high, n_low) < MIN_REGIME_ROWS:
        raise InsufficientData(
            f"Each regime needs {MIN_REGIME_ROWS} rows (H={n_high}, L={n_low})",
            {"period": sample.period},
        )

    theta = np.zeros(len(CHANNELS))
    no_shift: List[str] = []
    for c, name in enumerate(CHANNELS):
        try:
            theta[c] = rigobon_slope(sample.comovement, sample.channels[:, c], high)
        except NoVarianceShift as e:
            if strict:
                raise e.with_context(channel=name)
            no_shift.append(name)
    if no_shift:
        logger.debug(f"[{sample.period}] {sample.pair}: no variance shift for {', '.join(no_shift)}")

    return StructuralEstimate(
        method="RIGOBON",
        theta=theta,
        flags={"no_variance_shift": no_shift, "n_high": n_high, "n_low": n_low},
    )
