"""
Per-link Stage-2 samples: pairwise co-movement, exogenous controls and the
lagged-channel instrument matrix.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..configs.channel_configs import CHANNELS, DEFAULT_INTERACTIONS, INSTRUMENT_LAGS, INTERACTION_LAG
from ..data.ingest import ChannelPanel, SubPeriod
from ..errors import DomainError, InsufficientData

logger = logging.getLogger(__name__)

MIN_LINK_ROWS = 60

Interaction = Tuple[str, str]


def instrument_names(interactions: Sequence[Interaction] = DEFAULT_INTERACTIONS) -> List[str]:
    names = [f"{c}_L{lag}" for c in CHANNELS for lag in INSTRUMENT_LAGS]
    names += [f"{a}x{b}_L{INTERACTION_LAG}" for a, b in interactions]
    return names


def build_instruments(
    channels: Union[pd.DataFrame, np.ndarray],
    interactions: Sequence[Interaction] = DEFAULT_INTERACTIONS,
) -> pd.DataFrame:
    """Lagged channels (5, 10, 15 days) plus lag-5 cross-channel products.

    Leading rows without a full lag history are NaN; the caller trims them.
    """
    frame = pd.DataFrame(np.asarray(channels, dtype=float), columns=CHANNELS) if isinstance(channels, np.ndarray) else channels[CHANNELS]
    max_lag = max(INSTRUMENT_LAGS + (INTERACTION_LAG,))
    if len(frame) <= max_lag:
        raise InsufficientData(f"Instruments need more than {max_lag} rows, got {len(frame)}")
    for a, b in interactions:
        if a not in CHANNELS or b not in CHANNELS:
            raise DomainError(f"Unknown channel in interaction pair ({a}, {b})")

    columns = {}
    for c in CHANNELS:
        for lag in INSTRUMENT_LAGS:
            columns[f"{c}_L{lag}"] = frame[c].shift(lag)
    for a, b in interactions:
        columns[f"{a}x{b}_L{INTERACTION_LAG}"] = (frame[a] * frame[b]).shift(INTERACTION_LAG)
    return pd.DataFrame(columns, index=frame.index)


@dataclass
class LinkSample:
    """Everything one link regression needs, row-aligned after lag trimming."""

    period: str
    pair: Tuple[str, str]
    dates: pd.DatetimeIndex
    comovement: np.ndarray
    comovement_lag: np.ndarray
    channels: np.ndarray                 # (T, 5)
    global_factor: np.ndarray
    instruments: np.ndarray              # (T, k)
    instrument_names: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.comovement)

    @property
    def controls(self) -> np.ndarray:
        """Exogenous regressors present in both stages: intercept, f_t, C_{t-1}."""
        return np.column_stack([np.ones(len(self)), self.global_factor, self.comovement_lag])

    def with_comovement(self, comovement: np.ndarray, comovement_lag: Optional[np.ndarray] = None) -> "LinkSample":
        lag = self.comovement_lag if comovement_lag is None else np.asarray(comovement_lag, dtype=float)
        return LinkSample(
            period=self.period,
            pair=self.pair,
            dates=self.dates,
            comovement=np.asarray(comovement, dtype=float),
            comovement_lag=lag,
            channels=self.channels,
            global_factor=self.global_factor,
            instruments=self.instruments,
            instrument_names=list(self.instrument_names),
        )


def build_link_sample(
    returns_i: pd.Series,
    returns_j: pd.Series,
    channels: ChannelPanel,
    period: SubPeriod,
    interactions: Sequence[Interaction] = DEFAULT_INTERACTIONS,
    min_rows: int = MIN_LINK_ROWS,
) -> LinkSample:
    """Co-movement ``C = r_i * r_j`` with controls and instruments inside one sub-period.

    Lags are taken within the sub-period, so the first 15 rows are dropped.
    ``C_{t-1}`` is available for every kept row.
    """
    if not returns_i.index.equals(returns_j.index):
        raise DomainError("Return series are not aligned on the same calendar")
    if channels.global_factor is None:
        raise DomainError("Channel panel has no global factor attached")

    in_period = returns_i.index[period.contains(returns_i.index)]
    ri = returns_i.reindex(in_period).to_numpy(dtype=float)
    rj = returns_j.reindex(in_period).to_numpy(dtype=float)
    panel = channels.slice(in_period)
    if panel.channels.isna().any().any() or panel.global_factor.isna().any():
        raise DomainError("Channel panel does not cover the sub-period calendar", {"period": period.name})

    comovement = ri * rj
    comovement_lag = np.concatenate([[np.nan], comovement[:-1]])
    instruments = build_instruments(panel.channels, interactions) if len(in_period) > max(INSTRUMENT_LAGS) else None
    trim = max(INSTRUMENT_LAGS + (INTERACTION_LAG, 1))
    kept = len(in_period) - trim
    if instruments is None or kept < min_rows:
        raise InsufficientData(
            f"Link sample has {max(kept, 0)} rows after lag trimming, need {min_rows}",
            {"period": period.name, "pair": f"{returns_i.name}->{returns_j.name}"},
        )

    return LinkSample(
        period=period.name,
        pair=(str(returns_i.name), str(returns_j.name)),
        dates=in_period[trim:],
        comovement=comovement[trim:],
        comovement_lag=comovement_lag[trim:],
        channels=panel.channels.to_numpy(dtype=float)[trim:],
        global_factor=panel.global_factor.to_numpy(dtype=float)[trim:],
        instruments=instruments.to_numpy(dtype=float)[trim:],
        instrument_names=list(instruments.columns),
    )
