import os
import sys
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import pytest

# Add parent directory to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from contagionforge.configs.channel_configs import CHANNELS  # noqa: E402
from contagionforge.data.ingest import ChannelPanel, ReturnPanel, SubPeriod  # noqa: E402
from contagionforge.stage1.detect import FlowTensor  # noqa: E402


def business_dates(n: int, start: str = "2010-01-04") -> pd.DatetimeIndex:
    return pd.bdate_range(start, periods=n, name="date")


def make_returns(values: np.ndarray, classes: Optional[Dict[str, str]] = None) -> ReturnPanel:
    values = np.asarray(values, dtype=float)
    ids = [f"M{i + 1}" for i in range(values.shape[1])]
    frame = pd.DataFrame(values, index=business_dates(values.shape[0]), columns=ids)
    return ReturnPanel(returns=frame, market_class=classes or {m: "advanced" for m in ids})


def make_channels(values: np.ndarray, dates: pd.DatetimeIndex, factor: Optional[np.ndarray] = None) -> ChannelPanel:
    frame = pd.DataFrame(np.asarray(values, dtype=float), index=dates, columns=CHANNELS)
    series = None if factor is None else pd.Series(factor, index=dates, name="global_factor")
    return ChannelPanel(channels=frame, global_factor=series)


def whole_period(dates: pd.DatetimeIndex, name: str = "All") -> SubPeriod:
    return SubPeriod(name=name, start=dates[0].date(), end=dates[-1].date())


def flow_tensor(values: List[List[float]], period: str = "P", ids: Optional[List[str]] = None) -> FlowTensor:
    values = np.asarray(values, dtype=float)
    ids = ids or [f"M{i + 1}" for i in range(values.shape[0])]
    return FlowTensor(period=period, scale=5, tau=0.5, market_ids=ids, values=values)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def ar_channels(rng: np.random.Generator, T: int, ar: float = 0.9) -> np.ndarray:
    """Five independent unit-variance AR(1) channels."""
    out = np.empty((T, len(CHANNELS)))
    out[0] = rng.standard_normal(len(CHANNELS))
    shocks = rng.standard_normal((T, len(CHANNELS))) * np.sqrt(1.0 - ar ** 2)
    for t in range(1, T):
        out[t] = ar * out[t - 1] + shocks[t]
    return out


def make_sample(
    channels: np.ndarray,
    comovement: np.ndarray,
    factor: Optional[np.ndarray] = None,
    instruments: Optional[np.ndarray] = None,
    trim: int = 15,
    period: str = "P",
):
    """LinkSample straight from arrays; instruments default to the lagged-channel set."""
    from contagionforge.stage2.sample import LinkSample, build_instruments, instrument_names

    channels = np.asarray(channels, dtype=float)
    comovement = np.asarray(comovement, dtype=float)
    T = len(comovement)
    if factor is None:
        factor = np.random.default_rng(T).standard_normal(T)
    if instruments is None:
        instruments = build_instruments(channels).to_numpy()
        names = instrument_names()
    else:
        instruments = np.asarray(instruments, dtype=float)
        names = [f"z{i}" for i in range(instruments.shape[1])]
    lag = np.concatenate([[0.0], comovement[:-1]])
    return LinkSample(
        period=period,
        pair=("A", "B"),
        dates=business_dates(T)[trim:],
        comovement=comovement[trim:],
        comovement_lag=lag[trim:],
        channels=channels[trim:],
        global_factor=np.asarray(factor, dtype=float)[trim:],
        instruments=instruments[trim:],
        instrument_names=names,
    )
