"""
Synthetic markets with known ground truth.

Channels follow independent AR(1) processes and are standardized over the
full window. Behavioural is then made orthogonal to Financial inside each
sub-period of the equal schedule, so ingesting the written raw table gives
back exactly these channels. Each channel c drives a shock g_c whose
conditional variance is linear in the channel level,
``Var(g_c | z_c) = 1 + beta * z_c``, and returns load on those shocks plus
idiosyncratic noise:

    r_i = scale * (sum_c L[i, c] * g_c + noise_sd * e_i)

so the comovement ``r_i * r_j`` has conditional mean linear in the channels
with slope ``beta * L[i, c] * L[j, c]`` on channel c. Default loadings are
``sqrt(w_c / sum(w))``, which makes every pair's slopes proportional to the
comovement weights. Directed couplings add a lagged moving average of the
source market to the target, giving Stage 1 known edges.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import lfilter

from ..configs.channel_configs import CHANNELS
from ..errors import DomainError
from .ingest import (
    ChannelPanel,
    ReturnPanel,
    SubPeriod,
    period_labels,
    residualize_within,
    standardize,
    with_global_factor,
)

logger = logging.getLogger(__name__)

RETURN_SCALE = 0.01
VARIANCE_FLOOR = 1e-3
DEFAULT_WEIGHTS = [0.1, 0.8, 0.05, 0.025, 0.025]
MIN_PAIR_LENGTH = 500


class SynthConfig(BaseModel):
    """Generator settings. Every output is a pure function of these fields."""

    model_config = ConfigDict(extra="forbid")

    n_markets: int = 6
    T: int = 3000
    seed: int = 0
    start_date: str = "2010-01-04"
    channel_ar: List[float] = Field(default_factory=lambda: [0.95] * len(CHANNELS))
    loadings: Optional[List[List[float]]] = None
    comovement_weights: List[float] = Field(default_factory=lambda: list(DEFAULT_WEIGHTS))
    variance_loading: float = 0.4
    n_periods: int = 4
    # (source, target, strength, scale); the source's mean over the previous 2**(scale-1) days feeds the target.
    # Defaults to chaining markets pairwise: 0->1, 2->3, ...
    coupling: Optional[List[Tuple[int, int, float, int]]] = None
    noise_sd: float = 0.5
    noise: Literal["gaussian", "student_t"] = "gaussian"
    t_df: float = 5.0
    # Channel innovation variance doubles in the second half of the sample.
    two_regime: bool = False
    n_advanced: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        if len(self.channel_ar) != len(CHANNELS):
            raise DomainError(f"channel_ar needs {len(CHANNELS)} coefficients, got {len(self.channel_ar)}")
        bad = [phi for phi in self.channel_ar if not -1.0 < phi < 1.0]
        if bad:
            raise DomainError(f"AR coefficients must lie in (-1, 1), got {bad}")
        w = np.asarray(self.comovement_weights, dtype=float)
        if w.shape != (len(CHANNELS),) or np.any(w < 0) or not w.sum() > 0:
            raise DomainError(f"comovement_weights must be {len(CHANNELS)} nonnegative values, not all zero")
        if self.loadings is not None and np.asarray(self.loadings, dtype=float).shape != (self.n_markets, len(CHANNELS)):
            raise DomainError(f"loadings must be a {self.n_markets}x{len(CHANNELS)} matrix")
        if self.n_markets < 2 or self.T < 50:
            raise DomainError("Need at least 2 markets and 50 dates")
        if not 1 <= self.n_periods <= self.T // 10:
            raise DomainError(f"n_periods must lie in [1, {self.T // 10}], got {self.n_periods}")
        if self.coupling is None:
            self.coupling = [(i, i + 1, 0.6, 5) for i in range(0, self.n_markets - 1, 2)]
        for src, dst, _, scale in self.coupling:
            if not (0 <= src < self.n_markets and 0 <= dst < self.n_markets):
                raise DomainError(f"Coupling {src}->{dst} is out of range for {self.n_markets} markets")
            if src == dst:
                raise DomainError(f"Coupling {src}->{dst} must join two distinct markets")
            if scale < 1:
                raise DomainError(f"Coupling scale must be positive, got {scale}")
        if self.noise == "student_t" and not self.t_df > 2:
            raise DomainError("Student-t noise needs t_df > 2 for a finite variance")
        if self.noise_sd < 0 or self.variance_loading < 0:
            raise DomainError("noise_sd and variance_loading must be nonnegative")
        return self

    @property
    def market_ids(self) -> List[str]:
        return [f"M{i + 1:02d}" for i in range(self.n_markets)]

    def loading_matrix(self) -> np.ndarray:
        if self.loadings is not None:
            return np.asarray(self.loadings, dtype=float)
        w = np.asarray(self.comovement_weights, dtype=float)
        return np.tile(np.sqrt(w / w.sum()), (self.n_markets, 1))

    def market_classes(self) -> Dict[str, str]:
        n_adv = self.n_markets // 2 if self.n_advanced is None else self.n_advanced
        return {m: "advanced" if i < n_adv else "emerging" for i, m in enumerate(self.market_ids)}


@dataclass
class SynthTruth:
    """Population slopes of every ordered pair's comovement on the channels."""

    theta: Dict[str, np.ndarray]
    dominant_channel: Optional[str]
    edges: List[Tuple[str, str, float, int]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dominant_channel": self.dominant_channel,
            "theta": {pair: [float(v) for v in values] for pair, values in self.theta.items()},
            "edges": [{"source": s, "target": t, "strength": b, "scale": k} for s, t, b, k in self.edges],
        }


def _noise(config: SynthConfig, rng: np.random.Generator, size: Tuple[int, ...]) -> np.ndarray:
    if config.noise == "gaussian":
        return rng.standard_normal(size)
    df = config.t_df
    return rng.standard_t(df, size) * np.sqrt((df - 2.0) / df)


def simulate_channels(config: SynthConfig, rng: np.random.Generator, dates: pd.DatetimeIndex) -> pd.DataFrame:
    """Standardized AR(1) channels in CHANNELS order."""
    T = len(dates)
    columns = {}
    for c, phi in enumerate(config.channel_ar):
        innovations = rng.standard_normal(T) * np.sqrt(1.0 - phi**2)
        if config.two_regime:
            innovations[T // 2:] *= np.sqrt(2.0)
        innovations[0] = rng.standard_normal()
        path = lfilter([1.0], [1.0, -phi], innovations)
        columns[CHANNELS[c]] = standardize(pd.Series(path, index=dates), name=CHANNELS[c])
    labels = period_labels(dates, equal_schedule(dates, config.n_periods))
    resid = residualize_within(columns["Behavioural"], columns["Financial"], labels)
    columns["Behavioural"] = (resid / resid.std(ddof=1)).rename("Behavioural")
    return pd.DataFrame(columns, index=dates)[CHANNELS]


def population_theta(config: SynthConfig) -> Dict[str, np.ndarray]:
    L = config.loading_matrix()
    ids = config.market_ids
    return {
        f"{ids[i]}->{ids[j]}": config.variance_loading * L[i] * L[j]
        for i in range(config.n_markets)
        for j in range(config.n_markets)
        if i != j
    }


def _couple(base: np.ndarray, coupling: List[Tuple[int, int, float, int]]) -> np.ndarray:
    """Add lagged moving averages of source markets, processed date by date."""
    if not coupling:
        return base
    r = base.copy()
    T = r.shape[0]
    for t in range(1, T):
        for src, dst, strength, scale in coupling:
            window = 2 ** (scale - 1)
            lo = max(0, t - window)
            r[t, dst] += strength * r[lo:t, src].mean()
    return r


def gen_channel_dgp(config: SynthConfig) -> Tuple[ReturnPanel, ChannelPanel, SynthTruth]:
    """Simulate a return panel and channel panel with known comovement slopes."""
    rng = np.random.default_rng(config.seed)
    dates = pd.bdate_range(config.start_date, periods=config.T, name="date")
    channels = simulate_channels(config, rng, dates)

    z = channels.to_numpy()
    variance = np.maximum(1.0 + config.variance_loading * z, VARIANCE_FLOOR)
    floored = float(np.mean(1.0 + config.variance_loading * z < VARIANCE_FLOOR))
    if floored > 0.01:
        logger.warning(f"Variance floor binds on {floored:.1%} of channel-dates; slopes deviate from the nominal truth")
    shocks = rng.standard_normal(z.shape) * np.sqrt(variance)

    L = config.loading_matrix()
    idio = config.noise_sd * _noise(config, rng, (config.T, config.n_markets))
    base = shocks @ L.T + idio
    returns = RETURN_SCALE * _couple(base, config.coupling)

    ids = config.market_ids
    panel = ReturnPanel(returns=pd.DataFrame(returns, index=dates, columns=ids), market_class=config.market_classes())
    channel_panel = with_global_factor(ChannelPanel(channels=channels), panel)

    theta = population_theta(config)
    w = np.asarray(config.comovement_weights, dtype=float)
    dominant = CHANNELS[int(np.argmax(w))] if np.any(L != 0) and config.variance_loading > 0 else None
    edges = [(ids[s], ids[d], float(b), int(k)) for s, d, b, k in config.coupling]
    logger.debug(f"Generated {config.n_markets} markets x {config.T} dates (seed {config.seed})")
    return panel, channel_panel, SynthTruth(theta=theta, dominant_channel=dominant, edges=edges)


def gen_directional_pair(
    b: float, T: int, seed: int, ar: float = 0.5, noise_sd: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """x is AR(1); y[t+1] = b * x[t] + noise, so information flows x -> y."""
    if T < MIN_PAIR_LENGTH:
        raise DomainError(f"Directional pair needs T >= {MIN_PAIR_LENGTH}, got {T}")
    if not -1.0 < ar < 1.0:
        raise DomainError(f"AR coefficient must lie in (-1, 1), got {ar}")
    rng = np.random.default_rng(seed)
    innovations = rng.standard_normal(T)
    innovations[0] /= np.sqrt(1.0 - ar**2)
    x = lfilter([1.0], [1.0, -ar], innovations)
    y = noise_sd * rng.standard_normal(T)
    y[1:] += b * x[:-1]
    return x, y


def equal_schedule(dates: pd.DatetimeIndex, n_periods: int) -> List[SubPeriod]:
    """Split the dates into consecutive, equally sized sub-periods P1..Pn."""
    if n_periods < 1 or len(dates) < n_periods:
        raise DomainError(f"Cannot split {len(dates)} dates into {n_periods} sub-periods")
    chunks = np.array_split(np.arange(len(dates)), n_periods)
    return [
        SubPeriod(name=f"P{k + 1}", start=dates[idx[0]].date(), end=dates[idx[-1]].date())
        for k, idx in enumerate(chunks)
    ]


def raw_channel_table(channels: pd.DataFrame, prior_date: pd.Timestamp) -> pd.DataFrame:
    """Raw source columns whose composites reproduce ``channels``.

    A leading row dated ``prior_date`` anchors the differenced series.
    """
    z = channels
    first = z.iloc[[0]].set_axis(pd.DatetimeIndex([prior_date], name="date"))
    lead = pd.concat([first, z])

    trade_steps = np.concatenate([[0.0], 0.003 * z["Trade"].to_numpy()])
    ffr_steps = np.concatenate([[0.0], 0.05 * z["Monetary"].to_numpy()])
    table = pd.DataFrame(
        {
            "VIX": 20.0 + 5.0 * lead["Financial"],
            "HYOAS": 4.0 + lead["Financial"],
            "STLFSI": lead["Financial"],
            "DTWEXBGS": 100.0 * np.exp(np.cumsum(trade_steps)),
            "GPR": 100.0 + 30.0 * lead["Geopolitical"],
            "GEOEVENT": 50.0 + 10.0 * lead["Geopolitical"],
            "UMCSENT": 80.0 + 10.0 * lead["Behavioural"],
            "FFR": 2.0 + np.cumsum(ffr_steps),
            "T10Y3M": 1.0 + 0.5 * lead["Monetary"],
            "QE": 0.5 + 0.2 * lead["Monetary"],
        },
        index=lead.index,
    )
    return table


def write_fixture(config: SynthConfig, out_dir: str) -> Dict[str, str]:
    """Write prices.csv, channels.csv, classes.csv, config.json and truth.json."""
    panel, channel_panel, truth = gen_channel_dgp(config)
    os.makedirs(out_dir, exist_ok=True)
    dates = panel.dates
    prior = dates[0] - pd.offsets.BDay(1)

    logp = np.vstack([np.zeros((1, panel.n_markets)), np.cumsum(panel.returns.to_numpy(), axis=0)])
    prices = pd.DataFrame(100.0 * np.exp(logp), index=dates.insert(0, prior), columns=panel.market_ids)
    prices.index.name = "date"
    raw = raw_channel_table(channel_panel.channels, prior)

    paths = {name: os.path.join(out_dir, name) for name in ("prices.csv", "channels.csv", "classes.csv", "config.json", "truth.json")}
    prices.to_csv(paths["prices.csv"], date_format="%Y-%m-%d", float_format="%.10g", lineterminator="\n")
    raw.to_csv(paths["channels.csv"], date_format="%Y-%m-%d", float_format="%.10g", lineterminator="\n")
    classes = pd.DataFrame(list(panel.market_class.items()), columns=["market_id", "class"])
    classes.to_csv(paths["classes.csv"], index=False, lineterminator="\n")

    schedule = equal_schedule(dates, config.n_periods)
    pipeline = {
        "prices_path": "prices.csv",
        "channels_path": "channels.csv",
        "classes_path": "classes.csv",
        "output_dir": "output",
        "schedule": [p.model_dump(mode="json") for p in schedule],
        "seed": config.seed,
    }
    with open(paths["config.json"], "w", encoding="utf-8", newline="\n") as f:
        json.dump(pipeline, f, indent=2)
        f.write("\n")
    with open(paths["truth.json"], "w", encoding="utf-8", newline="\n") as f:
        json.dump({"synth": config.model_dump(mode="json"), **truth.to_dict()}, f, indent=2, sort_keys=True)
        f.write("\n")

    logger.info(f"Wrote synthetic fixture ({config.n_markets} markets, {config.T} dates, {config.n_periods} periods) to {out_dir}")
    return paths
