"""
Data ingestion: price and channel CSVs, calendar alignment, log-returns,
sub-period partitioning and the five channel composites.
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import IO, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from ..configs.channel_configs import CHANNELS, OPTIONAL_COLUMNS, RAW_COLUMNS, get_channel_config
from ..errors import DegenerateSeries, DomainError, InsufficientData, ParseError, SchemaError

logger = logging.getLogger(__name__)

CsvSource = Union[str, Path, IO[bytes], IO[str]]

MARKET_CLASSES = ("advanced", "emerging")
MAX_FILL_GAP = 5
MIN_MARKETS = 2
MIN_ROWS = 30


class SubPeriod(BaseModel):
    """Inclusive date window ``start <= date <= end``."""

    model_config = ConfigDict(frozen=True)

    name: str
    start: date
    end: date

    @model_validator(mode="after")
    def _check_order(self) -> "SubPeriod":
        if not self.start < self.end:
            raise ValueError(f"Sub-period '{self.name}': start {self.start} must precede end {self.end}")
        return self

    def contains(self, dates: pd.DatetimeIndex) -> np.ndarray:
        return (dates >= pd.Timestamp(self.start)) & (dates <= pd.Timestamp(self.end))


@dataclass(frozen=True)
class PricePanel:
    """Date-aligned closing prices, one column per market."""

    prices: pd.DataFrame
    market_class: Dict[str, str]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.prices.index

    @property
    def market_ids(self) -> List[str]:
        return list(self.prices.columns)


@dataclass(frozen=True)
class ReturnPanel:
    """T x N log-returns indexed by date."""

    returns: pd.DataFrame
    market_class: Dict[str, str]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.returns.index

    @property
    def market_ids(self) -> List[str]:
        return list(self.returns.columns)

    @property
    def n_markets(self) -> int:
        return self.returns.shape[1]

    def __len__(self) -> int:
        return self.returns.shape[0]


@dataclass(frozen=True)
class ChannelPanel:
    """Standardized channel composites in the fixed CHANNELS order."""

    channels: pd.DataFrame
    global_factor: Optional[pd.Series] = field(default=None)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.channels.index

    def slice(self, dates: pd.DatetimeIndex) -> "ChannelPanel":
        factor = None if self.global_factor is None else self.global_factor.reindex(dates)
        return ChannelPanel(channels=self.channels.reindex(dates), global_factor=factor)


def validate_schedule(schedule: Sequence[SubPeriod]) -> None:
    """Raise DomainError if any two sub-periods overlap or share a name."""
    names = [p.name for p in schedule]
    if len(set(names)) != len(names):
        raise DomainError(f"Duplicate sub-period names in schedule: {names}")
    ordered = sorted(schedule, key=lambda p: p.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start <= prev.end:
            raise DomainError(f"Sub-periods '{prev.name}' and '{cur.name}' overlap")


def _read_dated_csv(source: CsvSource, what: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"Could not parse {what} CSV: {e}")

    if frame.shape[1] == 0 or frame.columns[0].strip().lower() != "date":
        raise ParseError(f"{what} CSV must start with a 'date' column")
    frame = frame.rename(columns=lambda c: c.strip())
    frame = frame.rename(columns={frame.columns[0]: "date"})

    try:
        index = pd.to_datetime(frame["date"].str.strip(), format="ISO8601")
    except (ValueError, TypeError) as e:
        raise ParseError(f"Malformed date in {what} CSV: {e}")

    values = frame.drop(columns="date").replace({"": np.nan, "NA": np.nan, "NaN": np.nan, "nan": np.nan})
    try:
        values = values.apply(pd.to_numeric, errors="raise")
    except (ValueError, TypeError) as e:
        raise ParseError(f"Non-numeric value in {what} CSV: {e}")

    values.index = pd.DatetimeIndex(index, name="date")
    values = values.sort_index(kind="mergesort")
    if values.index.has_duplicates:
        dup = values.index[values.index.duplicated()][0]
        raise ParseError(f"Duplicate date {dup.date()} in {what} CSV")
    return values.astype(float)


def fill_short_gaps(frame: pd.DataFrame, max_gap: int = MAX_FILL_GAP) -> pd.DataFrame:
    """Forward-fill runs of at most ``max_gap`` missing rows per column.

    Longer runs and leading gaps stay missing; callers drop those rows.
    """
    filled = frame.copy()
    for column in frame.columns:
        series = frame[column]
        missing = series.isna()
        if not missing.any():
            continue
        run_id = (missing != missing.shift()).cumsum()
        run_len = missing.groupby(run_id).transform("sum")
        fillable = missing & (run_len <= max_gap)
        filled.loc[fillable, column] = series.ffill()[fillable]
    return filled


def load_market_classes(source: CsvSource) -> Dict[str, str]:
    """Read the ``market_id,class`` sidecar."""
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"Could not parse market-class CSV: {e}")
    if list(frame.columns[:2]) != ["market_id", "class"]:
        raise SchemaError("Market-class CSV must have header 'market_id,class'")

    classes = {}
    for market, cls in zip(frame["market_id"].str.strip(), frame["class"].str.strip().str.lower()):
        if cls not in MARKET_CLASSES:
            raise DomainError(f"Market '{market}' has class '{cls}', expected one of {MARKET_CLASSES}")
        classes[market] = cls
    return classes


def load_price_csv(
    source: CsvSource,
    market_class: Optional[Dict[str, str]] = None,
    min_rows: int = MIN_ROWS,
    max_gap: int = MAX_FILL_GAP,
) -> PricePanel:
    """Load daily closing prices.

    Rows are sorted by date, short per-market gaps are forward-filled and any
    date still missing a price is dropped.
    """
    prices = _read_dated_csv(source, "price")

    observed = prices.to_numpy()
    if np.any(observed[~np.isnan(observed)] <= 0):
        raise DomainError("Prices must be strictly positive")

    if prices.shape[1] < MIN_MARKETS:
        raise InsufficientData(f"Need at least {MIN_MARKETS} markets, got {prices.shape[1]}")

    aligned = fill_short_gaps(prices, max_gap=max_gap)
    before = len(aligned)
    aligned = aligned.dropna(how="any")
    if len(aligned) < before:
        logger.info(f"Dropped {before - len(aligned)} date rows with unfillable gaps")
    if len(aligned) < min_rows:
        raise InsufficientData(f"Need at least {min_rows} aligned price rows, got {len(aligned)}")

    if market_class is None:
        logger.warning("No market-class sidecar supplied; labelling every market 'advanced'")
        classes = {m: "advanced" for m in aligned.columns}
    else:
        missing = [m for m in aligned.columns if m not in market_class]
        if missing:
            raise SchemaError(f"Market-class sidecar missing markets: {missing}")
        classes = {m: market_class[m] for m in aligned.columns}

    return PricePanel(prices=aligned, market_class=classes)


def compute_log_returns(panel: PricePanel) -> ReturnPanel:
    """Log-differences; each return is dated at the later price date."""
    logp = np.log(panel.prices.to_numpy())
    returns = pd.DataFrame(
        np.diff(logp, axis=0),
        index=panel.prices.index[1:],
        columns=panel.prices.columns,
    )
    return ReturnPanel(returns=returns, market_class=dict(panel.market_class))


def partition_subperiods(panel: ReturnPanel, schedule: Sequence[SubPeriod]) -> Dict[str, ReturnPanel]:
    """Slice the panel into inclusive sub-period windows; rows outside are dropped."""
    validate_schedule(schedule)
    slices: Dict[str, ReturnPanel] = {}
    for period in schedule:
        mask = period.contains(panel.dates)
        if not mask.any():
            raise InsufficientData(f"Sub-period '{period.name}' contains no return rows", {"period": period.name})
        slices[period.name] = ReturnPanel(returns=panel.returns.loc[mask], market_class=dict(panel.market_class))
    return slices


def global_factor(panel: ReturnPanel) -> pd.Series:
    """Cross-sectional mean return at each date."""
    return panel.returns.mean(axis=1).rename("global_factor")


def load_channel_csv(source: CsvSource) -> pd.DataFrame:
    """Read the raw channel source table (``date,VIX,HYOAS,...``)."""
    return _read_dated_csv(source, "channel")


def align_to_calendar(raw: pd.DataFrame, dates: pd.DatetimeIndex) -> pd.DataFrame:
    """Forward-fill (possibly lower-frequency) raw series onto ``dates``.

    The last raw observation strictly before ``dates[0]`` is kept as an extra
    leading row so first differences are defined on the first calendar date.
    """
    union = raw.index.union(dates)
    filled = raw.reindex(union).ffill()
    prior = raw.index[raw.index < dates[0]]
    target = dates if len(prior) == 0 else dates.insert(0, prior[-1])
    return filled.reindex(target)


def standardize(series: pd.Series, name: Optional[str] = None) -> pd.Series:
    """Full-window z-score (sample sd); constant input raises DegenerateSeries."""
    values = series.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"Series '{name or series.name}' has missing or non-finite values after alignment")
    mean = values.mean()
    sd = values.std(ddof=1)
    if not sd > 1e-12 * max(1.0, abs(mean)):
        raise DegenerateSeries(f"Series '{name or series.name}' is constant over the construction window")
    return pd.Series((values - mean) / sd, index=series.index, name=name or series.name)


def _composite(components: Iterable[pd.Series], name: str) -> pd.Series:
    zs = [standardize(c) for c in components]
    mean = pd.concat(zs, axis=1).mean(axis=1)
    return standardize(mean, name=name)


def residualize_within(y: pd.Series, x: pd.Series, groups: pd.Series) -> pd.Series:
    """OLS residuals of y on (1, x) computed separately inside each group."""
    resid = pd.Series(np.nan, index=y.index)
    for _, idx in y.groupby(groups).groups.items():
        yy = y.loc[idx].to_numpy()
        design = np.column_stack([np.ones(len(idx)), x.loc[idx].to_numpy()])
        beta, *_ = np.linalg.lstsq(design, yy, rcond=None)
        resid.loc[idx] = yy - design @ beta
    return resid


def period_labels(dates: pd.DatetimeIndex, schedule: Sequence[SubPeriod], outside: str = "__unscheduled__") -> pd.Series:
    """Label each date with its sub-period name (or ``outside``)."""
    labels = pd.Series(outside, index=dates, dtype=object)
    for period in schedule:
        labels[period.contains(dates)] = period.name
    return labels


def build_channels(
    raw: pd.DataFrame,
    schedule: Sequence[SubPeriod],
    dates: Optional[pd.DatetimeIndex] = None,
) -> ChannelPanel:
    """Construct the five standardized channel composites.

    ``raw`` must carry every column of RAW_COLUMNS. When ``dates`` is given the
    raw table is first forward-filled onto that calendar; otherwise it is
    taken to be aligned already.
    """
    missing = [c for c in RAW_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"Channel table missing columns: {', '.join(missing)}")

    if dates is None:
        table = raw.sort_index()
        dates = table.index
    else:
        table = align_to_calendar(raw, dates)

    def diffed(column: str, log: bool = False) -> pd.Series:
        values = table[column]
        if log:
            if (values <= 0).any():
                raise DomainError(f"Column '{column}' must be positive to take logs")
            values = np.log(values)
        out = values.diff()
        if out.index[0] == dates[0]:
            out.iloc[0] = 0.0
        return out.reindex(dates).rename(column)

    level = table.reindex(dates)

    financial = _composite([level[c] for c in get_channel_config("Financial")["sources"]], "Financial")
    trade = standardize(diffed("DTWEXBGS", log=True), name="Trade")

    geo_sources = [level[c] for c in get_channel_config("Geopolitical")["sources"]]
    for column, channel in OPTIONAL_COLUMNS.items():
        if channel == "Geopolitical" and column in level.columns:
            logger.info(f"Including optional column {column} in the Geopolitical composite")
            geo_sources.append(level[column])
    geopolitical = _composite(geo_sources, "Geopolitical")

    monetary = _composite([diffed("FFR"), level["T10Y3M"], level["QE"]], "Monetary")

    sentiment = standardize(level["UMCSENT"])
    resid = residualize_within(sentiment, financial, period_labels(dates, schedule))
    sd = resid.std(ddof=1)
    if not sd > 1e-12:
        raise DegenerateSeries("Behavioural residual is identically zero (sentiment collinear with Financial)")
    behavioural = (resid / sd).rename("Behavioural")

    frame = pd.concat([trade, financial, geopolitical, behavioural, monetary], axis=1)[CHANNELS]
    return ChannelPanel(channels=frame)


def with_global_factor(channels: ChannelPanel, panel: ReturnPanel) -> ChannelPanel:
    """Attach the cross-sectional mean return as the global factor."""
    factor = global_factor(panel).reindex(channels.dates)
    return replace(channels, global_factor=factor)
