"""
Period report containers and the CSV tables emitted from them.

Every table has a fixed header. Missing statistics are empty cells, floats
are written with ten significant digits and density with two decimals, so
identical results give identical bytes.
"""

import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..configs.channel_configs import CHANNELS
from ..configs.estimator_configs import EstimatorConfig, get_all_estimators
from ..data.ingest import ChannelPanel, ReturnPanel
from ..errors import ParseError, SchemaError
from ..network.communities import CommunityPartition
from ..stage1.detect import ContagionNetwork, DetectionSummary
from ..stage1.wavelet import WaveletDecomposition
from ..stage2.shares import BootstrapInterval
from ..utils.output_manager import OutputManager
from .identification import VOTING_METHODS, IdentificationStatus

logger = logging.getLogger(__name__)

STAGE1_HEADER = ["period", "mean_wqte", "max_wqte", "density_pct", "n_edges", "top_transmitter", "top_receiver", "threshold"]
CELLS_HEADER = ["period", "scale", "tau", "threshold", "mean_wqte", "max_wqte", "density_pct", "n_edges", "top_transmitter", "top_receiver"]
EDGES_HEADER = ["source", "target", "wqte"]
TOP_LINKS_HEADER = ["rank", "period", "source", "target", "wqte"]
SHARES_HEADER = ["period", "n_links"] + CHANNELS + ["dominant"]
DIAGNOSTICS_HEADER = (
    ["period", "n_links"]
    + [f"F_{c}" for c in CHANNELS]
    + ["sargan_reject_pct", "dwh_reject_pct", "sargan_flag", "rigobon_run", "n_skipped"]
)
BOOTSTRAP_HEADER = ["period", "method", "channel", "share", "lo95", "hi95", "degenerate"]
SENSITIVITY_HEADER = ["period", "channel", "robustness_value"]
COMMUNITIES_HEADER = ["period", "market_id", "community", "n_communities", "modularity"]
DEGREE_HEADER = ["period", "out_advanced", "out_emerging", "in_advanced", "in_emerging"]
STATUS_HEADER = ["period", "iv_2sls", "lp_h5", "rigobon", "status"]


@dataclass
class MethodResult:
    method: str
    output: str
    n_links: int = 0
    shares: Optional[np.ndarray] = None
    bootstrap: Optional[BootstrapInterval] = None
    skipped: Dict[str, int] = field(default_factory=dict)

    @property
    def dominant(self) -> Optional[str]:
        if self.shares is None:
            return None
        return CHANNELS[int(np.argmax(self.shares))]


@dataclass
class PeriodDiagnostics:
    n_links: int
    mean_first_stage_F: np.ndarray
    sargan_reject_pct: Optional[float]
    dwh_reject_pct: Optional[float]
    sargan_flag: bool = False
    rigobon_run: bool = False
    n_skipped: int = 0


@dataclass
class PeriodReport:
    period: str
    summary: DetectionSummary
    network: ContagionNetwork
    cells: List[DetectionSummary] = field(default_factory=list)
    methods: Dict[str, MethodResult] = field(default_factory=dict)
    diagnostics: Optional[PeriodDiagnostics] = None
    sensitivity: Optional[np.ndarray] = None
    communities: Optional[CommunityPartition] = None
    degree_shares: Optional[Dict[str, Optional[float]]] = None
    identification: Optional[IdentificationStatus] = None
    notice: Optional[str] = None

    def dominants(self) -> Dict[str, Optional[str]]:
        return {m: self.methods[m].dominant if m in self.methods else None for m in VOTING_METHODS}


def fmt(value: Any) -> str:
    """CSV cell text; None and NaN become empty cells."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return format(float(value), ".10g")
    return str(value)


def fmt_pct(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.2f}"


def file_stem(period: str) -> str:
    """Period name usable inside a file name."""
    return re.sub(r"[^A-Za-z0-9._-]+", "_", period)


class ReportWriter:
    """Writes every table of a run into one output directory."""

    def __init__(self, output: OutputManager):
        self.output = output

    def _write(self, name: str, header: Sequence[str], rows: List[List[str]]) -> str:
        frame = pd.DataFrame(rows, columns=list(header), dtype=object)
        target = self.output.record(name)
        os.makedirs(os.path.dirname(target), exist_ok=True)
        frame.to_csv(target, index=False, lineterminator="\n")
        logger.debug(f"Wrote {name} ({len(rows)} rows)")
        return target

    def _write_dated(self, name: str, frame: pd.DataFrame) -> str:
        dates = frame.index.strftime("%Y-%m-%d")
        rows = [[d] + [fmt(v) for v in values] for d, values in zip(dates, frame.to_numpy())]
        return self._write(name, ["date"] + [str(c) for c in frame.columns], rows)

    def write_ingest(self, returns: ReturnPanel, channels: ChannelPanel) -> List[str]:
        """returns.csv, channels.csv and global_factor.csv on the return calendar."""
        written = [
            self._write_dated("returns.csv", returns.returns),
            self._write_dated("channels.csv", channels.channels),
        ]
        if channels.global_factor is not None:
            written.append(self._write_dated("global_factor.csv", channels.global_factor.to_frame("global_factor")))
        return written

    def write_stage1_summary(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            s = r.summary
            rows.append([
                s.period, fmt(s.mean_wqte), fmt(s.max_wqte), fmt_pct(s.density_pct), fmt(s.n_edges),
                fmt(s.top_transmitter), fmt(s.top_receiver), fmt(s.threshold),
            ])
        return self._write("stage1_summary.csv", STAGE1_HEADER, rows)

    def write_stage1_cells(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            for s in r.cells:
                rows.append([
                    s.period, fmt(s.scale), fmt(s.tau), fmt(s.threshold), fmt(s.mean_wqte), fmt(s.max_wqte),
                    fmt_pct(s.density_pct), fmt(s.n_edges), fmt(s.top_transmitter), fmt(s.top_receiver),
                ])
        return self._write("stage1_cells.csv", CELLS_HEADER, rows)

    def write_edges(self, report: PeriodReport) -> str:
        rows = [[src, dst, fmt(w)] for src, dst, w in report.network.edges]
        return self._write(f"edges_{file_stem(report.period)}.csv", EDGES_HEADER, rows)

    def write_top_links(self, links: Sequence[Tuple[str, str, str, float]]) -> str:
        rows = [[fmt(rank), period, src, dst, fmt(w)] for rank, (period, src, dst, w) in enumerate(links, start=1)]
        return self._write("top_links.csv", TOP_LINKS_HEADER, rows)

    def write_shares(self, reports: Sequence[PeriodReport], config: EstimatorConfig) -> str:
        header = list(SHARES_HEADER)
        with_iv = config.method == "LP5"
        if with_iv:
            header.append("iv_dominant")
        rows = []
        for r in reports:
            result = r.methods.get(config.method)
            shares = result.shares if result is not None and result.shares is not None else [None] * len(CHANNELS)
            row = [r.period, fmt(result.n_links if result else 0)] + [fmt(v) for v in shares]
            row.append(fmt(result.dominant if result else None))
            if with_iv:
                iv = r.methods.get("IV2SLS")
                row.append(fmt(iv.dominant if iv else None))
            rows.append(row)
        return self._write(config.output, header, rows)

    def write_diagnostics(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            d = r.diagnostics
            if d is None:
                rows.append([r.period, "0"] + [""] * (len(DIAGNOSTICS_HEADER) - 2))
                continue
            rows.append(
                [r.period, fmt(d.n_links)]
                + [fmt(f) for f in d.mean_first_stage_F]
                + [fmt(d.sargan_reject_pct), fmt(d.dwh_reject_pct), "*" if d.sargan_flag else "",
                   fmt(d.rigobon_run), fmt(d.n_skipped)]
            )
        return self._write("diagnostics.csv", DIAGNOSTICS_HEADER, rows)

    def write_bootstrap(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            for method, result in r.methods.items():
                ci = result.bootstrap
                if ci is None:
                    continue
                for c, channel in enumerate(CHANNELS):
                    rows.append([
                        r.period, method, channel, fmt(ci.point[c]), fmt(ci.lower[c]), fmt(ci.upper[c]), fmt(ci.degenerate),
                    ])
        return self._write("bootstrap_ci.csv", BOOTSTRAP_HEADER, rows)

    def write_sensitivity(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            if r.sensitivity is None:
                continue
            rows += [[r.period, channel, fmt(r.sensitivity[c])] for c, channel in enumerate(CHANNELS)]
        return self._write("sensitivity.csv", SENSITIVITY_HEADER, rows)

    def write_communities(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            p = r.communities
            if p is None:
                continue
            rows += [
                [r.period, node, fmt(c), fmt(p.n_communities), fmt(p.modularity)]
                for node, c in p.assignments.items()
            ]
        return self._write("communities.csv", COMMUNITIES_HEADER, rows)

    def write_degree_shares(self, reports: Sequence[PeriodReport]) -> str:
        rows = []
        for r in reports:
            shares = r.degree_shares or {}
            rows.append([r.period] + [fmt(shares.get(key)) for key in DEGREE_HEADER[1:]])
        return self._write("degree_shares.csv", DEGREE_HEADER, rows)

    def write_identification(self, statuses: Sequence[Tuple[str, Dict[str, Optional[str]], Optional[IdentificationStatus]]]) -> str:
        rows = []
        for period, dominants, status in statuses:
            rows.append([period] + [fmt(dominants.get(m)) for m in VOTING_METHODS] + [status.label if status else ""])
        return self._write("identification_status.csv", STATUS_HEADER, rows)

    def write_wavelets(self, period: str, decomps: Dict[str, WaveletDecomposition], dates: pd.DatetimeIndex) -> None:
        for market, decomp in decomps.items():
            frame = decomp.to_frame(dates).reset_index()
            frame["date"] = frame["date"].dt.strftime("%Y-%m-%d")
            rows = [[row[0]] + [fmt(v) for v in row[1:]] for row in frame.itertuples(index=False)]
            self._write(os.path.join("wavelets", f"{file_stem(period)}_{file_stem(market)}.csv"), list(frame.columns), rows)

    def write_reports(
        self,
        reports: Sequence[PeriodReport],
        top_links: Sequence[Tuple[str, str, str, float]],
        horizons: Optional[List[int]] = None,
        include_stage2: bool = True,
        include_network: bool = True,
    ) -> None:
        self.write_stage1_summary(reports)
        self.write_stage1_cells(reports)
        self.write_top_links(top_links)
        for r in reports:
            self.write_edges(r)
        if include_stage2:
            for config in get_all_estimators(horizons):
                self.write_shares(reports, config)
            self.write_diagnostics(reports)
            self.write_bootstrap(reports)
            self.write_sensitivity(reports)
            self.write_identification([(r.period, r.dominants(), r.identification) for r in reports])
        if include_network:
            self.write_communities(reports)
            self.write_degree_shares(reports)


def read_dominants(output_dir: str) -> List[Tuple[str, Dict[str, Optional[str]]]]:
    """Per-period dominant channels of the voting methods from existing shares files."""
    files = {c.method: c.output for c in get_all_estimators() if c.votes}
    periods: Dict[str, Dict[str, Optional[str]]] = {}
    for method, name in files.items():
        path = os.path.join(output_dir, name)
        if not os.path.exists(path):
            logger.info(f"{name} not found; {method} treated as not run")
            continue
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ParseError(f"Could not parse {name}: {e}")
        if "period" not in frame.columns or "dominant" not in frame.columns:
            raise SchemaError(f"{name} lacks 'period'/'dominant' columns")
        for period, dominant in zip(frame["period"], frame["dominant"]):
            periods.setdefault(period, {m: None for m in VOTING_METHODS})[method] = dominant or None
    return list(periods.items())
