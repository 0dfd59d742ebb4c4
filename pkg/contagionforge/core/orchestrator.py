import logging
import traceback
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..configs.channel_configs import CHANNELS
from ..configs.pipeline_config import PipelineConfig
from ..data.ingest import (
    ChannelPanel,
    ReturnPanel,
    SubPeriod,
    build_channels,
    compute_log_returns,
    load_channel_csv,
    load_market_classes,
    load_price_csv,
    partition_subperiods,
    validate_schedule,
    with_global_factor,
)
from ..errors import ContagionError, InsufficientData, Unclassifiable, UndefinedShares
from ..network.communities import degree_decomposition, symmetrize, walktrap
from ..report.identification import classify_identification
from ..report.writer import MethodResult, PeriodDiagnostics, PeriodReport, ReportWriter
from ..stage1.detect import (
    ContagionNetwork,
    FlowTensor,
    baseline_threshold,
    flow_matrix,
    summarize,
    threshold_network,
    top_links,
)
from ..stage1.wavelet import WaveletDecomposition, modwt_panel
from ..stage2.estimators import load_estimators
from ..stage2.rigobon import regime_partition
from ..stage2.sample import LinkSample, build_link_sample
from ..stage2.shares import aggregate_period_shares, bootstrap_shares, shares
from ..utils.output_manager import OutputManager
from .base_estimator import BaseEstimator

logger = logging.getLogger(__name__)

Cell = Tuple[int, float]


@dataclass
class PipelineResult:
    reports: List[PeriodReport] = field(default_factory=list)
    top_links: List[Tuple[str, str, str, float]] = field(default_factory=list)
    threshold: Optional[float] = None
    errors: List[Dict[str, Any]] = field(default_factory=list)

    def report(self, period: str) -> PeriodReport:
        return next(r for r in self.reports if r.period == period)


class PipelineOrchestrator:
    def __init__(
        self,
        config: PipelineConfig,
        returns: Optional[ReturnPanel] = None,
        channels: Optional[ChannelPanel] = None,
    ):
        """Set up a run.

        Args:
            config: validated pipeline configuration
            returns: in-memory return panel; loaded from ``config.prices_path`` if omitted
            channels: in-memory channel panel; built from ``config.channels_path`` if omitted
        """
        self.config = config
        self.returns = returns
        self.channels = channels
        self.estimators: List[BaseEstimator] = load_estimators(config.horizons)
        self.thresholds: Dict[Cell, float] = {}
        self.decompositions: Dict[str, Dict[str, WaveletDecomposition]] = {}
        self.period_dates: Dict[str, pd.DatetimeIndex] = {}

    @property
    def reporting_cell(self) -> Cell:
        return (self.config.reporting_scale, self.config.reporting_quantile)

    def _map(self, fn: Callable, items: Sequence) -> List:
        """Order-preserving map, threaded when configured."""
        if self.config.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def load_inputs(self, need_channels: bool = True) -> None:
        """Read prices, classes and channels unless they were supplied in memory."""
        cfg = self.config
        if self.returns is None:
            if not cfg.prices_path:
                raise ContagionError("No prices_path configured and no return panel supplied")
            classes = load_market_classes(cfg.classes_path) if cfg.classes_path else None
            prices = load_price_csv(cfg.prices_path, classes, min_rows=cfg.min_rows)
            self.returns = compute_log_returns(prices)
            logger.info(f"Loaded {self.returns.n_markets} markets x {len(self.returns)} return rows")
        if self.channels is None:
            if not need_channels:
                return
            if not cfg.channels_path:
                raise ContagionError("No channels_path configured and no channel panel supplied")
            raw = load_channel_csv(cfg.channels_path)
            self.channels = build_channels(raw, cfg.schedule, dates=self.returns.dates)
        if self.channels.global_factor is None:
            self.channels = with_global_factor(self.channels, self.returns)

    # Stage 1

    def _period_flows(self, item: Tuple[str, ReturnPanel]) -> Dict[Cell, FlowTensor]:
        name, panel = item
        cfg = self.config
        decomps = modwt_panel(panel, levels=cfg.levels, filter_id=cfg.wavelet_filter)
        self.decompositions[name] = decomps
        self.period_dates[name] = panel.dates
        return {
            (s, q): flow_matrix(decomps, s, q, period=name, solver=cfg.quantile_solver)
            for s in cfg.scales
            for q in cfg.quantiles
        }

    def _safe_period_flows(self, item: Tuple[str, ReturnPanel]):
        try:
            return self._period_flows(item)
        except ContagionError as e:
            return e.with_context(period=item[0])

    def compute_thresholds(self, baseline_flows: Dict[Cell, FlowTensor]) -> Dict[Cell, float]:
        """Absolute thresholds per (scale, tau) cell, fixed once for the whole run."""
        if self.thresholds:
            raise RuntimeError("Thresholds are computed once per run")
        if not isinstance(self.config.threshold, str):
            self.thresholds = {cell: float(self.config.threshold) for cell in baseline_flows}
            return self.thresholds
        for cell, tensor in baseline_flows.items():
            try:
                self.thresholds[cell] = baseline_threshold(tensor)
            except InsufficientData as e:
                if cell == self.reporting_cell:
                    raise
                logger.warning(f"No baseline threshold for scale={cell[0]} tau={cell[1]}: {e}")
        return self.thresholds

    def detect(self, name: str, flows: Dict[Cell, FlowTensor], market_class: Dict[str, str]):
        cells = []
        network: Optional[ContagionNetwork] = None
        summary = None
        for cell, tensor in flows.items():
            if cell not in self.thresholds:
                continue
            net = threshold_network(tensor, self.thresholds[cell], market_class)
            cell_summary = summarize(net, tensor, top_by=self.config.top_by)
            cells.append(cell_summary)
            if cell == self.reporting_cell:
                network, summary = net, cell_summary
        return network, summary, cells

    # Stage 2

    def _build_samples(self, period: SubPeriod, network: ContagionNetwork, skipped: Counter) -> List[LinkSample]:
        samples = []
        frame = self.returns.returns
        for src, dst, _ in network.edges:
            try:
                samples.append(build_link_sample(
                    frame[src], frame[dst], self.channels, period,
                    interactions=self.config.interaction_pairs,
                ))
            except ContagionError as e:
                skipped[type(e).__name__] += 1
                logger.warning(f"[{period.name}] {src}->{dst}: link sample skipped: {e}")
        return samples

    def _run_estimator(self, estimator: BaseEstimator, samples: List[LinkSample], context: Dict[str, Any]) -> List[Dict[str, Any]]:
        return self._map(lambda s: next(estimator.stream_estimate([s], context)), samples)

    def _method_result(self, estimator: BaseEstimator, events: List[Dict[str, Any]], period: str) -> MethodResult:
        result = MethodResult(method=estimator.method, output=estimator.config.output)
        skipped: Counter = Counter()
        link_shares = []
        for event in events:
            if event["type"] == "skip":
                skipped[event["reason"]] += 1
                logger.warning(f"[{period}] {event['pair'][0]}->{event['pair'][1]}: {estimator.method} failed: {event['content']}")
                continue
            try:
                link_shares.append(shares(event["estimate"]))
            except UndefinedShares:
                skipped["UndefinedShares"] += 1
        result.skipped = dict(skipped)
        result.n_links = len(link_shares)
        if link_shares:
            result.shares = aggregate_period_shares(link_shares)
            result.bootstrap = bootstrap_shares(
                link_shares,
                replications=self.config.bootstrap_reps,
                seed=self.config.seed,
                threads=self.config.threads,
            )
        return result

    def attribute(self, period: SubPeriod, panel: ReturnPanel, network: ContagionNetwork, report: PeriodReport) -> None:
        """Run every applicable estimator over the period's significant links."""
        cfg = self.config
        skipped: Counter = Counter()
        samples = self._build_samples(period, network, skipped)
        context: Dict[str, Any] = {"lasso_penalty": cfg.lasso_penalty, "rigobon_enabled": False, "regimes": None}

        iv = next(e for e in self.estimators if e.config.kind == "iv")
        iv_events = self._run_estimator(iv, samples, context)
        fitted = [ev for ev in iv_events if ev["type"] == "estimate"]

        sargan = [r for r in (ev["diagnostics"].sargan_rejects(cfg.sargan_level) for ev in fitted) if r is not None]
        dwh = [r for r in (ev["diagnostics"].dwh_rejects(cfg.sargan_level) for ev in fitted) if r is not None]
        sargan_rate = float(np.mean(sargan)) if sargan else None
        dwh_rate = float(np.mean(dwh)) if dwh else None
        sargan_flag = sargan_rate is not None and sargan_rate > cfg.sargan_gate

        if cfg.force_rigobon or sargan_flag:
            try:
                context["regimes"] = regime_partition(panel, window=cfg.regime_window)
                context["rigobon_enabled"] = True
            except ContagionError as e:
                logger.warning(f"[{period.name}] Rigobon disabled: {e}")

        for estimator in self.estimators:
            if not estimator.is_applicable(context):
                continue
            events = iv_events if estimator is iv else self._run_estimator(estimator, samples, context)
            result = self._method_result(estimator, events, period.name)
            report.methods[estimator.method] = result
            skipped.update(result.skipped)

        if fitted:
            report.sensitivity = np.mean([ev["diagnostics"].robustness_value for ev in fitted], axis=0)
            mean_f = np.mean([ev["diagnostics"].first_stage_F for ev in fitted], axis=0)
        else:
            mean_f = np.full(len(CHANNELS), np.nan)
        report.diagnostics = PeriodDiagnostics(
            n_links=len(fitted),
            mean_first_stage_F=mean_f,
            sargan_reject_pct=None if sargan_rate is None else 100.0 * sargan_rate,
            dwh_reject_pct=None if dwh_rate is None else 100.0 * dwh_rate,
            sargan_flag=sargan_flag,
            rigobon_run=bool(context["rigobon_enabled"]),
            n_skipped=sum(skipped.values()),
        )
        if skipped:
            logger.info(f"[{period.name}] skipped link fits: {dict(sorted(skipped.items()))}")

        try:
            report.identification = classify_identification(report.dominants(), period=period.name)
        except Unclassifiable as e:
            logger.info(f"[{period.name}] identification status unavailable: {e}")

    # Driver

    def stream_run(self, include_stage2: bool = True, include_network: bool = True) -> Iterator[Dict[str, Any]]:
        """Run the pipeline, yielding status, period and error events."""
        cfg = self.config
        try:
            yield {"type": "status", "content": "Loading inputs..."}
            self.load_inputs(need_channels=include_stage2)

            validate_schedule(cfg.schedule)
            selected = cfg.selected_periods()
            slices = partition_subperiods(self.returns, [cfg.baseline])

            yield {"type": "status", "content": f"Stage 1: baseline '{cfg.baseline_period}'"}
            flows = {cfg.baseline_period: self._period_flows((cfg.baseline_period, slices[cfg.baseline_period]))}
            self.compute_thresholds(flows[cfg.baseline_period])
            threshold = self.thresholds[self.reporting_cell]
            yield {"type": "status", "content": f"Absolute threshold {threshold:.6g} fixed from '{cfg.baseline_period}'"}

            failed: Dict[str, ContagionError] = {}
            for p in selected:
                if p.name in slices:
                    continue
                try:
                    slices.update(partition_subperiods(self.returns, [p]))
                except ContagionError as e:
                    failed[p.name] = e
            others = [(p.name, slices[p.name]) for p in selected if p.name in slices and p.name not in flows]
            for (name, _), outcome in zip(others, self._map(self._safe_period_flows, others)):
                if isinstance(outcome, ContagionError):
                    failed[name] = outcome
                else:
                    flows[name] = outcome
        except ContagionError as e:
            logger.error(f"Pipeline aborted: {e}")
            yield {"type": "error", "fatal": True, "content": str(e), "error": e}
            return
        except Exception as e:
            logger.error(f"Error in stream_run: {str(e)}")
            logger.error(traceback.format_exc())
            yield {"type": "error", "fatal": True, "content": str(e), "error": e}
            return

        reports: List[PeriodReport] = []
        for period in selected:
            if period.name in failed:
                e = failed[period.name]
                logger.error(f"[{period.name}] Stage 1 failed: {e}")
                yield {"type": "error", "fatal": False, "period": period.name, "content": str(e), "error": e}
                continue
            panel = slices[period.name]
            try:
                network, summary, cells = self.detect(period.name, flows[period.name], panel.market_class)
                report = PeriodReport(period=period.name, summary=summary, network=network, cells=cells)
                if include_stage2:
                    if network.edges:
                        yield {"type": "status", "content": f"Stage 2: {period.name} ({len(network.edges)} links)"}
                        self.attribute(period, panel, network, report)
                    else:
                        report.notice = f"No significant links in '{period.name}'; Stage 2 skipped"
                        yield {"type": "status", "content": report.notice}
                if include_network:
                    report.communities = walktrap(symmetrize(network), steps=cfg.walk_steps)
                    report.degree_shares = degree_decomposition(network, panel.market_class)
            except ContagionError as e:
                logger.error(f"[{period.name}] period failed: {e}")
                yield {"type": "error", "fatal": False, "period": period.name, "content": str(e), "error": e}
                continue
            reports.append(report)
            yield {"type": "period", "content": report}

        reporting = [flows[p.name][self.reporting_cell] for p in selected if p.name in flows]
        yield {
            "type": "result",
            "content": PipelineResult(
                reports=reports,
                top_links=top_links(reporting, k=cfg.top_links),
                threshold=self.thresholds[self.reporting_cell],
            ),
        }


def run_pipeline(
    config: PipelineConfig,
    returns: Optional[ReturnPanel] = None,
    channels: Optional[ChannelPanel] = None,
    include_stage2: bool = True,
    include_network: bool = True,
    dump_wavelets: bool = False,
    write: bool = True,
) -> PipelineResult:
    """Run every stage and write all tables plus run_manifest.json.

    A fatal error is re-raised; per-period errors are logged and collected.
    """
    orchestrator = PipelineOrchestrator(config, returns=returns, channels=channels)
    result: Optional[PipelineResult] = None
    errors: List[Dict[str, Any]] = []
    for event in orchestrator.stream_run(include_stage2=include_stage2, include_network=include_network):
        if event["type"] == "status":
            logger.info(event["content"])
        elif event["type"] == "error":
            if event.get("fatal"):
                raise event["error"]
            errors.append({"period": event.get("period"), "content": event["content"]})
        elif event["type"] == "result":
            result = event["content"]
    assert result is not None
    result.errors = errors

    if write:
        output = OutputManager(config.output_dir)
        writer = ReportWriter(output)
        writer.write_reports(
            result.reports,
            result.top_links,
            horizons=config.horizons,
            include_stage2=include_stage2,
            include_network=include_network,
        )
        if dump_wavelets:
            for name, decomps in orchestrator.decompositions.items():
                writer.write_wavelets(name, decomps, orchestrator.period_dates[name])
        output.write_manifest(config.model_dump(mode="json"), extra={"threshold": result.threshold})
        logger.info(f"Wrote {len(output.written)} files to {config.output_dir}")
    return result
