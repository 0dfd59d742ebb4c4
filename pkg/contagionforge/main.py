import argparse
import logging
import os
import sys
import traceback
from typing import List, Optional

from dotenv import load_dotenv

from .configs.pipeline_config import PipelineConfig
from .core.orchestrator import PipelineOrchestrator, run_pipeline
from .data.synth import SynthConfig, write_fixture
from .errors import ContagionError, Unclassifiable
from .report.identification import classify_identification
from .report.writer import ReportWriter, read_dominants
from .utils.output_manager import OutputManager

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline configuration JSON")
    parser.add_argument("--out", help="output directory (overrides config and CONTAGION_OUTPUT_DIR)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--periods", help="comma-separated sub-period names to run")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--log-level", help="logging level (default from CONTAGION_LOG_LEVEL or INFO)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contagionforge",
        description="Wavelet-quantile contagion detection and structural channel attribution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("ingest", "load inputs and write aligned returns, channels and global factor"),
        ("detect", "Stage 1 only: networks, summaries and top links"),
        ("attribute", "Stages 1 and 2 without communities or degree shares"),
        ("pipeline", "run every stage"),
        ("report", "re-derive identification_status.csv from existing shares files"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name in ("detect", "attribute", "pipeline"):
            p.add_argument("--dump-wavelets", action="store_true", help="write per-market MODWT coefficients")

    synth = sub.add_parser("synth", help="write a synthetic fixture with known ground truth")
    _common(synth)
    synth.add_argument("--markets", type=int, default=6)
    synth.add_argument("--dates", type=int, default=3000)
    synth.add_argument("--n-periods", type=int, default=4)
    synth.add_argument("--noise", choices=["gaussian", "student_t"], default="gaussian")
    synth.add_argument("--two-regime", action="store_true", help="double channel innovation variance in the second half")
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """JSON file, then CONTAGION_* environment, then CLI flags."""
    config = PipelineConfig.from_json_file(args.config) if args.config else PipelineConfig()
    config = config.with_env_overrides()
    periods = [p.strip() for p in args.periods.split(",") if p.strip()] if args.periods else None
    return config.with_overrides(output_dir=args.out, seed=args.seed, threads=args.threads, periods=periods)


def cmd_ingest(config: PipelineConfig) -> str:
    orchestrator = PipelineOrchestrator(config)
    orchestrator.load_inputs()
    output = OutputManager(config.output_dir)
    ReportWriter(output).write_ingest(orchestrator.returns, orchestrator.channels)
    output.write_manifest(config.model_dump(mode="json"))
    returns = orchestrator.returns
    return f"ingest: {returns.n_markets} markets x {len(returns)} dates -> {config.output_dir}"


def cmd_run(config: PipelineConfig, command: str, dump_wavelets: bool) -> str:
    result = run_pipeline(
        config,
        include_stage2=command in ("attribute", "pipeline"),
        include_network=command == "pipeline",
        dump_wavelets=dump_wavelets,
    )
    edges = sum(len(r.network.edges) for r in result.reports)
    failed = f", {len(result.errors)} periods failed" if result.errors else ""
    return (
        f"{command}: {len(result.reports)} periods, {edges} links, "
        f"threshold {result.threshold:.6g}{failed} -> {config.output_dir}"
    )


def cmd_report(config: PipelineConfig) -> str:
    statuses = []
    for period, dominants in read_dominants(config.output_dir):
        try:
            status = classify_identification(dominants, period)
        except Unclassifiable as e:
            logger.warning(f"[{period}] {e}")
            status = None
        statuses.append((period, dominants, status))
    ReportWriter(OutputManager(config.output_dir)).write_identification(statuses)
    robust = sum(1 for _, _, s in statuses if s is not None and s.robust)
    return f"report: {len(statuses)} periods, {robust} robust -> {config.output_dir}"


def cmd_synth(args: argparse.Namespace) -> str:
    settings = SynthConfig(
        n_markets=args.markets,
        T=args.dates,
        seed=args.seed if args.seed is not None else 0,
        noise=args.noise,
        two_regime=args.two_regime,
        n_periods=args.n_periods,
    )
    out = args.out or "fixture"
    write_fixture(settings, out)
    return f"synth: {settings.n_markets} markets x {settings.T} dates -> {out}"


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    level = (args.log_level or os.getenv("CONTAGION_LOG_LEVEL", "INFO")).upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.error(f"unknown log level '{level}'")
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "synth":
            summary = cmd_synth(args)
        else:
            config = load_config(args)
            if args.command == "ingest":
                summary = cmd_ingest(config)
            elif args.command == "report":
                summary = cmd_report(config)
            else:
                summary = cmd_run(config, args.command, getattr(args, "dump_wavelets", False))
    except ContagionError as e:
        logger.error(f"{type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())
        return 1

    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
