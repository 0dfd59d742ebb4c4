"""
Stage 1: wavelet-quantile transfer entropy (WQTE), baseline thresholding and
directed contagion networks.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateFit, DomainError, InsufficientData, SingularDesign
from .quantreg import QuantileFit, qr_fit
from .wavelet import WaveletDecomposition

logger = logging.getLogger(__name__)

MIN_PAIR_LENGTH = 50
MIN_POSITIVE = 4
DEGENERATE_SUM = 1e-300


@dataclass(frozen=True)
class FlowTensor:
    """WQTE_{i->j} for one (period, scale, tau) cell; rows are sources.

    Diagonal and degenerate pairs are NaN and never enter statistics.
    """

    period: str
    scale: int
    tau: float
    market_ids: List[str]
    values: np.ndarray

    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(len(self.market_ids), dtype=bool) & np.isfinite(self.values)
        return self.values[mask]

    @property
    def n_missing(self) -> int:
        n = len(self.market_ids)
        return int(n * (n - 1) - self.off_diagonal().size)

    def pairs(self) -> Iterable[Tuple[str, str, float]]:
        for i, src in enumerate(self.market_ids):
            for j, dst in enumerate(self.market_ids):
                if i != j and np.isfinite(self.values[i, j]):
                    yield src, dst, float(self.values[i, j])


@dataclass(frozen=True)
class ContagionNetwork:
    nodes: Dict[str, str]                       # market id -> class
    edges: List[Tuple[str, str, float]]         # (source, target, wqte)
    threshold: float
    period: str = ""

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def out_degree(self) -> Dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for src, _, _ in self.edges:
            deg[src] += 1
        return deg

    def in_degree(self) -> Dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for _, dst, _ in self.edges:
            deg[dst] += 1
        return deg

    def out_strength(self) -> Dict[str, float]:
        strength = {n: 0.0 for n in self.nodes}
        for src, _, w in self.edges:
            strength[src] += w
        return strength

    def in_strength(self) -> Dict[str, float]:
        strength = {n: 0.0 for n in self.nodes}
        for _, dst, w in self.edges:
            strength[dst] += w
        return strength


@dataclass(frozen=True)
class DetectionSummary:
    period: str
    mean_wqte: Optional[float]
    max_wqte: Optional[float]
    n_edges: int
    n_nodes: int
    top_transmitter: Optional[str]
    top_receiver: Optional[str]
    threshold: float
    scale: int = 5
    tau: float = 0.5
    n_missing: int = 0

    @property
    def n_pairs(self) -> int:
        return self.n_nodes * (self.n_nodes - 1)

    @property
    def density_pct(self) -> float:
        return 100.0 * self.n_edges / self.n_pairs if self.n_pairs else 0.0


def _lagged(d_target: np.ndarray, d_source: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    y = d_target[1:]
    own = d_target[:-1]
    if d_source is None:
        return own[:, None], y
    return np.column_stack([own, d_source[:-1]]), y


def _check_pair(d_source: np.ndarray, d_target: np.ndarray) -> None:
    if len(d_source) != len(d_target):
        raise DomainError(f"Series lengths differ ({len(d_source)} vs {len(d_target)})")
    if len(d_target) < MIN_PAIR_LENGTH:
        raise InsufficientData(f"WQTE needs at least {MIN_PAIR_LENGTH} observations, got {len(d_target)}")


def restricted_fit(d_target: np.ndarray, tau: float, solver: str = "irls") -> QuantileFit:
    """Own-history quantile fit of d_target[t+1] on d_target[t]."""
    X, y = _lagged(np.asarray(d_target, dtype=float), None)
    return qr_fit(X, y, tau, solver=solver)


def wqte_pair(
    d_source: np.ndarray,
    d_target: np.ndarray,
    tau: float,
    solver: str = "irls",
    restricted: Optional[QuantileFit] = None,
) -> float:
    """log(sum|e1|) - log(sum|e2|) for restricted vs source-augmented fits.

    ``restricted`` may carry a precomputed own-history fit for the target
    (it does not depend on the source).
    """
    d_source = np.asarray(d_source, dtype=float)
    d_target = np.asarray(d_target, dtype=float)
    _check_pair(d_source, d_target)

    if restricted is None:
        restricted = restricted_fit(d_target, tau, solver=solver)
    X, y = _lagged(d_target, d_source)
    augmented = qr_fit(X, y, tau, solver=solver)

    if restricted.abs_residual_sum <= DEGENERATE_SUM or augmented.abs_residual_sum <= DEGENERATE_SUM:
        raise DegenerateFit("Quantile fit has zero absolute residual sum")
    return float(np.log(restricted.abs_residual_sum) - np.log(augmented.abs_residual_sum))


def flow_matrix(
    decomps: Dict[str, WaveletDecomposition],
    scale: int,
    tau: float,
    period: str = "",
    solver: str = "irls",
) -> FlowTensor:
    """WQTE for all N(N-1) ordered pairs at one scale and quantile."""
    markets = list(decomps)
    lengths = {len(decomps[m].smooth) for m in markets}
    if len(lengths) != 1:
        raise DomainError(f"Decompositions differ in length: {sorted(lengths)}")

    details = {m: decomps[m].detail(scale) for m in markets}
    values = np.full((len(markets), len(markets)), np.nan)
    for j, target in enumerate(markets):
        try:
            own = restricted_fit(details[target], tau, solver=solver)
        except (SingularDesign, DegenerateFit) as e:
            logger.debug(f"[{period}] s={scale} tau={tau}: restricted fit for {target} unusable: {e}")
            continue
        for i, source in enumerate(markets):
            if i == j:
                continue
            try:
                values[i, j] = wqte_pair(details[source], details[target], tau, solver=solver, restricted=own)
            except (SingularDesign, DegenerateFit) as e:
                logger.debug(f"[{period}] s={scale} tau={tau} {source}->{target} recorded missing: {e}")

    tensor = FlowTensor(period=period, scale=scale, tau=tau, market_ids=markets, values=values)
    if tensor.n_missing:
        logger.info(f"[{period}] s={scale} tau={tau}: {tensor.n_missing} degenerate pairs recorded as missing")
    return tensor


def baseline_threshold(baseline_flows: FlowTensor) -> float:
    """75th percentile (linear interpolation) of the positive baseline WQTE values."""
    values = baseline_flows.off_diagonal()
    positive = values[values > 0]
    if positive.size < MIN_POSITIVE:
        raise InsufficientData(
            f"Baseline has {positive.size} positive WQTE values, need {MIN_POSITIVE}",
            {"period": baseline_flows.period},
        )
    return float(np.percentile(positive, 75))


def threshold_network(flows: FlowTensor, threshold: float, market_class: Optional[Dict[str, str]] = None) -> ContagionNetwork:
    """Keep edge i->j iff WQTE_{i->j} > threshold."""
    if np.isnan(threshold):
        raise DomainError("Threshold must not be NaN")
    classes = market_class or {}
    nodes = {m: classes.get(m, "advanced") for m in flows.market_ids}
    edges = [(src, dst, w) for src, dst, w in flows.pairs() if w > threshold]
    return ContagionNetwork(nodes=nodes, edges=edges, threshold=threshold, period=flows.period)


def _argmax_lexicographic(scores: Dict[str, float]) -> Optional[str]:
    if not scores:
        return None
    best = max(scores.values())
    return min(node for node, value in scores.items() if value == best)


def summarize(network: ContagionNetwork, flows: FlowTensor, top_by: str = "degree") -> DetectionSummary:
    """Intensity, density and top nodes of one period's network."""
    if set(network.nodes) != set(flows.market_ids):
        raise DomainError("Network and flow tensor have different node sets")

    values = flows.off_diagonal()
    weights = [w for _, _, w in network.edges]
    if top_by == "degree":
        out_scores, in_scores = network.out_degree(), network.in_degree()
    elif top_by == "strength":
        out_scores, in_scores = network.out_strength(), network.in_strength()
    else:
        raise DomainError(f"top_by must be 'degree' or 'strength', got '{top_by}'")

    empty = not network.edges
    return DetectionSummary(
        period=network.period or flows.period,
        mean_wqte=None if empty else float(np.mean(weights)),
        max_wqte=float(values.max()) if values.size else None,
        n_edges=len(network.edges),
        n_nodes=network.n_nodes,
        top_transmitter=None if empty else _argmax_lexicographic(out_scores),
        top_receiver=None if empty else _argmax_lexicographic(in_scores),
        threshold=network.threshold,
        scale=flows.scale,
        tau=flows.tau,
        n_missing=flows.n_missing,
    )


def top_links(tensors: Sequence[FlowTensor], k: int = 15) -> List[Tuple[str, str, str, float]]:
    """Strongest ordered-pair WQTE values across periods: (period, source, target, wqte)."""
    rows = [(t.period, src, dst, w) for t in tensors for src, dst, w in t.pairs()]
    rows.sort(key=lambda r: (-r[3], r[0], r[1], r[2]))
    return rows[:k]
