"""
Channel attribution shares, their period aggregation, the paired-link
bootstrap and the omitted-confounder robustness value.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..configs.channel_configs import CHANNELS
from ..errors import DegenerateBootstrap, DomainError, InsufficientData, UndefinedShares
from .results import StructuralEstimate

logger = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 300
CI_LEVEL = 0.95


@dataclass(frozen=True)
class BootstrapInterval:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replications: int
    degenerate: bool = False


def shares(estimate: Union[StructuralEstimate, np.ndarray, Sequence[float]]) -> np.ndarray:
    """|theta_c| / sum |theta|."""
    theta = estimate.theta if isinstance(estimate, StructuralEstimate) else np.asarray(estimate, dtype=float)
    magnitude = np.abs(theta)
    total = magnitude.sum()
    if not np.isfinite(total):
        raise DomainError("Structural coefficients are not finite")
    if total <= 0.0:
        raise UndefinedShares("All structural coefficients are zero")
    return magnitude / total


def aggregate_period_shares(link_shares: Sequence[np.ndarray]) -> np.ndarray:
    """Mean share vector across a period's links, renormalized to sum to one."""
    if len(link_shares) == 0:
        raise InsufficientData("No links to aggregate")
    stacked = np.vstack([np.asarray(s, dtype=float) for s in link_shares])
    if stacked.shape[1] != len(CHANNELS):
        raise DomainError(f"Share vectors must have {len(CHANNELS)} entries")
    # column-sorted so the sum is independent of link order
    mean = np.sort(stacked, axis=0).mean(axis=0)
    total = mean.sum()
    if total <= 0.0:
        raise UndefinedShares("Aggregated shares are all zero")
    return mean / total


def _replicate(stacked: np.ndarray, seed: int, replication: int) -> np.ndarray:
    rng = np.random.default_rng([seed, replication])
    draw = rng.integers(0, len(stacked), size=len(stacked))
    return aggregate_period_shares(stacked[draw])


def bootstrap_shares(
    link_shares: Sequence[np.ndarray],
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
    threads: int = 1,
    strict: bool = False,
) -> BootstrapInterval:
    """Percentile 95% interval of the aggregate shares over resampled links.

    Replication ``r`` draws from its own stream seeded by ``(seed, r)``.
    With fewer than two links the interval collapses onto the point estimate.
    """
    if replications < 1:
        raise DomainError(f"Bootstrap needs at least one replication, got {replications}")
    point = aggregate_period_shares(link_shares)
    if len(link_shares) < 2:
        if strict:
            raise DegenerateBootstrap(f"Bootstrap needs two links, got {len(link_shares)}")
        logger.info("Single link: bootstrap interval collapsed onto the point estimate")
        return BootstrapInterval(point=point, lower=point.copy(), upper=point.copy(), replications=0, degenerate=True)

    stacked = np.vstack([np.asarray(s, dtype=float) for s in link_shares])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = list(pool.map(lambda r: _replicate(stacked, seed, r), range(replications)))
    else:
        draws = [_replicate(stacked, seed, r) for r in range(replications)]
    draws = np.vstack(draws)

    tail = 100.0 * (1.0 - CI_LEVEL) / 2.0
    lower = np.percentile(draws, tail, axis=0)
    upper = np.percentile(draws, 100.0 - tail, axis=0)
    return BootstrapInterval(point=point, lower=lower, upper=upper, replications=replications)


def robustness_value(t_stat: float, dof: int) -> float:
    """Partial R^2 a confounder needs to explain away the estimate: (sqrt(f^4 + 4f^2) - f^2) / 2."""
    if dof <= 0:
        raise DomainError(f"Degrees of freedom must be positive, got {dof}")
    f = abs(float(t_stat)) / np.sqrt(dof)
    if f == 0.0 or np.isnan(f):
        return 0.0
    if np.isinf(f):
        return 1.0
    # same value as (sqrt(f^4 + 4f^2) - f^2) / 2
    return float(2.0 / (np.sqrt(1.0 + 4.0 / f ** 2) + 1.0))
