"""
Post-double-selection LASSO over the instrument set.

Each selection step partials the exogenous controls out of the target and the
instruments, standardizes the instruments and runs coordinate-descent LASSO
with the plug-in penalty

    lambda = 2.2 * sd(target residual) * sqrt(T) * Phi^{-1}(1 - 0.05 / (2k)).

scikit-learn's objective is (1/2T)||y - Xb||^2 + alpha ||b||_1, so
alpha = lambda / (2T).
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats
from sklearn.linear_model import Lasso
from sklearn.preprocessing import scale

from ..configs.channel_configs import CHANNELS
from ..errors import DomainError
from .iv import fit_2sls
from .results import StructuralEstimate
from .sample import LinkSample

logger = logging.getLogger(__name__)

PENALTY_CONSTANT = 2.2
PENALTY_LEVEL = 0.05
MAX_ITER = 100_000
TOL = 1e-8


def _partial_out(target: np.ndarray, controls: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(controls, target, rcond=None)
    return target - controls @ coef


def plugin_penalty(residual: np.ndarray, n_instruments: int) -> float:
    n = len(residual)
    quantile = stats.norm.ppf(1.0 - PENALTY_LEVEL / (2.0 * n_instruments))
    return float(PENALTY_CONSTANT * np.std(residual, ddof=1) * np.sqrt(n) * quantile)


def lasso_select(
    sample: LinkSample,
    channel_index: Optional[int],
    penalty: Optional[float] = None,
) -> List[int]:
    """Instrument columns with non-zero LASSO coefficients for one target.

    ``channel_index=None`` selects for the outcome C. ``penalty`` overrides
    the plug-in lambda (same scale).
    """
    if penalty is not None and penalty < 0:
        raise DomainError(f"LASSO penalty must be non-negative, got {penalty}")
    target = sample.comovement if channel_index is None else sample.channels[:, channel_index]
    controls = sample.controls
    y = _partial_out(target, controls)
    X = scale(_partial_out(sample.instruments, controls))
    n, k = X.shape

    lam = plugin_penalty(y, k) if penalty is None else float(penalty)
    if lam == 0.0:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        model = Lasso(alpha=lam / (2.0 * n), fit_intercept=False, max_iter=MAX_ITER, tol=TOL)
        coef = model.fit(X, y).coef_
    return [int(i) for i in np.flatnonzero(coef != 0.0)]


def post_double_selection(sample: LinkSample, penalty: Optional[float] = None) -> Tuple[List[int], bool]:
    """Union of the selections for the outcome and every channel.

    Falls back to the full instrument set (flag True) if any channel selects
    nothing or the union cannot identify the five channels.
    """
    selected = set(lasso_select(sample, None, penalty))
    fallback = False
    for c, name in enumerate(CHANNELS):
        chosen = lasso_select(sample, c, penalty)
        if not chosen:
            logger.debug(f"[{sample.period}] {sample.pair}: LASSO selected no instrument for {name}")
            fallback = True
        selected.update(chosen)
    if len(selected) < len(CHANNELS):
        fallback = True
    if fallback:
        return list(range(sample.instruments.shape[1])), True
    return sorted(selected), False


def fit_lasso_iv(sample: LinkSample, penalty: Optional[float] = None) -> StructuralEstimate:
    """2SLS re-run on the post-double-selection instrument set."""
    columns, fallback = post_double_selection(sample, penalty)
    estimate, _ = fit_2sls(sample, instrument_columns=columns, method="LASSOIV")
    estimate.flags["lasso_fallback"] = fallback
    estimate.flags["selected"] = [sample.instrument_names[i] for i in columns] if sample.instrument_names else columns
    return estimate
