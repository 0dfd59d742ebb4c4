"""
IV/2SLS estimation of the structural co-movement equation

    C_t = a + sum_c theta_c Channel_{c,t} + g1 f_t + g2 C_{t-1} + e_t

with the five channels endogenous and (intercept, f_t, C_{t-1}) exogenous
in both stages, plus the first-stage, Sargan and Durbin-Wu-Hausman
diagnostics.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import statsmodels.api as sm
from scipy import stats

from ..configs.channel_configs import CHANNELS
from ..errors import IdentificationError, NotOveridentified, SingularDesign
from .results import DiagnosticsRecord, StructuralEstimate
from .sample import LinkSample
from .shares import robustness_value

logger = logging.getLogger(__name__)

F_CEILING = 1e12
EXACT_FIT = 1e-20
MIN_INSTRUMENTS = len(CHANNELS)


def _require_full_rank(matrix: np.ndarray, what: str) -> None:
    if np.linalg.matrix_rank(matrix) < matrix.shape[1]:
        raise SingularDesign(f"{what} is rank deficient ({matrix.shape[1]} columns)")


def _rss(y: np.ndarray, X: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return float(resid @ resid)


def _excluded(sample: LinkSample, instrument_columns: Optional[Sequence[int]]) -> np.ndarray:
    if instrument_columns is None:
        return sample.instruments
    return sample.instruments[:, list(instrument_columns)]


def _project(Z: np.ndarray, target: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(Z, target, rcond=None)
    return Z @ coef


def two_stage_least_squares(
    y: np.ndarray,
    endog: np.ndarray,
    exog: np.ndarray,
    excluded: np.ndarray,
) -> Dict[str, np.ndarray]:
    """2SLS with HC1 covariance. Coefficients are ordered ``[exog, endog]``."""
    n, m = endog.shape
    if excluded.shape[1] < m:
        raise IdentificationError(
            f"{excluded.shape[1]} excluded instruments for {m} endogenous regressors"
        )
    Z = np.column_stack([exog, excluded])
    _require_full_rank(Z, "Instrument matrix")

    X = np.column_stack([exog, endog])
    X_hat = np.column_stack([exog, _project(Z, endog)])
    _require_full_rank(X_hat, "Projected regressor matrix")

    gram = X_hat.T @ X_hat
    beta = np.linalg.solve(gram, X_hat.T @ y)
    resid = y - X @ beta

    n_params = X.shape[1]
    bread = np.linalg.inv(gram)
    scores = X_hat * resid[:, None]
    cov = bread @ (scores.T @ scores) @ bread * n / max(n - n_params, 1)
    return {"beta": beta, "resid": resid, "cov": cov, "dof": np.array(n - n_params)}


def fit_2sls(
    sample: LinkSample,
    instrument_columns: Optional[Sequence[int]] = None,
    method: str = "IV2SLS",
    sargan_required: bool = False,
) -> Tuple[StructuralEstimate, DiagnosticsRecord]:
    """Structural 2SLS estimate and its diagnostics for one link."""
    exog = sample.controls
    excluded = _excluded(sample, instrument_columns)
    fit = two_stage_least_squares(sample.comovement, sample.channels, exog, excluded)

    k_exog = exog.shape[1]
    beta, cov, dof = fit["beta"], fit["cov"], int(fit["dof"])
    estimate = StructuralEstimate(
        method=method,
        theta=beta[k_exog:],
        nuisance={"alpha": float(beta[0]), "gamma_factor": float(beta[1]), "gamma_lag": float(beta[2])},
        cov=cov[k_exog:, k_exog:],
        dof=dof,
        residuals=fit["resid"],
    )

    first_stage = np.array(
        [first_stage_partial_F(sample, c, instrument_columns) for c in range(len(CHANNELS))]
    )
    try:
        sargan_stat, sargan_p = sargan_test(sample, estimate, instrument_columns)
    except NotOveridentified as e:
        if sargan_required:
            raise
        logger.debug(f"[{sample.period}] {sample.pair}: Sargan skipped: {e}")
        sargan_stat, sargan_p = None, None
    dwh_stat, dwh_p = dwh_test(sample, instrument_columns)

    t_stats = estimate.t_stats
    rho = np.array([robustness_value(t, dof) for t in t_stats])
    diagnostics = DiagnosticsRecord(
        first_stage_F=first_stage,
        sargan_stat=sargan_stat,
        sargan_p=sargan_p,
        dwh_stat=dwh_stat,
        dwh_p=dwh_p,
        robustness_value=rho,
        n_instruments=excluded.shape[1],
    )
    return estimate, diagnostics


def first_stage_partial_F(
    sample: LinkSample,
    channel_index: int,
    instrument_columns: Optional[Sequence[int]] = None,
) -> float:
    """Joint F of the excluded instruments in the first stage for one channel.

    An exact first-stage fit returns ``F_CEILING``.
    """
    y = sample.channels[:, channel_index]
    exog = sample.controls
    excluded = _excluded(sample, instrument_columns)
    full = np.column_stack([exog, excluded])
    _require_full_rank(full, "First-stage design")

    rss_restricted = _rss(y, exog)
    rss_full = _rss(y, full)
    q = excluded.shape[1]
    df = len(y) - full.shape[1]
    if rss_full <= EXACT_FIT * max(rss_restricted, 1.0):
        return F_CEILING
    f_stat = ((rss_restricted - rss_full) / q) / (rss_full / df)
    return float(min(max(f_stat, 0.0), F_CEILING))


def sargan_test(
    sample: LinkSample,
    estimate: StructuralEstimate,
    instrument_columns: Optional[Sequence[int]] = None,
) -> Tuple[float, float]:
    """T * R^2 of the 2SLS residuals on instruments and controls, chi-square(k - m)."""
    excluded = _excluded(sample, instrument_columns)
    k, m = excluded.shape[1], sample.channels.shape[1]
    if k <= m:
        raise NotOveridentified(f"{k} instruments for {m} endogenous regressors")

    resid = estimate.residuals
    if resid is None:
        resid = (
            sample.comovement
            - sample.channels @ estimate.theta
            - sample.controls @ np.array([estimate.nuisance[key] for key in ("alpha", "gamma_factor", "gamma_lag")])
        )
    Z = np.column_stack([sample.controls, excluded])
    total = float(resid @ resid)
    if total <= 0.0:
        return 0.0, 1.0
    explained = _project(Z, resid)
    stat = len(resid) * float(explained @ explained) / total
    return stat, float(stats.chi2.sf(stat, k - m))


def dwh_test(sample: LinkSample, instrument_columns: Optional[Sequence[int]] = None) -> Tuple[float, float]:
    """Control-function Durbin-Wu-Hausman test quoted as an F statistic.

    Channels the instruments reproduce exactly are exogenous by construction
    and drop out of the test; when every channel does, the result is (0, 1).
    """
    exog = sample.controls
    excluded = _excluded(sample, instrument_columns)
    Z = np.column_stack([exog, excluded])
    _require_full_rank(Z, "Instrument matrix")

    endog = sample.channels
    first_stage_resid = endog - _project(Z, endog)
    centered_endog = endog - endog.mean(axis=0)
    scale = np.maximum(np.sum(centered_endog ** 2, axis=0), 1.0)
    tested = np.sum(first_stage_resid ** 2, axis=0) > EXACT_FIT * scale
    if not tested.any():
        return 0.0, 1.0
    first_stage_resid = first_stage_resid[:, tested]
    augmented = np.column_stack([exog, endog, first_stage_resid])
    _require_full_rank(augmented, "Augmented DWH design")

    y = sample.comovement
    result = sm.OLS(y, augmented).fit()
    centered = y - y.mean()
    if result.ssr <= EXACT_FIT * max(float(centered @ centered), 1.0):
        return 0.0, 1.0

    m = first_stage_resid.shape[1]
    restriction = np.zeros((m, augmented.shape[1]))
    restriction[:, -m:] = np.eye(m)
    test = result.f_test(restriction)
    return float(np.squeeze(test.fvalue)), float(np.squeeze(test.pvalue))
