"""
Local projections of future co-movement on today's channels.
"""

import logging

import numpy as np
import statsmodels.api as sm

from ..configs.channel_configs import CHANNELS
from ..errors import DomainError, InsufficientData, SingularDesign
from .results import StructuralEstimate
from .sample import LinkSample

logger = logging.getLogger(__name__)

DEFAULT_HORIZONS = (1, 5, 22)
MIN_EXTRA_ROWS = 20


def fit_local_projection(sample: LinkSample, horizon: int) -> StructuralEstimate:
    """OLS of C_{t+h} on the five channels and controls at t; Newey-West with bandwidth h."""
    if horizon < 1:
        raise DomainError(f"Horizon must be positive, got {horizon}")
    n = len(sample)
    if n <= horizon + MIN_EXTRA_ROWS:
        raise InsufficientData(f"Local projection h={horizon} needs more than {horizon + MIN_EXTRA_ROWS} rows, got {n}")

    y = sample.comovement[horizon:]
    exog = sample.controls[:-horizon]
    X = np.column_stack([exog, sample.channels[:-horizon]])
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign(f"Local projection design at h={horizon} is rank deficient")

    result = sm.OLS(y, X).fit(cov_type="HAC", cov_kwds={"maxlags": horizon})
    k = exog.shape[1]
    params = np.asarray(result.params)
    cov = np.asarray(result.cov_params())
    return StructuralEstimate(
        method=f"LP{horizon}",
        theta=params[k:k + len(CHANNELS)],
        nuisance={"alpha": float(params[0]), "gamma_factor": float(params[1]), "gamma_lag": float(params[2])},
        cov=cov[k:, k:],
        dof=int(result.df_resid),
        residuals=np.asarray(result.resid),
    )
