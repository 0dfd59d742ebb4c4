"""
Concrete estimators behind the ESTIMATOR_CONFIGS registry.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple, Type

from ..configs.estimator_configs import EstimatorConfig, get_all_estimators
from ..core.base_estimator import BaseEstimator
from .iv import fit_2sls
from .lasso import fit_lasso_iv
from .local_projection import fit_local_projection
from .results import DiagnosticsRecord, StructuralEstimate
from .rigobon import fit_rigobon
from .sample import LinkSample

logger = logging.getLogger(__name__)


class IVEstimator(BaseEstimator):
    def estimate(self, sample: LinkSample, context: Dict[str, Any]) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        return fit_2sls(sample, method=self.method)

    def is_applicable(self, context: Dict[str, Any]) -> bool:
        return True


class LassoIVEstimator(BaseEstimator):
    def estimate(self, sample: LinkSample, context: Dict[str, Any]) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        return fit_lasso_iv(sample, penalty=context.get("lasso_penalty")), None

    def is_applicable(self, context: Dict[str, Any]) -> bool:
        return True


class LocalProjectionEstimator(BaseEstimator):
    def __init__(self, config: EstimatorConfig):
        super().__init__(config)
        if config.horizon is None:
            raise ValueError(f"Local projection '{config.name}' needs a horizon")
        self.horizon = config.horizon

    def estimate(self, sample: LinkSample, context: Dict[str, Any]) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        return fit_local_projection(sample, self.horizon), None

    def is_applicable(self, context: Dict[str, Any]) -> bool:
        return True


class RigobonEstimator(BaseEstimator):
    def estimate(self, sample: LinkSample, context: Dict[str, Any]) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        return fit_rigobon(sample, context["regimes"]), None

    def is_applicable(self, context: Dict[str, Any]) -> bool:
        """Runs when the period's Sargan rejection rate passed the gate, or when forced."""
        return bool(context.get("rigobon_enabled")) and context.get("regimes") is not None


ESTIMATOR_CLASSES: Dict[str, Type[BaseEstimator]] = {
    "iv": IVEstimator,
    "lasso": LassoIVEstimator,
    "lp": LocalProjectionEstimator,
    "rigobon": RigobonEstimator,
}


def create_estimator(config: EstimatorConfig) -> BaseEstimator:
    if config.kind not in ESTIMATOR_CLASSES:
        raise KeyError(f"No estimator class for kind '{config.kind}'")
    return ESTIMATOR_CLASSES[config.kind](config)


def load_estimators(horizons: Optional[List[int]] = None) -> List[BaseEstimator]:
    """Instantiate every registered estimator in reporting order."""
    estimators = [create_estimator(config) for config in get_all_estimators(horizons)]
    logger.debug(f"Loaded {len(estimators)} estimators: {', '.join(e.method for e in estimators)}")
    return estimators
