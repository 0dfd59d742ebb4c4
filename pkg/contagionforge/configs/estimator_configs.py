"""
Stage-2 identification methods available to the pipeline.
Each entry names the estimator class that fits it and the output file its
period shares are written to.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict


class EstimatorConfig(BaseModel):
    model_config = ConfigDict(extra="allow")

    method: str
    name: str
    description: str
    kind: str
    output: str
    horizon: Optional[int] = None
    votes: bool = False


ESTIMATOR_CONFIGS: Dict[str, Dict[str, Any]] = {
    "iv_2sls": {
        "method": "IV2SLS",
        "name": "IV/2SLS",
        "description": "Two-stage least squares on the lagged-channel instrument set",
        "kind": "iv",
        "output": "shares_iv.csv",
        "votes": True,
    },
    "lasso_iv": {
        "method": "LASSOIV",
        "name": "LASSO-IV",
        "description": "2SLS on the post-double-selection LASSO instrument set",
        "kind": "lasso",
        "output": "shares_lasso.csv",
    },
    "lp_h1": {
        "method": "LP1",
        "name": "Local projection h=1",
        "description": "Channel impulse response one day ahead",
        "kind": "lp",
        "horizon": 1,
        "output": "shares_lp_h1.csv",
    },
    "lp_h5": {
        "method": "LP5",
        "name": "Local projection h=5",
        "description": "Channel impulse response one week ahead",
        "kind": "lp",
        "horizon": 5,
        "output": "shares_lp_h5.csv",
        "votes": True,
    },
    "lp_h22": {
        "method": "LP22",
        "name": "Local projection h=22",
        "description": "Channel impulse response one month ahead",
        "kind": "lp",
        "horizon": 22,
        "output": "shares_lp_h22.csv",
    },
    "rigobon": {
        "method": "RIGOBON",
        "name": "Rigobon",
        "description": "Identification through the high/low volatility regime shift",
        "kind": "rigobon",
        "output": "shares_rigobon.csv",
        "votes": True,
    },
}


def get_estimator_config(estimator_id: str) -> EstimatorConfig:
    if estimator_id not in ESTIMATOR_CONFIGS:
        raise KeyError(f"Unknown estimator '{estimator_id}'. Available: {', '.join(ESTIMATOR_CONFIGS)}")
    return EstimatorConfig(**ESTIMATOR_CONFIGS[estimator_id])


def get_all_estimators(horizons: Optional[List[int]] = None) -> List[EstimatorConfig]:
    """Estimator configs in reporting order, local projections restricted to ``horizons``."""
    configs = [EstimatorConfig(**c) for c in ESTIMATOR_CONFIGS.values()]
    if horizons is None:
        return configs
    return [c for c in configs if c.kind != "lp" or c.horizon in horizons]
