import warnings
from itertools import permutations
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pytest

from conftest import ar_channels, make_sample, whole_period
from contagionforge.configs.channel_configs import CHANNELS
from contagionforge.configs.estimator_configs import EstimatorConfig, get_all_estimators, get_estimator_config
from contagionforge.core.base_estimator import BaseEstimator
from contagionforge.data.synth import SynthConfig, gen_channel_dgp
from contagionforge.errors import SingularDesign
from contagionforge.stage2.estimators import (
    IVEstimator,
    LocalProjectionEstimator,
    RigobonEstimator,
    create_estimator,
    load_estimators,
)
from contagionforge.stage2.results import DiagnosticsRecord, StructuralEstimate
from contagionforge.stage2.sample import LinkSample, build_link_sample
from contagionforge.stage2.shares import aggregate_period_shares, shares


class FixedEstimator(BaseEstimator):
    """Test estimator returning a fixed coefficient vector."""

    def __init__(self, fail_on: Optional[str] = None):
        super().__init__(
            EstimatorConfig(
                method="FIXED",
                name="Fixed",
                description="A fixed estimator for unit testing",
                kind="fixed",
                output="shares_fixed.csv",
            )
        )
        self.fail_on = fail_on

    def estimate(self, sample: LinkSample, context: Dict[str, Any]) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        if sample.period == self.fail_on:
            raise SingularDesign("Test failure")
        if sample.period == "linalg":
            raise np.linalg.LinAlgError("Singular matrix")
        if sample.period == "nan":
            return StructuralEstimate(method=self.method, theta=np.full(5, np.nan)), None
        return StructuralEstimate(method=self.method, theta=np.arange(1.0, 6.0)), None

    def is_applicable(self, context: Dict[str, Any]) -> bool:
        return True


def samples(rng, periods):
    out = []
    for period in periods:
        channels = ar_channels(rng, 120)
        out.append(make_sample(channels, rng.standard_normal(120), period=period))
    return out


def test_stream_estimate_events(rng):
    estimator = FixedEstimator(fail_on="bad")
    events = list(estimator.stream_estimate(samples(rng, ["good", "bad", "linalg"]), {}))
    assert [e["type"] for e in events] == ["estimate", "skip", "skip"]
    assert events[0]["method"] == "FIXED"
    np.testing.assert_array_equal(events[0]["estimate"].theta, np.arange(1.0, 6.0))
    assert events[1]["reason"] == "SingularDesign"
    assert events[2]["reason"] == "SingularDesign"
    assert events[1]["pair"] == ("A", "B")


def test_abstract_base_cannot_be_instantiated():
    with pytest.raises(TypeError):
        BaseEstimator(get_estimator_config("iv_2sls"))


def test_registry_order_and_outputs():
    configs = get_all_estimators()
    assert [c.method for c in configs] == ["IV2SLS", "LASSOIV", "LP1", "LP5", "LP22", "RIGOBON"]
    assert {c.method for c in configs if c.votes} == {"IV2SLS", "LP5", "RIGOBON"}
    assert get_estimator_config("lp_h22").output == "shares_lp_h22.csv"
    assert [c.method for c in get_all_estimators([5])] == ["IV2SLS", "LASSOIV", "LP5", "RIGOBON"]
    with pytest.raises(KeyError):
        get_estimator_config("gmm")


def test_load_estimators():
    estimators = load_estimators([1, 5, 22])
    assert isinstance(estimators[0], IVEstimator)
    lps = [e for e in estimators if isinstance(e, LocalProjectionEstimator)]
    assert [e.horizon for e in lps] == [1, 5, 22]
    with pytest.raises(KeyError):
        create_estimator(EstimatorConfig(method="X", name="X", description="", kind="gmm", output="x.csv"))


def test_rigobon_gate():
    rigobon = create_estimator(get_estimator_config("rigobon"))
    assert isinstance(rigobon, RigobonEstimator)
    assert not rigobon.is_applicable({"rigobon_enabled": False, "regimes": object()})
    assert not rigobon.is_applicable({"rigobon_enabled": True, "regimes": None})
    assert rigobon.is_applicable({"rigobon_enabled": True, "regimes": object()})


def test_iv_estimator_runs(rng):
    estimator = create_estimator(get_estimator_config("iv_2sls"))
    events = list(estimator.stream_estimate(samples(rng, ["P"]), {}))
    assert events[0]["type"] == "estimate"
    assert events[0]["diagnostics"].first_stage_F.shape == (5,)


def test_config_keeps_extra_fields_without_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        config = EstimatorConfig(method="X", name="x", description="", kind="iv", output="x.csv", weight=2)
    assert config.weight == 2
    assert not config.votes


def test_non_finite_estimate_is_skipped(rng):
    events = list(FixedEstimator().stream_estimate(samples(rng, ["nan", "good"]), {}))
    assert [e["type"] for e in events] == ["skip", "estimate"]
    assert events[0]["reason"] == "DomainError"


@pytest.mark.slow
def test_dominant_channel_recovered_across_seeds():
    estimators = [e for e in load_estimators([1]) if e.method in ("IV2SLS", "LP1")]
    hits = 0
    for seed in range(50):
        returns, channels, _ = gen_channel_dgp(SynthConfig(n_markets=4, T=3000, seed=seed))
        period = whole_period(returns.dates)
        samples = [
            build_link_sample(returns.returns[a], returns.returns[b], channels, period)
            for a, b in permutations(returns.market_ids, 2)
        ]
        dominant = {}
        for estimator in estimators:
            events = estimator.stream_estimate(samples, {})
            link_shares = [shares(e["estimate"]) for e in events if e["type"] == "estimate"]
            assert all(abs(s.sum() - 1.0) <= 1e-12 for s in link_shares)
            pooled = aggregate_period_shares(link_shares)
            assert abs(pooled.sum() - 1.0) <= 1e-12
            dominant[estimator.method] = CHANNELS[int(np.argmax(pooled))]
        hits += dominant == {"IV2SLS": "Financial", "LP1": "Financial"}
    assert hits >= 45
