import json

import numpy as np
import pandas as pd
import pytest

from contagionforge.configs.channel_configs import CHANNELS
from contagionforge.data.ingest import (
    SubPeriod,
    build_channels,
    compute_log_returns,
    load_channel_csv,
    load_market_classes,
    load_price_csv,
)
from contagionforge.data.synth import (
    SynthConfig,
    equal_schedule,
    gen_channel_dgp,
    gen_directional_pair,
    population_theta,
    write_fixture,
)
from contagionforge.errors import DomainError


def small(**kwargs):
    return SynthConfig(**{"n_markets": 4, "T": 400, "coupling": [(0, 1, 0.6, 3)], **kwargs})


@pytest.mark.parametrize(
    "bad",
    [
        {"channel_ar": [1.0, 0.5, 0.5, 0.5, 0.5]},
        {"channel_ar": [0.5]},
        {"comovement_weights": [0.0] * 5},
        {"comovement_weights": [-0.1, 0.5, 0.2, 0.2, 0.2]},
        {"loadings": [[1.0] * 5]},
        {"coupling": [(0, 0, 0.5, 2)]},
        {"coupling": [(0, 9, 0.5, 2)]},
        {"n_periods": 0},
        {"n_periods": 41},
        {"noise": "student_t", "t_df": 2.0},
    ],
)
def test_invalid_settings_raise(bad):
    with pytest.raises(DomainError):
        small(**bad)


def test_same_seed_same_panels():
    first_returns, first_channels, _ = gen_channel_dgp(small(seed=4))
    second_returns, second_channels, _ = gen_channel_dgp(small(seed=4))
    pd.testing.assert_frame_equal(first_returns.returns, second_returns.returns)
    pd.testing.assert_frame_equal(first_channels.channels, second_channels.channels)
    other, _, _ = gen_channel_dgp(small(seed=5))
    assert not np.allclose(other.returns.to_numpy(), first_returns.returns.to_numpy())


def test_channels_are_standardized():
    _, channels, _ = gen_channel_dgp(small())
    assert list(channels.channels.columns) == CHANNELS
    np.testing.assert_allclose(channels.channels.mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(channels.channels.std(ddof=1), 1.0, rtol=1e-12)
    assert channels.global_factor is not None


def test_zero_loadings_have_no_signal():
    config = small(loadings=[[0.0] * 5] * 4)
    _, _, truth = gen_channel_dgp(config)
    assert truth.dominant_channel is None
    assert all(np.all(theta == 0.0) for theta in truth.theta.values())


def test_single_weight_picks_its_channel():
    config = small(comovement_weights=[0.0, 1.0, 0.0, 0.0, 0.0])
    _, _, truth = gen_channel_dgp(config)
    assert truth.dominant_channel == "Financial"
    theta = truth.theta["M01->M02"]
    assert theta[1] == pytest.approx(config.variance_loading)
    assert np.count_nonzero(theta) == 1


def test_theta_proportional_to_weights():
    config = small()
    theta = population_theta(config)
    weights = np.asarray(config.comovement_weights)
    assert len(theta) == 4 * 3
    np.testing.assert_allclose(theta["M02->M03"], config.variance_loading * weights / weights.sum())


def test_market_classes_split_in_half():
    assert small().market_classes() == {"M01": "advanced", "M02": "advanced", "M03": "emerging", "M04": "emerging"}


def test_equal_schedule():
    dates = pd.bdate_range("2020-01-01", periods=10)
    schedule = equal_schedule(dates, 3)
    assert [p.name for p in schedule] == ["P1", "P2", "P3"]
    assert schedule[0].start == dates[0].date()
    assert schedule[-1].end == dates[-1].date()
    with pytest.raises(DomainError):
        equal_schedule(dates, 11)


def test_default_coupling_follows_market_count():
    assert SynthConfig(n_markets=4).coupling == [(0, 1, 0.6, 5), (2, 3, 0.6, 5)]
    assert SynthConfig(n_markets=5).coupling == [(0, 1, 0.6, 5), (2, 3, 0.6, 5)]
    assert SynthConfig().coupling == [(0, 1, 0.6, 5), (2, 3, 0.6, 5), (4, 5, 0.6, 5)]
    with pytest.raises(DomainError, match="out of range"):
        small(coupling=[(0, 4, 0.5, 2)])


def test_behavioural_orthogonal_to_financial_per_period():
    config = small(seed=6, n_periods=4)
    _, channels, _ = gen_channel_dgp(config)
    frame = channels.channels
    for period in equal_schedule(frame.index, 4):
        inside = frame[period.contains(frame.index)]
        assert abs(np.corrcoef(inside["Behavioural"], inside["Financial"])[0, 1]) < 1e-10


def test_fixture_round_trips_through_ingest(tmp_path):
    config = small(seed=2, n_periods=2)
    paths = write_fixture(config, str(tmp_path))
    assert sorted(paths) == ["channels.csv", "classes.csv", "config.json", "prices.csv", "truth.json"]

    classes = load_market_classes(paths["classes.csv"])
    returns = compute_log_returns(load_price_csv(paths["prices.csv"], classes))
    expected, expected_channels, _ = gen_channel_dgp(config)
    assert returns.returns.shape == (400, 4)
    np.testing.assert_allclose(returns.returns.to_numpy(), expected.returns.to_numpy(), atol=1e-8)

    pipeline = json.loads((tmp_path / "config.json").read_text())
    assert pipeline["prices_path"] == "prices.csv"
    assert [p["name"] for p in pipeline["schedule"]] == ["P1", "P2"]

    schedule = [SubPeriod(**p) for p in pipeline["schedule"]]
    rebuilt = build_channels(load_channel_csv(paths["channels.csv"]), schedule, returns.dates)
    for channel in CHANNELS:
        np.testing.assert_allclose(
            rebuilt.channels[channel].to_numpy(), expected_channels.channels[channel].to_numpy(), atol=1e-6
        )
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth["dominant_channel"] == "Financial"
    assert truth["edges"] == [{"source": "M01", "target": "M02", "strength": 0.6, "scale": 3}]


def test_directional_pair():
    x, y = gen_directional_pair(0.8, 600, seed=1)
    assert x.shape == y.shape == (600,)
    assert np.corrcoef(x[:-1], y[1:])[0, 1] > 0.3
    with pytest.raises(DomainError):
        gen_directional_pair(0.8, 499, seed=1)
