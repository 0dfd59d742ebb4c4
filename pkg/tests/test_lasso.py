import numpy as np
import pytest
from scipy import stats

from conftest import ar_channels, make_sample
from contagionforge.errors import DomainError
from contagionforge.stage2.lasso import fit_lasso_iv, lasso_select, plugin_penalty, post_double_selection


def sample_with_instruments(rng, T=600):
    channels = ar_channels(rng, T, 0.9)
    comovement = channels @ np.array([0.1, 0.8, 0.05, 0.025, 0.025]) + rng.standard_normal(T)
    return make_sample(channels, comovement)


def test_zero_penalty_selects_everything(rng):
    sample = sample_with_instruments(rng)
    assert lasso_select(sample, 1, penalty=0.0) == list(range(18))
    columns, fallback = post_double_selection(sample, penalty=0.0)
    assert columns == list(range(18))
    assert not fallback


def test_huge_penalty_falls_back(rng):
    sample = sample_with_instruments(rng)
    assert lasso_select(sample, 0, penalty=1e12) == []
    columns, fallback = post_double_selection(sample, penalty=1e12)
    assert fallback
    assert columns == list(range(18))


def test_support_recovery():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        T = 2000
        Z = rng.standard_normal((T, 18))
        channels = rng.standard_normal((T, 5))
        channels[:, 0] = Z[:, 2] + Z[:, 7] + rng.standard_normal(T)
        sample = make_sample(channels, rng.standard_normal(T), instruments=Z)
        chosen = set(lasso_select(sample, 0))
        hits += {2, 7} <= chosen
    assert hits >= 18


def test_plugin_penalty_formula():
    residual = np.array([1.0, -1.0, 1.0, -1.0])
    expected = 2.2 * np.std(residual, ddof=1) * 2.0 * stats.norm.ppf(1.0 - 0.05 / 36.0)
    assert plugin_penalty(residual, 18) == pytest.approx(expected, rel=1e-9)


def test_negative_penalty_rejected(rng):
    with pytest.raises(DomainError):
        lasso_select(sample_with_instruments(rng), None, penalty=-1.0)


def test_fit_lasso_iv_flags(rng):
    sample = sample_with_instruments(rng, T=1000)
    estimate = fit_lasso_iv(sample)
    assert estimate.method == "LASSOIV"
    assert isinstance(estimate.flags["lasso_fallback"], bool)
    assert set(estimate.flags["selected"]) <= set(sample.instrument_names)
    assert len(estimate.flags["selected"]) >= 5

    forced = fit_lasso_iv(sample, penalty=1e12)
    assert forced.flags["lasso_fallback"]
    assert len(forced.flags["selected"]) == 18
