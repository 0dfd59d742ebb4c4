import numpy as np
import pytest
import statsmodels.api as sm

from conftest import ar_channels, make_sample
from contagionforge.errors import IdentificationError, NotOveridentified, SingularDesign
from contagionforge.stage2.iv import F_CEILING, dwh_test, first_stage_partial_F, fit_2sls, sargan_test


def exogenous_sample(rng, T=600, theta=(0.2, 1.0, 0.0, -0.3, 0.1), noise=1.0, ar=0.9):
    channels = ar_channels(rng, T, ar)
    comovement = channels @ np.asarray(theta) + noise * rng.standard_normal(T)
    return make_sample(channels, comovement, factor=rng.standard_normal(T))


def endogenous_sample(rng, T=1500, strength=0.8):
    channels = ar_channels(rng, T, 0.9)
    shock = rng.standard_normal(T)
    channels[:, 0] += strength * shock
    comovement = channels[:, 0] + shock + 0.5 * rng.standard_normal(T)
    return make_sample(channels, comovement, factor=rng.standard_normal(T))


def test_just_identified_equals_ols(rng):
    T = 400
    channels = ar_channels(rng, T)
    comovement = channels @ np.array([0.5, -1.0, 0.2, 0.0, 0.3]) + rng.standard_normal(T)
    sample = make_sample(channels, comovement, instruments=channels)
    estimate, diagnostics = fit_2sls(sample)
    ols = sm.OLS(sample.comovement, np.column_stack([sample.controls, sample.channels])).fit()
    np.testing.assert_allclose(estimate.theta, ols.params[3:], atol=1e-10)
    assert estimate.nuisance["alpha"] == pytest.approx(ols.params[0], abs=1e-10)
    assert diagnostics.sargan_stat is None and diagnostics.sargan_p is None
    assert (diagnostics.dwh_stat, diagnostics.dwh_p) == (0.0, 1.0)
    assert diagnostics.n_instruments == 5


def test_just_identified_never_fails():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        channels = ar_channels(rng, 300)
        sample = make_sample(channels, rng.standard_normal(300), instruments=channels)
        estimate, diagnostics = fit_2sls(sample)
        assert np.all(np.isfinite(estimate.theta))
        assert dwh_test(sample) == (0.0, 1.0)


def test_dwh_ignores_exactly_instrumented_channels(rng):
    T = 800
    channels = ar_channels(rng, T)
    extra = rng.standard_normal((T, 5))
    instruments = np.column_stack([channels[:, :2], extra])
    sample = make_sample(channels, channels @ np.full(5, 0.3) + rng.standard_normal(T), instruments=instruments)
    stat, p = dwh_test(sample)
    assert np.isfinite(stat)
    assert 0.0 <= p <= 1.0


def test_noiseless_structural_equation(rng):
    T = 500
    channels = ar_channels(rng, T)
    sample = make_sample(channels, 2.0 * channels[:, 0])
    estimate, diagnostics = fit_2sls(sample)
    assert estimate.theta[0] == pytest.approx(2.0, abs=1e-8)
    np.testing.assert_allclose(estimate.theta[1:], 0.0, atol=1e-8)
    assert estimate.method == "IV2SLS"
    assert diagnostics.dwh_stat == pytest.approx(0.0, abs=1e-8)


def test_2sls_reduces_endogeneity_bias():
    iv_bias, ols_bias = [], []
    for seed in range(30):
        sample = endogenous_sample(np.random.default_rng(seed))
        estimate, _ = fit_2sls(sample)
        ols = sm.OLS(sample.comovement, np.column_stack([sample.controls, sample.channels])).fit()
        iv_bias.append(abs(estimate.theta[0] - 1.0))
        ols_bias.append(abs(ols.params[3] - 1.0))
    assert np.median(iv_bias) < np.median(ols_bias)


def test_diagnostics_shapes(rng):
    estimate, diagnostics = fit_2sls(exogenous_sample(rng))
    assert diagnostics.first_stage_F.shape == (5,)
    assert diagnostics.robustness_value.shape == (5,)
    assert np.all((diagnostics.robustness_value >= 0) & (diagnostics.robustness_value <= 1))
    assert 0.0 <= diagnostics.sargan_p <= 1.0
    assert 0.0 <= diagnostics.dwh_p <= 1.0
    assert estimate.cov.shape == (5, 5)
    assert estimate.dof == len(estimate.residuals) - 8


def test_strong_first_stage():
    rng = np.random.default_rng(3)
    T = 1000
    channels = ar_channels(rng, T, ar=0.0)
    instruments = rng.standard_normal((T, 10))
    channels[:, 1] = 3.0 * instruments[:, 4] + rng.standard_normal(T)
    sample = make_sample(channels, channels @ np.full(5, 0.2) + rng.standard_normal(T), instruments=instruments)
    assert first_stage_partial_F(sample, 1) > 100
    assert first_stage_partial_F(sample, 0) < 10


def test_irrelevant_instruments_have_unit_mean_F():
    values = []
    for seed in range(100):
        sample = exogenous_sample(np.random.default_rng(seed), T=300, ar=0.0)
        values.append(first_stage_partial_F(sample, 2))
    assert 0.7 < np.mean(values) < 1.3


def test_exact_instrument_hits_ceiling(rng):
    T = 300
    channels = ar_channels(rng, T)
    instruments = np.column_stack([channels, rng.standard_normal((T, 3))])
    sample = make_sample(channels, rng.standard_normal(T), instruments=instruments)
    assert first_stage_partial_F(sample, 0) == F_CEILING


def test_sargan_requires_overidentification(rng):
    T = 300
    channels = ar_channels(rng, T)
    sample = make_sample(channels, rng.standard_normal(T), instruments=channels)
    estimate, _ = fit_2sls(sample)
    with pytest.raises(NotOveridentified):
        sargan_test(sample, estimate)
    with pytest.raises(NotOveridentified):
        fit_2sls(sample, sargan_required=True)


def test_sargan_size():
    rejections = 0
    draws = 200
    for seed in range(draws):
        _, diagnostics = fit_2sls(exogenous_sample(np.random.default_rng(seed), T=500))
        rejections += diagnostics.sargan_rejects(0.05)
    assert 0.01 <= rejections / draws <= 0.10


def test_sargan_power_against_invalid_instrument():
    rejections = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        T = 2000
        channels = ar_channels(rng, T)
        base = make_sample(channels, np.zeros(T))
        invalid = base.instruments[:, 4]
        comovement = base.channels @ np.array([0.5, 0.5, 0.0, 0.0, 0.0]) + invalid + rng.standard_normal(len(base))
        _, diagnostics = fit_2sls(base.with_comovement(comovement, np.concatenate([[0.0], comovement[:-1]])))
        rejections += diagnostics.sargan_rejects(0.05)
    assert rejections > 10


def test_dwh_size_under_exogeneity():
    rejections = 0
    draws = 200
    for seed in range(draws):
        _, p = dwh_test(exogenous_sample(np.random.default_rng(1000 + seed), T=1500))
        rejections += p < 0.05
    assert 0.01 <= rejections / draws <= 0.10


def test_dwh_power_against_endogeneity():
    rejections = 0
    for seed in range(20):
        stat, p = dwh_test(endogenous_sample(np.random.default_rng(seed), T=1500, strength=1.5))
        rejections += p < 0.05
    assert rejections >= 18


def test_identification_and_rank_errors(rng):
    sample = exogenous_sample(rng, T=300)
    with pytest.raises(IdentificationError):
        fit_2sls(sample, instrument_columns=[0, 1, 2])
    duplicated = make_sample(
        sample.channels, sample.comovement, instruments=np.column_stack([sample.channels, sample.channels[:, 0]]), trim=0
    )
    with pytest.raises(SingularDesign):
        fit_2sls(duplicated)
