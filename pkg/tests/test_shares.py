from itertools import product

import numpy as np
import pytest

from conftest import ar_channels, make_sample
from contagionforge.configs.channel_configs import CHANNELS
from contagionforge.errors import DegenerateBootstrap, DomainError, InsufficientData, UndefinedShares
from contagionforge.stage2.iv import fit_2sls
from contagionforge.stage2.results import ShareTable, StructuralEstimate
from contagionforge.stage2.shares import aggregate_period_shares, bootstrap_shares, robustness_value, shares


def test_shares_examples():
    np.testing.assert_allclose(shares(np.ones(5)), 0.2)
    np.testing.assert_allclose(shares([1.0, -3.0, 0.0, 0.0, 0.0]), [0.25, 0.75, 0.0, 0.0, 0.0])
    estimate = StructuralEstimate(method="IV2SLS", theta=[0.0, 2.0, 0.0, 0.0, 2.0])
    np.testing.assert_allclose(shares(estimate), [0.0, 0.5, 0.0, 0.0, 0.5])


def test_all_zero_theta_has_no_shares():
    with pytest.raises(UndefinedShares):
        shares(np.zeros(5))


def test_reported_shares_pick_financial():
    table = ShareTable()
    table.add("IV2SLS", [0.088, 0.359, 0.094, 0.138, 0.321])
    assert table.dominant("IV2SLS") == "Financial"
    assert table.dominants() == {"IV2SLS": "Financial"}


def test_estimate_rejects_bad_theta():
    with pytest.raises(DomainError):
        StructuralEstimate(method="IV2SLS", theta=[1.0, 2.0])
    with pytest.raises(DomainError):
        StructuralEstimate(method="IV2SLS", theta=[1.0, np.nan, 0.0, 0.0, 0.0])


def test_aggregate_examples():
    one = np.array([0.1, 0.2, 0.3, 0.2, 0.2])
    np.testing.assert_allclose(aggregate_period_shares([one]), one)
    two = aggregate_period_shares([np.eye(5)[0], np.eye(5)[1]])
    np.testing.assert_allclose(two, [0.5, 0.5, 0.0, 0.0, 0.0])
    with pytest.raises(InsufficientData):
        aggregate_period_shares([])
    with pytest.raises(DomainError):
        aggregate_period_shares([np.ones(3)])


def test_aggregate_is_order_free(rng):
    links = [shares(rng.standard_normal(5)) for _ in range(40)]
    forward = aggregate_period_shares(links)
    backward = aggregate_period_shares(links[::-1])
    assert np.array_equal(forward, backward)
    assert forward.sum() == pytest.approx(1.0, abs=1e-12)


def test_bootstrap_identical_links_zero_width():
    link = np.array([0.1, 0.4, 0.2, 0.2, 0.1])
    ci = bootstrap_shares([link] * 6, replications=50, seed=1)
    np.testing.assert_allclose(ci.lower, link)
    np.testing.assert_allclose(ci.upper, link)
    assert not ci.degenerate


def test_bootstrap_is_deterministic_across_threads(rng):
    links = [shares(rng.standard_normal(5)) for _ in range(12)]
    a = bootstrap_shares(links, replications=200, seed=7)
    b = bootstrap_shares(links, replications=200, seed=7, threads=4)
    assert np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper)
    c = bootstrap_shares(links, replications=200, seed=8)
    assert not np.array_equal(a.lower, c.lower) or not np.array_equal(a.upper, c.upper)


def test_bootstrap_two_links_within_convex_hull():
    first = np.array([0.6, 0.1, 0.1, 0.1, 0.1])
    second = np.array([0.0, 0.5, 0.2, 0.3, 0.0])
    ci = bootstrap_shares([first, second], replications=300, seed=3)
    links = [first, second]
    possible = np.vstack([aggregate_period_shares([links[i] for i in pick]) for pick in product([0, 1], repeat=2)])
    assert np.all(ci.lower >= possible.min(axis=0) - 1e-12)
    assert np.all(ci.upper <= possible.max(axis=0) + 1e-12)
    assert np.all(ci.lower <= ci.point + 1e-12) and np.all(ci.point <= ci.upper + 1e-12)


def test_bootstrap_single_link():
    link = np.array([0.2, 0.2, 0.2, 0.2, 0.2])
    ci = bootstrap_shares([link], replications=10)
    assert ci.degenerate
    np.testing.assert_array_equal(ci.lower, ci.upper)
    with pytest.raises(DegenerateBootstrap):
        bootstrap_shares([link], strict=True)


def test_robustness_value_examples():
    assert robustness_value(0.0, 100) == 0.0
    assert robustness_value(10.0, 100) == pytest.approx((np.sqrt(5.0) - 1.0) / 2.0)
    assert robustness_value(np.inf, 100) == 1.0
    with pytest.raises(DomainError):
        robustness_value(1.0, 0)


def test_robustness_value_matches_closed_form_and_increases():
    grid = np.linspace(0.1, 20.0, 200)
    values = [robustness_value(t, 50) for t in grid]
    assert np.all(np.diff(values) > 0)
    for t in (0.5, 3.0, 12.0):
        f = t / np.sqrt(50)
        assert robustness_value(t, 50) == pytest.approx((np.sqrt(f ** 4 + 4 * f ** 2) - f ** 2) / 2)
    assert robustness_value(-3.0, 50) == robustness_value(3.0, 50)


def test_channel_order():
    assert CHANNELS == ["Trade", "Financial", "Geopolitical", "Behavioural", "Monetary"]


def test_shares_ignore_comovement_units(rng):
    T = 600
    channels = ar_channels(rng, T)
    comovement = channels @ np.array([0.1, 0.6, 0.05, 0.2, 0.05]) + rng.standard_normal(T)
    sample = make_sample(channels, comovement)
    base, _ = fit_2sls(sample)
    rescaled, _ = fit_2sls(sample.with_comovement(1e-4 * sample.comovement, 1e-4 * sample.comovement_lag))
    np.testing.assert_allclose(shares(rescaled), shares(base), rtol=1e-8)
