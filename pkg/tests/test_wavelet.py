import numpy as np
import pytest

from conftest import make_returns
from contagionforge.errors import DomainError, InsufficientData
from contagionforge.stage1.wavelet import modwt, modwt_panel, scaling_filter, wavelet_filter


def test_constant_series_has_zero_details():
    decomp = modwt(np.full(256, 3.5), levels=6)
    np.testing.assert_allclose(decomp.details, 0.0, atol=1e-10)
    np.testing.assert_allclose(decomp.smooth, 3.5, atol=1e-10)


@pytest.mark.parametrize("filter_id", ["LA8", "D4", "LA16", "D8"])
def test_mra_is_additive(rng, filter_id):
    x = rng.standard_normal(500)
    decomp = modwt(x, levels=6, filter_id=filter_id)
    np.testing.assert_allclose(decomp.reconstruct(), x, atol=1e-10)


def test_energy_is_preserved(rng):
    x = rng.standard_normal(1024)
    decomp = modwt(x, levels=6)
    energy = np.sum(decomp.wavelet_coefs ** 2) + np.sum(decomp.scaling_coefs ** 2)
    assert energy == pytest.approx(np.sum(x ** 2), rel=1e-8)


def test_circular_shift_equivariance(rng):
    x = rng.standard_normal(300)
    base = modwt(x, levels=5)
    shifted = modwt(np.roll(x, 7), levels=5)
    np.testing.assert_allclose(shifted.details, np.roll(base.details, 7, axis=1), atol=1e-10)


def test_filters_are_orthonormal():
    g = scaling_filter("LA8")
    h = wavelet_filter(g)
    assert g.sum() == pytest.approx(np.sqrt(2.0))
    assert h.sum() == pytest.approx(0.0, abs=1e-12)
    assert g @ g == pytest.approx(1.0)


def test_invalid_inputs():
    with pytest.raises(InsufficientData):
        modwt(np.ones(40), levels=6)
    with pytest.raises(DomainError):
        modwt(np.array([1.0, np.nan] * 64), levels=3)
    with pytest.raises(DomainError):
        scaling_filter("no-such-filter")


def test_panel_decomposes_every_market(rng):
    panel = make_returns(rng.standard_normal((200, 2)))
    decomps = modwt_panel(panel, levels=6)
    assert list(decomps) == ["M1", "M2"]
    assert decomps["M1"].detail(5).shape == (200,)


def test_panel_of_constants():
    decomps = modwt_panel(make_returns(np.ones((128, 3))), levels=4)
    for decomp in decomps.values():
        np.testing.assert_allclose(decomp.details, 0.0, atol=1e-10)


def test_audit_frame_columns(rng):
    panel = make_returns(rng.standard_normal((128, 2)))
    frame = modwt(panel.returns["M1"].to_numpy(), levels=3).to_frame(panel.dates)
    assert list(frame.columns) == ["d1", "d2", "d3", "smooth"]
    assert frame.index.name == "date"


def test_decomposition_is_linear(rng):
    x, y = rng.standard_normal((2, 512))
    combined = modwt(2.5 * x - 0.7 * y, levels=6)
    first, second = modwt(x, levels=6), modwt(y, levels=6)
    np.testing.assert_allclose(combined.details, 2.5 * first.details - 0.7 * second.details, atol=1e-10)
    np.testing.assert_allclose(combined.smooth, 2.5 * first.smooth - 0.7 * second.smooth, atol=1e-10)
