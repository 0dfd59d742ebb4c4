"""
Maximal-overlap discrete wavelet transform (MODWT) and its additive
multiresolution analysis, with circular boundary handling.

The transform is evaluated in the frequency domain: the level-j MODWT
wavelet filter has transfer function
``H_j(f) = H(2^{j-1} f) * prod_{m<j-1} G(2^m f)`` with ``H, G`` the
rescaled (1/sqrt 2) wavelet and scaling filters, so coefficients and MRA
components are single FFT products. Circular filtering makes additivity,
energy preservation and shift-equivariance exact up to rounding.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd
import pywt

from ..data.ingest import ReturnPanel
from ..errors import DomainError, InsufficientData

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = 6
DEFAULT_FILTER = "LA8"

# Orthonormal scaling filters (sum = sqrt 2), Percival & Walden ordering.
_HARD_CODED_FILTERS: Dict[str, np.ndarray] = {
    "LA8": np.array([
        -0.0757657147893407, -0.0296355276459541, 0.4976186676324578, 0.8037387518052163,
        0.2978577956055422, -0.0992195435769354, -0.0126039672622612, 0.0322231006040713,
    ]),
    "D4": np.array([0.4829629131445341, 0.8365163037378079, 0.2241438680420134, -0.1294095225512604]),
}

# Friendly aliases resolved through PyWavelets.
_PYWT_ALIASES: Dict[str, str] = {
    "LA16": "sym8",
    "D8": "db4",
    "HAAR": "haar",
}


@dataclass(frozen=True)
class WaveletDecomposition:
    """MRA of one series: ``details.sum(axis=0) + smooth == x``."""

    details: np.ndarray          # (levels, T) MRA detail series d_1..d_J
    smooth: np.ndarray           # (T,) level-J smooth
    wavelet_coefs: np.ndarray    # (levels, T) MODWT wavelet coefficients W_j
    scaling_coefs: np.ndarray    # (T,) MODWT scaling coefficients V_J
    filter_id: str = DEFAULT_FILTER
    levels: int = DEFAULT_LEVELS

    def detail(self, scale: int) -> np.ndarray:
        """Detail series for scale ``s`` in 1..levels."""
        if not 1 <= scale <= self.levels:
            raise DomainError(f"Scale {scale} outside 1..{self.levels}")
        return self.details[scale - 1]

    def reconstruct(self) -> np.ndarray:
        return self.details.sum(axis=0) + self.smooth

    def to_frame(self, dates: Optional[pd.DatetimeIndex] = None) -> pd.DataFrame:
        """Audit table ``date,d1..dJ,smooth``."""
        columns = {f"d{j + 1}": self.details[j] for j in range(self.levels)}
        columns["smooth"] = self.smooth
        frame = pd.DataFrame(columns, index=dates)
        if dates is not None:
            frame.index.name = "date"
        return frame


def scaling_filter(filter_id: str = DEFAULT_FILTER) -> np.ndarray:
    """Orthonormal scaling filter ``g`` for a registry name or PyWavelets name."""
    key = filter_id.upper()
    if key in _HARD_CODED_FILTERS:
        return _HARD_CODED_FILTERS[key].copy()
    name = _PYWT_ALIASES.get(key, filter_id)
    try:
        wavelet = pywt.Wavelet(name)
    except ValueError:
        raise DomainError(f"Unknown wavelet filter '{filter_id}'")
    if not wavelet.orthogonal:
        raise DomainError(f"Wavelet '{filter_id}' is not an orthogonal filter bank")
    return np.asarray(wavelet.rec_lo, dtype=float)


def wavelet_filter(g: np.ndarray) -> np.ndarray:
    """Quadrature-mirror wavelet filter ``h_l = (-1)^l g_{L-1-l}``."""
    signs = np.where(np.arange(len(g)) % 2 == 0, 1.0, -1.0)
    return signs * g[::-1]


def _transfer(taps: np.ndarray, n: int, stride: int) -> np.ndarray:
    """DFT of ``taps`` placed every ``stride`` samples on a circle of length n."""
    k = np.arange(n)[:, None]
    lags = (np.arange(len(taps)) * stride)[None, :]
    return np.exp(-2j * np.pi * ((k * lags) % n) / n) @ taps


def _level_transfers(n: int, levels: int, filter_id: str):
    g = scaling_filter(filter_id) / np.sqrt(2.0)
    h = wavelet_filter(g)
    wavelet_tf = []
    running = np.ones(n, dtype=complex)
    for j in range(1, levels + 1):
        stride = 2 ** (j - 1)
        wavelet_tf.append(running * _transfer(h, n, stride))
        running = running * _transfer(g, n, stride)
    return wavelet_tf, running


def modwt(x: np.ndarray, levels: int = DEFAULT_LEVELS, filter_id: str = DEFAULT_FILTER) -> WaveletDecomposition:
    """MODWT coefficients and MRA of ``x`` with circular boundaries."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError("modwt expects a one-dimensional series")
    if levels < 1:
        raise DomainError(f"levels must be >= 1, got {levels}")
    if not np.all(np.isfinite(x)):
        raise DomainError("modwt input contains non-finite values")
    n = len(x)
    if n < 2 ** levels:
        raise InsufficientData(f"Series length {n} shorter than 2^{levels}")

    spectrum = np.fft.fft(x)
    wavelet_tf, scaling_tf = _level_transfers(n, levels, filter_id)

    coefs = np.empty((levels, n))
    details = np.empty((levels, n))
    for j, tf in enumerate(wavelet_tf):
        coefs[j] = np.fft.ifft(tf * spectrum).real
        details[j] = np.fft.ifft((tf.real ** 2 + tf.imag ** 2) * spectrum).real
    scaling = np.fft.ifft(scaling_tf * spectrum).real
    smooth = np.fft.ifft((scaling_tf.real ** 2 + scaling_tf.imag ** 2) * spectrum).real

    return WaveletDecomposition(
        details=details,
        smooth=smooth,
        wavelet_coefs=coefs,
        scaling_coefs=scaling,
        filter_id=filter_id.upper(),
        levels=levels,
    )


def modwt_panel(
    panel: ReturnPanel,
    levels: int = DEFAULT_LEVELS,
    filter_id: str = DEFAULT_FILTER,
) -> Dict[str, WaveletDecomposition]:
    """One decomposition per market, in panel column order."""
    decomps: Dict[str, WaveletDecomposition] = {}
    for market in panel.market_ids:
        try:
            decomps[market] = modwt(panel.returns[market].to_numpy(), levels=levels, filter_id=filter_id)
        except (DomainError, InsufficientData) as e:
            raise e.with_context(market=market)
    logger.debug(f"Decomposed {len(decomps)} markets into {levels} MODWT levels ({filter_id})")
    return decomps
