"""
ContagionForge: wavelet-quantile contagion detection and structural channel attribution.
"""

__version__ = "0.1.0"
