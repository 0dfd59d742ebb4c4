"""
Stage 1: wavelet decomposition, quantile regression and transfer-entropy networks.
"""
