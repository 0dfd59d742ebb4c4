"""
Community structure and degree decomposition of contagion networks.
"""
