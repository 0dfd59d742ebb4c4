"""
Core package: estimator base class and pipeline orchestration.
"""
