"""
Static registries: schedules, channel recipes, estimators and the run configuration.
"""
