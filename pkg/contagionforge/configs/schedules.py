"""
Sub-period schedules for the contagion pipeline.
Each schedule is an ordered list of non-overlapping, inclusive date windows.
The first entry of a schedule is its baseline period.
"""

from typing import Any, Dict, List

SCHEDULE_CONFIGS: Dict[str, Dict[str, Any]] = {
    "g20_crises": {
        "name": "G20 crisis episodes",
        "description": "Eight global financial-stress windows, January 2006 to March 2026",
        "periods": [
            {"name": "Pre-Crisis", "start": "2006-01-12", "end": "2007-07-31"},
            {"name": "GFC", "start": "2007-08-01", "end": "2009-06-30"},
            {"name": "ESDC", "start": "2009-12-01", "end": "2012-06-30"},
            {"name": "CSC", "start": "2015-06-15", "end": "2016-12-31"},
            {"name": "Pre-COVID", "start": "2017-01-01", "end": "2020-01-31"},
            {"name": "COVID-19", "start": "2020-02-01", "end": "2021-12-31"},
            {"name": "Russia-Ukraine", "start": "2022-02-01", "end": "2023-12-31"},
            {"name": "Mid-East/Tariffs", "start": "2024-01-01", "end": "2026-03-18"},
        ],
    },
}

DEFAULT_SCHEDULE = "g20_crises"


def get_schedule(name: str = DEFAULT_SCHEDULE) -> List[Dict[str, str]]:
    """Return the period list of a named schedule."""
    try:
        return [dict(p) for p in SCHEDULE_CONFIGS[name]["periods"]]
    except KeyError:
        raise KeyError(f"Unknown schedule '{name}'. Available: {', '.join(SCHEDULE_CONFIGS)}")


def get_all_schedules() -> List[Dict[str, Any]]:
    """List all schedule configurations."""
    return [{"id": key, **value} for key, value in SCHEDULE_CONFIGS.items()]
