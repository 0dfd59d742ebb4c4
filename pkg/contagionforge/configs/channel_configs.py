"""
Channel composite recipes and the default Stage-2 instrument layout.
"""

from typing import Any, Dict, List, Tuple

# Fixed column order of every ChannelPanel.
CHANNELS: List[str] = ["Trade", "Financial", "Geopolitical", "Behavioural", "Monetary"]

RAW_COLUMNS: List[str] = [
    "VIX", "HYOAS", "STLFSI", "DTWEXBGS", "GPR", "GEOEVENT", "UMCSENT", "FFR", "T10Y3M", "QE",
]

# Optional raw columns joining a composite when supplied.
OPTIONAL_COLUMNS: Dict[str, str] = {"PANDEMIC": "Geopolitical"}

CHANNEL_CONFIGS: Dict[str, Dict[str, Any]] = {
    "Trade": {
        "sources": ["DTWEXBGS"],
        "transform": "log_diff",
        "description": "Log-return of the broad trade-weighted dollar index",
    },
    "Financial": {
        "sources": ["VIX", "HYOAS", "STLFSI"],
        "transform": "level",
        "description": "Fear, credit spreads and aggregate financial stress",
    },
    "Geopolitical": {
        "sources": ["GPR", "GEOEVENT"],
        "transform": "level",
        "description": "Geopolitical-risk index and events indicator",
    },
    "Behavioural": {
        "sources": ["UMCSENT"],
        "transform": "level",
        "residualize_on": "Financial",
        "description": "Consumer sentiment orthogonalised against the financial composite within each sub-period",
    },
    "Monetary": {
        "sources": ["FFR", "T10Y3M", "QE"],
        "transform": {"FFR": "diff"},
        "description": "First-differenced policy rate, term spread and QE dummy",
    },
}

# Lags at which every channel enters the instrument set.
INSTRUMENT_LAGS: Tuple[int, ...] = (5, 10, 15)
INTERACTION_LAG: int = 5
DEFAULT_INTERACTIONS: List[Tuple[str, str]] = [
    ("Trade", "Financial"),
    ("Geopolitical", "Monetary"),
    ("Behavioural", "Financial"),
]


def get_channel_config(name: str) -> Dict[str, Any]:
    """Get the composite recipe of one channel."""
    if name not in CHANNEL_CONFIGS:
        raise KeyError(f"Unknown channel '{name}'. Available: {', '.join(CHANNELS)}")
    return CHANNEL_CONFIGS[name]
