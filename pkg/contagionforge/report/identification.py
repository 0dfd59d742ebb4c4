"""
Robust/Fragile identification status from per-method dominant channels.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Union

from ..configs.estimator_configs import get_all_estimators
from ..errors import Unclassifiable

# Methods whose dominant channel votes, in the column order of identification_status.csv.
VOTING_METHODS = tuple(c.method for c in get_all_estimators() if c.votes)


@dataclass(frozen=True)
class IdentificationStatus:
    period: str
    dominants: Dict[str, Optional[str]] = field(default_factory=dict)
    robust: bool = False
    channel: Optional[str] = None
    n_distinct: int = 0

    @property
    def label(self) -> str:
        if self.robust:
            return f"Robust ({self.channel})"
        return f"Fragile ({self.n_distinct} distinct)"


def classify_identification(
    dominants: Union[Mapping[str, Optional[str]], Sequence[Optional[str]]],
    period: str = "",
) -> IdentificationStatus:
    """Robust(channel) if some channel is dominant under two or more methods.

    Missing labels (methods not run for the period) are ignored.
    """
    if not isinstance(dominants, Mapping):
        dominants = {f"method_{i}": label for i, label in enumerate(dominants)}
    labels = [label for label in dominants.values() if label]
    if len(labels) < 2:
        raise Unclassifiable(f"Need two dominant labels, got {len(labels)}", {"period": period})

    counts = Counter(labels)
    best = max(counts.values())
    if best >= 2:
        channel = next(label for label in labels if counts[label] == best)
        return IdentificationStatus(period, dict(dominants), True, channel, len(counts))
    return IdentificationStatus(period, dict(dominants), False, None, len(counts))
