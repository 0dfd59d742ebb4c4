from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..configs.estimator_configs import EstimatorConfig
from ..errors import ContagionError
from ..stage2.results import DiagnosticsRecord, StructuralEstimate
from ..stage2.sample import LinkSample


class BaseEstimator(ABC):
    """Base class for all Stage-2 identification methods."""

    def __init__(self, config: EstimatorConfig):
        self.config = config
        self.method = config.method
        self.name = config.name
        self.description = config.description

    @abstractmethod
    def estimate(
        self, sample: LinkSample, context: Dict[str, Any]
    ) -> Tuple[StructuralEstimate, Optional[DiagnosticsRecord]]:
        """Fit one link; diagnostics only where the method defines them."""
        pass

    @abstractmethod
    def is_applicable(self, context: Dict[str, Any]) -> bool:
        """Whether this method runs for the period described by ``context``."""
        pass

    def stream_estimate(self, samples: Sequence[LinkSample], context: Dict[str, Any]) -> Iterator[Dict[str, Any]]:
        """Estimate every link, yielding one event per link.

        Failures become ``{"type": "skip"}`` events carrying the error class,
        so one bad link never stops the period.
        """
        for sample in samples:
            try:
                estimate, diagnostics = self.estimate(sample, context)
                yield {
                    "type": "estimate",
                    "method": self.method,
                    "pair": sample.pair,
                    "estimate": estimate,
                    "diagnostics": diagnostics,
                }
            except ContagionError as e:
                yield self._skip(sample, type(e).__name__, str(e))
            except np.linalg.LinAlgError as e:
                yield self._skip(sample, "SingularDesign", str(e))

    def _skip(self, sample: LinkSample, reason: str, message: str) -> Dict[str, Any]:
        return {"type": "skip", "method": self.method, "pair": sample.pair, "reason": reason, "content": message}
