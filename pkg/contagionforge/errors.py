"""
Exception hierarchy for the contagion pipeline.
"""

from typing import Any, Dict, Optional


class ContagionError(Exception):
    """Base class for all pipeline errors.

    Carries an optional ``context`` dict (period, pair, method, ...) so the
    orchestrator can report where a failure happened without string parsing.
    """

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = dict(context or {})

    def with_context(self, **context: Any) -> "ContagionError":
        self.context.update(context)
        return self

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{base} ({ctx})"


class ParseError(ContagionError):
    """Malformed CSV content or unparseable dates."""


class SchemaError(ContagionError):
    """A required named column is missing."""


class DomainError(ContagionError):
    """Value outside the mathematical domain of an operation."""


class InsufficientData(ContagionError):
    """Too few rows, markets, links or positive values."""


class DegenerateSeries(ContagionError):
    """Constant series where a standardized one is required."""


class SingularDesign(ContagionError):
    """Rank-deficient regression design."""


class DegenerateFit(ContagionError):
    """Quantile fit with (numerically) zero absolute residual sum."""


class IdentificationError(ContagionError):
    """Fewer instruments than endogenous regressors."""


class NotOveridentified(ContagionError):
    """Over-identification test requested on a just-identified system."""


class NoVarianceShift(ContagionError):
    """Regime variances of a channel are equal, Rigobon slope undefined."""


class UndefinedShares(ContagionError):
    """All structural coefficients are zero."""


class DegenerateBootstrap(ContagionError):
    """Fewer than two links available for resampling."""


class Unclassifiable(ContagionError):
    """Fewer than two dominant-channel labels to compare."""
