"""Exception hierarchy. Every error carries a machine-readable ``code``."""

from __future__ import annotations


class PrepivotError(Exception):
    code = "error"

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.__class__.__name__)
        self.context = context

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        out.update({k: v for k, v in self.context.items() if v is not None})
        return out


class InvalidRange(PrepivotError, ValueError):
    code = "invalid_range"


class InsufficientLocalData(PrepivotError):
    """Too few (or collinear) observations inside the kernel window."""

    code = "insufficient_local_data"

    def __init__(self, message: str = "", side: str | None = None, **context):
        super().__init__(message, side=side, **context)
        self.side = side


class DegenerateScaling(PrepivotError):
    code = "degenerate_scaling"


class DegenerateVariance(PrepivotError):
    code = "degenerate_variance"


class LeverageOne(PrepivotError):
    code = "leverage_one"


class InvalidAlpha(PrepivotError, ValueError):
    code = "invalid_alpha"


class InvalidProbability(PrepivotError, ValueError):
    code = "invalid_probability"


class SingularMomentMatrix(PrepivotError):
    code = "singular_moment_matrix"


class QuadratureNonconvergence(PrepivotError):
    code = "quadrature_nonconvergence"


class ZeroCurvature(PrepivotError):
    code = "zero_curvature"


class RngFailure(PrepivotError):
    code = "rng_failure"


class ParseError(PrepivotError, ValueError):
    code = "parse_error"

    def __init__(self, message: str = "", line: int | None = None, **context):
        super().__init__(message, line=line, **context)
        self.line = line


class SchemaError(PrepivotError, ValueError):
    code = "schema_error"


class DesignMismatch(PrepivotError, ValueError):
    code = "design_mismatch"
