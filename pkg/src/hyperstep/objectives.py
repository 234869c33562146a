"""Benchmark objective functions with analytic gradients and signed residuals.

Three convex benchmarks: a shifted parabola in one parameter, a coupled
quadratic in two parameters, and a squared-error linear regression loss over
a single (x, y) sample. Every loss is the square of a signed residual, which
the update rules and the closed-form step sizes downstream exploit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ObjectiveId(Enum):
    """Identifies one of the three benchmark objectives."""

    F1 = "f1"
    F2 = "f2"
    F3 = "f3"

    @property
    def arity(self) -> int:
        """Number of parameters the objective takes (1 for F1, else 2)."""
        return 1 if self is ObjectiveId.F1 else 2


@dataclass(frozen=True)
class ParamPoint:
    """Parameter coordinates; ``b`` is present only for two-parameter objectives."""

    w: float
    b: float | None = None


@dataclass(frozen=True)
class RegressionSample:
    """Input / target pair for the regression objective F3."""

    x: float
    y: float


@dataclass(frozen=True)
class GradientVector:
    """Partial derivatives matching the objective's parameter arity."""

    d_w: float
    d_b: float | None = None


def _check_inputs(obj: ObjectiveId, point: ParamPoint, sample: RegressionSample | None) -> None:
    if obj.arity == 1 and point.b is not None:
        raise ValueError(f"{obj.name} takes a single parameter w, got b={point.b!r}")
    if obj.arity == 2 and point.b is None:
        raise ValueError(f"{obj.name} needs both parameters w and b")
    if obj is ObjectiveId.F3 and sample is None:
        raise ValueError("F3 requires a regression sample (x, y)")
    if obj is not ObjectiveId.F3 and sample is not None:
        raise ValueError(f"{obj.name} does not take a regression sample")


def residual(obj: ObjectiveId, point: ParamPoint, sample: RegressionSample | None = None) -> float:
    """Signed residual r with loss == r * r, zero exactly on the minimizing set.

    F1: w - 0.5, F2: w + b, F3: w * x + b - y.
    """
    _check_inputs(obj, point, sample)
    if obj is ObjectiveId.F1:
        return point.w - 0.5
    if obj is ObjectiveId.F2:
        return point.w + point.b
    return point.w * sample.x + point.b - sample.y


def evaluate(obj: ObjectiveId, point: ParamPoint, sample: RegressionSample | None = None) -> float:
    """Objective value at ``point``; non-negative by construction.

    Raises:
        ValueError: on parameter arity mismatch or a missing/extraneous sample.
    """
    r = residual(obj, point, sample)
    return r * r


def gradient(
    obj: ObjectiveId,
    point: ParamPoint,
    sample: RegressionSample | None = None,
    *,
    f3_half_gradient: bool = False,
) -> GradientVector:
    """Analytic gradient of the objective at ``point``.

    The regression objective supports two conventions. The default carries
    the factor 2 of the squared residual, giving (2*x*r, 2*r). Passing
    ``f3_half_gradient=True`` drops that factor, giving (x*r, r); the
    closed-form optimal step sizes for F3 are exact under the halved
    convention. F1 and F2 are unaffected by the flag.
    """
    r = residual(obj, point, sample)
    if obj is ObjectiveId.F1:
        return GradientVector(d_w=2.0 * r)
    if obj is ObjectiveId.F2:
        g = 2.0 * r
        return GradientVector(d_w=g, d_b=g)
    scale = 1.0 if f3_half_gradient else 2.0
    return GradientVector(d_w=scale * sample.x * r, d_b=scale * r)
