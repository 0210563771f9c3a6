"""Quadrature, oscillatory averaging and root/fixed-point solving.

All integrals in the package go through `integrate`, which wraps QUADPACK's
adaptive Gauss-Kronrod scheme (`scipy.integrate.quad`). Semi-infinite domains
are mapped onto (0, 1) before QUADPACK sees them; the default map
x = lo - s*ln(1 - t) suits exponentially decaying integrands, the algebraic
map x = lo + s*t/(1 - t) suits power-law tails.
"""
import logging
import math
from typing import Callable, Iterable, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate as sp_integrate
from scipy import optimize

from casimir_qi.errors import (
    CasimirQIError,
    InsufficientAveragingWindow,
    IntegrandSingularity,
    InvalidBracket,
    QuadratureFailure,
)

logger = logging.getLogger(__name__)

Mapping = Literal["exponential", "algebraic"]

_MACHINE_EPS = float(np.finfo(float).eps)


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-10, gt=0)
    abs_tol: float = Field(default=1e-12, gt=0)
    max_iter: int = Field(default=200, ge=1)


class QuadratureResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    error_estimate: float = Field(ge=0)
    evaluations: int = Field(ge=1)

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(
            value=self.value + other.value,
            error_estimate=self.error_estimate + other.error_estimate,
            evaluations=self.evaluations + other.evaluations,
        )

    def __neg__(self) -> "QuadratureResult":
        return self.model_copy(update={"value": -self.value})


class FixedPointResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: np.ndarray


def _guarded(f: Callable[[float], float], to_x: Callable[[float], float] = lambda t: t):
    """Wrap f so that NaN/inf is reported with the location in the original variable."""

    def wrapped(t: float) -> float:
        y = float(f(t))
        if not math.isfinite(y):
            raise IntegrandSingularity(location=float(to_x(t)), value=y)
        return y

    return wrapped


def _quad(g: Callable[[float], float], lo: float, hi: float, tol: Tolerances) -> QuadratureResult:
    out = sp_integrate.quad(
        g, lo, hi,
        epsabs=tol.abs_tol, epsrel=tol.rel_tol, limit=tol.max_iter, full_output=1,
    )
    value, error, info = float(out[0]), float(out[1]), out[2]
    evaluations = max(int(info.get("neval", 1)), 1)
    if len(out) > 3:
        # QUADPACK flags roundoff as a failure even when the estimate is within reach.
        allowed = 10.0 * max(tol.abs_tol, tol.rel_tol * abs(value))
        if not math.isfinite(error) or error > allowed:
            raise QuadratureFailure(
                f"quadrature failure on [{lo!r}, {hi!r}]: {out[3]}",
                partial_value=value, error_estimate=error,
                lo=lo, hi=hi, evaluations=evaluations,
            )
        logger.debug("QUADPACK warning on [%g, %g] accepted (error %.3e): %s", lo, hi, error, out[3])
    return QuadratureResult(value=value, error_estimate=abs(error), evaluations=evaluations)


def _semi_infinite(f, lo: float, tol: Tolerances, mapping: Mapping, scale: float) -> QuadratureResult:
    if mapping == "exponential":
        def to_x(t):
            return lo - scale * math.log1p(-t)

        def jacobian(t):
            return scale / (1.0 - t)
    else:
        def to_x(t):
            return lo + scale * t / (1.0 - t)

        def jacobian(t):
            return scale / (1.0 - t) ** 2

    def mapped(t):
        if t >= 1.0:
            return 0.0
        return f(to_x(t)) * jacobian(t)

    return _quad(_guarded(mapped, to_x), 0.0, 1.0, tol)


def integrate(
    f: Callable[[float], float],
    domain: Tuple[float, float],
    tol: Optional[Tolerances] = None,
    *,
    mapping: Mapping = "exponential",
    scale: float = 1.0,
    breakpoints: Optional[Iterable[float]] = None,
) -> QuadratureResult:
    """Integrate f over a finite, semi-infinite or doubly infinite interval.

    `breakpoints` splits the domain into panels that are integrated separately
    and summed left to right, so repeated runs are bit-identical. `mapping` and
    `scale` only apply to the unbounded part of the domain.
    """
    tol = tol or Tolerances()
    lo, hi = float(domain[0]), float(domain[1])
    if hi < lo:
        return -integrate(f, (hi, lo), tol, mapping=mapping, scale=scale, breakpoints=breakpoints)
    if lo == hi:
        return QuadratureResult(value=0.0, error_estimate=0.0, evaluations=1)
    if math.isinf(lo) and math.isinf(hi):
        left = integrate(lambda x: f(-x), (0.0, math.inf), tol, mapping=mapping, scale=scale)
        right = integrate(f, (0.0, math.inf), tol, mapping=mapping, scale=scale)
        return left + right
    if math.isinf(lo):
        return integrate(lambda x: f(-x), (-hi, math.inf), tol, mapping=mapping, scale=scale,
                         breakpoints=None if breakpoints is None else [-p for p in breakpoints])

    edges = [lo] + sorted({float(p) for p in (breakpoints or ()) if lo < p < hi})
    if not math.isinf(hi):
        edges.append(hi)

    result: Optional[QuadratureResult] = None
    for left, right in zip(edges[:-1], edges[1:]):
        piece = _quad(_guarded(f), left, right, tol)
        result = piece if result is None else result + piece
    if math.isinf(hi):
        tail = _semi_infinite(f, edges[-1], tol, mapping, scale)
        result = tail if result is None else result + tail
    return result


def average_oscillatory(
    f: Callable[[float], float],
    start: float,
    period: float,
    cycles: int,
    tol: Optional[Tolerances] = None,
    *,
    origin: Optional[float] = None,
    subdivisions: int = 1,
    boundary: Optional[Callable[[float], float]] = None,
) -> QuadratureResult:
    """Cesàro-style mean of an integral that converges only on average.

    Cumulative integrals are sampled at start + (k + j/subdivisions)*period,
    j = 1..subdivisions, for k = 0..cycles-1 (plus the exact head over
    [origin, start] when `origin` is given) and averaged within each period.
    With subdivisions > 1 the mean also cancels the phase of harmonics of the
    period, which whole-period sampling alone freezes. The first half of the
    per-period values is dropped as transient; the value is the mean of the
    remainder and the error estimate is the spread of its running means.

    `boundary(upper)`, when given, is added to every sampled cumulative
    integral, for quantities of the form int_origin^S f + g(S) averaged over S.
    """
    if cycles < 4:
        raise InsufficientAveragingWindow(
            f"insufficient averaging window: {cycles} cycles (need >= 4)", cycles=cycles)
    if period <= 0:
        raise ValueError(f"period must be positive, got {period!r}")
    if subdivisions < 1:
        raise ValueError(f"subdivisions must be >= 1, got {subdivisions!r}")
    tol = tol or Tolerances()

    running = 0.0
    evaluations = 0
    if origin is not None and origin < start:
        head = integrate(f, (origin, start), tol)
        running, evaluations = head.value, head.evaluations

    step = period / subdivisions
    per_period = np.empty(cycles)
    samples = np.empty(subdivisions)
    for k in range(cycles):
        for j in range(subdivisions):
            left = start + k * period + j * step
            piece = integrate(f, (left, left + step), tol)
            running += piece.value
            evaluations += piece.evaluations
            samples[j] = running if boundary is None else running + float(boundary(left + step))
        per_period[k] = np.mean(samples)

    retained = per_period[cycles // 2:]
    running_means = np.cumsum(retained) / np.arange(1, retained.size + 1)
    return QuadratureResult(
        value=float(np.mean(retained)),
        error_estimate=float(np.ptp(running_means[running_means.size // 2:])),
        evaluations=max(evaluations, 1),
    )


def solve_root(
    f: Callable[[float], float],
    bracket: Tuple[float, float],
    tol: Optional[Tolerances] = None,
) -> float:
    """Bracketed root by Brent's method (bisection safeguarded secant/inverse-quadratic steps)."""
    tol = tol or Tolerances()
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise InvalidBracket(
            f"invalid bracket [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}",
            lo=lo, hi=hi, f_lo=f_lo, f_hi=f_hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    root, info = optimize.brentq(
        f, lo, hi,
        xtol=tol.abs_tol, rtol=max(tol.rel_tol, 4 * _MACHINE_EPS),
        maxiter=tol.max_iter, full_output=True, disp=False,
    )
    if not info.converged:
        raise CasimirQIError(f"root solve did not converge: {info.flag}",
                             lo=lo, hi=hi, iterations=info.iterations)
    return float(root)


def fixed_point(
    g: Callable[[np.ndarray], np.ndarray],
    x0,
    *,
    xtol: float,
    damping: float = 1.0,
    max_iter: int = 200,
) -> FixedPointResult:
    """Elementwise iteration x <- (1-d)*x + d*g(x) until |dx| < xtol.

    Converged entries are frozen so every element stops at its own first
    converged iterate, independent of its neighbours.
    """
    x = np.array(x0, dtype=float, copy=True)
    converged = np.zeros(x.shape, dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        updated = (1.0 - damping) * x + damping * np.asarray(g(x), dtype=float)
        step = np.abs(updated - x)
        x = np.where(converged, x, updated)
        converged |= step < xtol
        if converged.all():
            break
    return FixedPointResult(x=x, iterations=iterations, converged=converged)


def gauss_legendre_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    order: int = 16,
) -> float:
    """Fixed-order Gauss-Legendre on consecutive panels; f must accept arrays."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    x = 0.5 * (right + left) + half * nodes[None, :]
    panel_sums = (half[:, 0]) * (np.asarray(f(x)) @ weights)
    return math.fsum(panel_sums)
