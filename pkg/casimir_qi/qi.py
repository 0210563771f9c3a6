"""Spatial quantum inequality: sampling functions, the bound functional and the verdict.

The bound is xi_min[rho] = -(1/24pi) * int rho'(x)^2 / rho(x) dx. For the
Lorentzian of width tau this integral is 1/(2 tau^2), so direct quadrature
gives -1/(48 pi tau^2); the widely quoted closed form is -1/(24 pi tau^2).
Both are reported and each gets its own verdict.
"""
import logging
import math
from typing import Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy import special

from casimir_qi.energy import DensityProfile, density_profile
from casimir_qi.errors import (
    CasimirQIError,
    DivergentBound,
    InvariantViolation,
    InvalidScale,
    NegativeDensity,
)
from casimir_qi.modes import PotentialSpec
from casimir_qi.numerics import Tolerances, integrate, solve_root

logger = logging.getLogger(__name__)

SamplingKind = Literal["lorentzian", "gaussian", "tabulated"]
BoundName = Literal["paper", "quadrature"]

CRITICAL_TAU_RANGE = (1e-3, 1e3)
CRITICAL_TAU_POINTS = 241
BOUND_FACTOR_TOL = 1e-6


class SamplingFunction(BaseModel):
    """Normalized, non-negative weight rho(x).

    Analytic kinds carry their width in `scale` (tau or sigma). The tabulated
    kind is the linear interpolant of (grid, values), zero outside the grid,
    with derivative from centered differences on the grid.
    """

    model_config = ConfigDict(frozen=True)

    kind: SamplingKind
    scale: Optional[float] = Field(default=None, gt=0)
    grid: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    _x: np.ndarray = PrivateAttr(default=None)
    _rho: np.ndarray = PrivateAttr(default=None)
    _slope: np.ndarray = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_kind(self) -> "SamplingFunction":
        if self.kind != "tabulated" and self.scale is None:
            raise ValueError(f"{self.kind} sampling needs a scale")
        if self.kind == "tabulated" and len(self.grid) < 3:
            raise ValueError("tabulated sampling needs at least 3 grid points")
        return self

    def model_post_init(self, __context) -> None:
        if self.kind == "tabulated":
            self._x = np.asarray(self.grid, dtype=float)
            self._rho = np.asarray(self.values, dtype=float)
            self._slope = np.gradient(self._rho, self._x)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "lorentzian":
            tau = self.scale
            out = tau / (math.pi * (x * x + tau * tau))
        elif self.kind == "gaussian":
            sigma = self.scale
            out = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
        else:
            out = np.interp(x, self._x, self._rho, left=0.0, right=0.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "lorentzian":
            tau = self.scale
            out = -2.0 * tau * x / (math.pi * (x * x + tau * tau) ** 2)
        elif self.kind == "gaussian":
            out = -x / self.scale ** 2 * np.asarray(self.density(x))
        else:
            out = np.interp(x, self._x, self._slope, left=0.0, right=0.0)
        return float(out) if out.ndim == 0 else out

    def information_density(self, x):
        """rho'^2 / rho in a form that stays finite in the analytic tails."""
        x = np.asarray(x, dtype=float)
        if self.kind == "lorentzian":
            tau = self.scale
            out = 4.0 * tau * x * x / (math.pi * (x * x + tau * tau) ** 3)
        elif self.kind == "gaussian":
            out = x * x / self.scale ** 4 * np.asarray(self.density(x))
        else:
            out = np.asarray(self.derivative(x)) ** 2 / np.asarray(self.density(x))
        return float(out) if out.ndim == 0 else out

    def scaled(self, s: float) -> "SamplingFunction":
        """rho_s(x) = rho(x/s)/s."""
        if not s > 0:
            raise InvalidScale(f"invalid scale: s={s!r}", scale=s)
        if self.kind == "tabulated":
            return SamplingFunction(kind="tabulated", grid=tuple(s * self._x), values=tuple(self._rho / s))
        return SamplingFunction(kind=self.kind, scale=self.scale * s)

    def mass_between(self, lo: float, hi: float) -> float:
        """int_lo^hi rho dx."""
        if self.kind == "lorentzian":
            return (math.atan(hi / self.scale) - math.atan(lo / self.scale)) / math.pi
        if self.kind == "gaussian":
            return float(special.ndtr(hi / self.scale) - special.ndtr(lo / self.scale))
        inner = self._x[(self._x > lo) & (self._x < hi)]
        xs = np.concatenate(([lo], inner, [hi]))
        return float(np.trapezoid(np.asarray(self.density(xs)), xs))

    def total_mass(self) -> float:
        if self.kind == "tabulated":
            return float(np.trapezoid(self._rho, self._x))
        return self.mass_between(-math.inf, math.inf)


def make_sampling(
    kind: SamplingKind,
    *,
    tau: Optional[float] = None,
    sigma: Optional[float] = None,
    grid: Optional[Sequence[float]] = None,
    values: Optional[Sequence[float]] = None,
) -> SamplingFunction:
    if kind == "lorentzian" or kind == "gaussian":
        width = tau if kind == "lorentzian" else sigma
        if width is None or not math.isfinite(width) or width <= 0:
            raise InvalidScale(f"invalid scale for {kind} sampling: {width!r}", kind=kind, scale=width)
        return SamplingFunction(kind=kind, scale=float(width))
    if kind != "tabulated":
        raise ValueError(f"unknown sampling kind {kind!r}")

    xs = np.asarray(grid if grid is not None else (), dtype=float)
    rho = np.asarray(values if values is not None else (), dtype=float)
    if xs.ndim != 1 or xs.shape != rho.shape or xs.size < 3:
        raise ValueError("tabulated sampling needs matching 1-D grid and values with >= 3 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("tabulated grid must be strictly increasing")
    if np.any(rho < 0):
        i = int(np.flatnonzero(rho < 0)[0])
        raise NegativeDensity(f"negative density at x={xs[i]!r}: {rho[i]!r}", x=float(xs[i]), value=float(rho[i]))
    mass = float(np.trapezoid(rho, xs))
    if mass <= 0:
        raise InvalidScale("tabulated density has zero mass", mass=mass)
    return SamplingFunction(kind="tabulated", grid=tuple(xs.tolist()), values=tuple((rho / mass).tolist()))


class BoundResult(NamedTuple):
    bound_quadrature: float
    bound_paper: Optional[float]


def _tabulated_information(rho: SamplingFunction) -> float:
    xs, values, slopes = rho._x, rho._rho, rho._slope
    zero = values == 0
    if np.any(zero & (slopes != 0)):
        i = int(np.flatnonzero(zero & (slopes != 0))[0])
        raise DivergentBound(f"divergent bound: rho=0 with rho'={slopes[i]!r} at x={xs[i]!r}", x=float(xs[i]))
    info = np.zeros_like(values)
    info[~zero] = slopes[~zero] ** 2 / values[~zero]
    return float(np.trapezoid(info, xs))


def qi_bound(rho: SamplingFunction, tol: Optional[Tolerances] = None, *, strict: bool = True) -> BoundResult:
    """Bound functional by quadrature, plus the closed form for the Lorentzian.

    A density that reaches zero with non-zero slope makes the integral diverge;
    with strict=False that is reported as -inf, which no finite lhs violates.
    """
    try:
        if rho.kind == "tabulated":
            information = _tabulated_information(rho)
        else:
            information = integrate(rho.information_density, (-math.inf, math.inf), tol,
                                    mapping="algebraic", scale=rho.scale).value
    except DivergentBound:
        if strict:
            raise
        logger.warning("Divergent QI bound for %s sampling; reporting -inf", rho.kind)
        return BoundResult(-math.inf, None)

    bound_paper = -1.0 / (24.0 * math.pi * rho.scale ** 2) if rho.kind == "lorentzian" else None
    return BoundResult(-information / (24.0 * math.pi), bound_paper)


def weighted_density(profile: DensityProfile, rho: SamplingFunction, tol: Optional[Tolerances] = None) -> float:
    """int T00(x) rho(x) dx for the piecewise-constant continuum profile."""
    half = profile.pot.a / 2
    if profile.region1_value == 0:
        return 0.0
    if rho.kind != "lorentzian":
        return profile.region1_value * rho.mass_between(-half, half)

    closed = -(2.0 * profile.eta / math.pi) * math.atan(half / rho.scale)
    check = integrate(rho.density, (-half, half), tol, breakpoints=[0.0])
    by_quadrature = profile.region1_value * check.value
    allowed = max(1e-10 * abs(closed), abs(profile.region1_value) * 2.0 * check.error_estimate)
    if abs(closed - by_quadrature) > allowed:
        raise InvariantViolation("Lorentzian weighted density disagrees with quadrature",
                                 closed_form=closed, quadrature=by_quadrature, tau=rho.scale)
    return closed


class QIReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_or_scale: float = Field(gt=0)
    lhs: float
    bound_paper: float = Field(le=0)
    bound_quadrature: float = Field(le=0)
    violated_vs_paper: bool
    violated_vs_quadrature: bool
    ratio: float
    bound_ratio: float
    bound_factor_flag: bool
    critical_tau_paper: Optional[float] = None
    critical_tau_quadrature: Optional[float] = None

    @model_validator(mode="after")
    def _verdicts_match(self) -> "QIReport":
        if self.violated_vs_paper != (self.lhs < self.bound_paper):
            raise ValueError("violated_vs_paper must equal lhs < bound_paper")
        if self.violated_vs_quadrature != (self.lhs < self.bound_quadrature):
            raise ValueError("violated_vs_quadrature must equal lhs < bound_quadrature")
        return self


def _lorentzian_lhs(profile: DensityProfile, tau: float) -> float:
    return -(2.0 * profile.eta / math.pi) * math.atan(profile.pot.a / (2.0 * tau))


def critical_tau(
    profile: DensityProfile,
    unit_bound: float,
    tau_range: Tuple[float, float] = CRITICAL_TAU_RANGE,
    points: int = CRITICAL_TAU_POINTS,
) -> Optional[float]:
    """Smallest tau beyond which lhs(tau) < unit_bound/tau^2 on the whole scanned range.

    `unit_bound` is the bound at tau = 1; the Lorentzian bound scales as 1/tau^2.
    The range is in units of a. Returns None if the top of the range is not violated.
    """
    if profile.eta == 0:
        return None
    a = profile.pot.a

    def gap(tau):
        return _lorentzian_lhs(profile, tau) - unit_bound / tau ** 2

    taus = a * np.geomspace(tau_range[0], tau_range[1], points)
    gaps = np.array([gap(t) for t in taus])
    if gaps[-1] >= 0:
        return None
    satisfied = np.flatnonzero(gaps >= 0)
    if satisfied.size == 0:
        return float(taus[0])
    i = int(satisfied[-1])
    return solve_root(gap, (float(taus[i]), float(taus[i + 1])), Tolerances(rel_tol=1e-12, abs_tol=1e-15))


def violation_report(
    pot: Optional[PotentialSpec],
    tau: float,
    *,
    profile: Optional[DensityProfile] = None,
    tol: Optional[Tolerances] = None,
    with_critical: bool = True,
) -> QIReport:
    """Lorentzian-weighted average of the continuum profile against both bounds."""
    if profile is None:
        if pot is None:
            raise ValueError("violation_report needs a potential or a profile")
        profile = density_profile(pot, tol, with_beta=False)
    rho = make_sampling("lorentzian", tau=tau)
    lhs = weighted_density(profile, rho, tol)
    bounds = qi_bound(rho, tol)

    critical_paper = critical_quadrature = None
    if with_critical:
        try:
            critical_paper = critical_tau(profile, bounds.bound_paper * tau ** 2)
            critical_quadrature = critical_tau(profile, bounds.bound_quadrature * tau ** 2)
        except CasimirQIError as exc:
            logger.error("Error in %s: %s", "critical_tau", exc)
            raise

    bound_ratio = bounds.bound_paper / bounds.bound_quadrature
    return QIReport(
        tau_or_scale=tau,
        lhs=lhs,
        bound_paper=bounds.bound_paper,
        bound_quadrature=bounds.bound_quadrature,
        violated_vs_paper=lhs < bounds.bound_paper,
        violated_vs_quadrature=lhs < bounds.bound_quadrature,
        ratio=lhs / bounds.bound_quadrature,
        bound_ratio=bound_ratio,
        bound_factor_flag=abs(bound_ratio - 1.0) > BOUND_FACTOR_TOL,
        critical_tau_paper=critical_paper,
        critical_tau_quadrature=critical_quadrature,
    )
