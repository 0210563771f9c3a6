"""Continuum (L -> infinity) renormalized kinetic energy density.

Region I (between the deltas) carries the constant density eta1 + eta2 < 0.
Region II carries beta/L in a box of length L, which vanishes in the
continuum; beta is kept because the total energy is beta - eta*a.
"""
import logging
import math
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from casimir_qi.errors import InvariantViolation
from casimir_qi.modes import PotentialSpec, b_coefficient, scattering_data, unwrapped_phase
from casimir_qi.numerics import QuadratureResult, Tolerances, average_oscillatory, integrate

logger = logging.getLogger(__name__)

SPECTRAL_OMEGA_START = 40.0
SPECTRAL_CYCLES = 256
BETA_START_PER_COUPLING = 40.0
BETA_CYCLES = 64
BETA_MAX_COUPLING = 100.0
BETA_TOLERANCES = Tolerances(rel_tol=1e-7, abs_tol=1e-9)
TAIL_SUBDIVISIONS = 8


class EtaComponents(NamedTuple):
    eta1: float
    eta2: float


class DensityProfile(BaseModel):
    """Piecewise-constant continuum profile T00(x)."""

    model_config = ConfigDict(frozen=True)

    eta1: float = Field(le=0)
    eta2: float = Field(ge=0)
    region1_value: float
    beta: Optional[float] = None
    eta: float = Field(ge=0)
    pot: PotentialSpec

    @model_validator(mode="after")
    def _consistent(self) -> "DensityProfile":
        if self.region1_value != self.eta1 + self.eta2:
            raise ValueError("region1_value must equal eta1 + eta2")
        if self.eta != -self.region1_value:
            raise ValueError("eta must equal -(eta1 + eta2)")
        return self

    @computed_field
    @property
    def total_energy(self) -> Optional[float]:
        if self.beta is None:
            return None
        return self.beta - self.eta * self.pot.a

    @computed_field
    @property
    def total_energy_positive(self) -> Optional[bool]:
        total = self.total_energy
        return None if total is None else total > 0

    @classmethod
    def from_components(cls, eta1: float, eta2: float, pot: PotentialSpec,
                        beta: Optional[float] = None) -> "DensityProfile":
        region1_value = eta1 + eta2
        return cls(eta1=eta1, eta2=eta2, region1_value=region1_value, beta=beta,
                   eta=-region1_value, pot=pot)

    @classmethod
    def dirichlet_limit(cls, a: float = 1.0) -> "DensityProfile":
        """Perfectly reflecting plates: eta1 = -pi/12a^2, eta2 = pi/24a^2, so eta = pi/24a^2."""
        return cls.from_components(-math.pi / (12 * a * a), math.pi / (24 * a * a),
                                   PotentialSpec(strength=math.inf, a=a))

    def kinetic_density(self, x):
        """T00 at x; region I includes |x| = a/2."""
        inside = np.abs(np.asarray(x, dtype=float)) <= self.pot.a / 2
        values = np.where(inside, self.region1_value, 0.0)
        return float(values) if np.ndim(x) == 0 else values


def _sinh_kernel(y: float, coupling: float) -> float:
    # Lambda*y*e^-y / (y*e^y + Lambda*sinh y), rewritten to avoid overflow.
    if y == 0.0:
        return coupling / (1.0 + coupling) if math.isfinite(coupling) else 1.0
    if math.isinf(coupling):
        return 2.0 * y * math.exp(-2.0 * y) / -math.expm1(-2.0 * y)
    return coupling * y * math.exp(-2.0 * y) / (y + coupling * -math.expm1(-2.0 * y) / 2.0)


def _cosh_kernel(y: float, coupling: float) -> float:
    if math.isinf(coupling):
        return 2.0 * y * math.exp(-2.0 * y) / (1.0 + math.exp(-2.0 * y))
    return coupling * y * math.exp(-2.0 * y) / (y + coupling * (1.0 + math.exp(-2.0 * y)) / 2.0)


def eta_components(pot: PotentialSpec, tol: Optional[Tolerances] = None) -> EtaComponents:
    """eta1 <= 0 and eta2 >= 0 from the imaginary-frequency integrals."""
    coupling = pot.coupling
    if coupling == 0:
        return EtaComponents(0.0, 0.0)
    tol = tol or Tolerances()
    prefactor = 1.0 / (math.pi * pot.a ** 2)
    odd = integrate(lambda y: _sinh_kernel(y, coupling), (0.0, math.inf), tol)
    even = integrate(lambda y: _cosh_kernel(y, coupling), (0.0, math.inf), tol)
    eta1, eta2 = -prefactor * odd.value, prefactor * even.value
    if not (eta1 <= 0 <= eta2 and eta1 + eta2 <= 0):
        raise InvariantViolation("eta sign invariant violated", eta1=eta1, eta2=eta2, coupling=coupling)
    logger.debug("eta1=%.12g eta2=%.12g (Lambda=%g, a=%g)", eta1, eta2, coupling, pot.a)
    return EtaComponents(eta1, eta2)


def _resonances(a: float, upto: float):
    """omega = k*pi/a for k >= 1 below `upto`: where sin or cos of omega*a/2 vanishes."""
    count = int(math.floor(upto * a / math.pi))
    return [k * math.pi / a for k in range(1, count + 1)]


def spectral_integrand(omega: float, pot: PotentialSpec) -> float:
    amplitude_odd = scattering_data(1, omega, pot).amplitude
    amplitude_even = scattering_data(2, omega, pot).amplitude
    return (amplitude_odd ** 2 + amplitude_even ** 2 - 2.0) * omega / (4.0 * math.pi)


def region1_density_spectral(
    pot: PotentialSpec,
    omega_start: Optional[float] = None,
    tol: Optional[Tolerances] = None,
    *,
    cycles: int = SPECTRAL_CYCLES,
) -> QuadratureResult:
    """Region-I density from the real-frequency amplitude integral.

    The integrand falls off like cos(2*omega*a)/omega, so the integral exists
    only as a mean: the head [0, omega_start] is integrated exactly and the
    tail is averaged over whole periods 2*pi/a.
    """
    a = pot.a
    omega_start = SPECTRAL_OMEGA_START / a if omega_start is None else omega_start
    if omega_start < 20.0 / a:
        raise ValueError(f"omega_start must be >= 20/a, got {omega_start!r}")
    if pot.coupling == 0:
        return QuadratureResult(value=0.0, error_estimate=0.0, evaluations=1)
    tol = tol or Tolerances()

    def f(omega):
        return spectral_integrand(omega, pot)

    head = integrate(f, (0.0, omega_start), tol, breakpoints=_resonances(a, omega_start))
    tail = average_oscillatory(f, omega_start, 2.0 * math.pi / a, cycles, tol, subdivisions=TAIL_SUBDIVISIONS)
    return head + tail


def _phase_derivative(parity: int, omega: float, pot: PotentialSpec) -> float:
    h = min(1e-6 * max(1.0, omega), 0.5 * omega)
    lower, upper = unwrapped_phase(parity, np.array([omega - h, omega + h]), pot)
    return float(upper - lower) / (2.0 * h)


def beta_integrand(omega: float, pot: PotentialSpec) -> float:
    """(omega/4pi) * sum_j (B_j + 2 d(delta_j)/d(omega))."""
    total = 0.0
    for parity in (1, 2):
        total += float(b_coefficient(parity, omega, pot)) + 2.0 * _phase_derivative(parity, omega, pot)
    return omega * total / (4.0 * math.pi)


def beta_boundary_term(omega: float, pot: PotentialSpec) -> float:
    """-(S/2pi) * sum_j delta_j(S) at the cutoff S; tends to Lambda/(pi*a)."""
    total = sum(scattering_data(parity, omega, pot).phase for parity in (1, 2))
    return -omega * total / (2.0 * math.pi)


def beta_coefficient(
    pot: PotentialSpec,
    tol: Optional[Tolerances] = None,
    *,
    start_per_coupling: float = BETA_START_PER_COUPLING,
    cycles: int = BETA_CYCLES,
) -> QuadratureResult:
    """Coefficient of the O(1/L) region-II density of the index-paired mode sum.

    Pairing the n-th interacting mode with the n-th free one leaves the
    upper-limit term of the omega_0 -> omega change of variables,
    beta_boundary_term(S), on top of int_0^S beta_integrand. Both are averaged
    together over the cutoff S. The integrand leaves its asymptotic regime only
    once omega*a/2 >> Lambda, so the averaged tail starts at
    start_per_coupling*max(1, Lambda)/a.
    """
    if pot.coupling == 0:
        return QuadratureResult(value=0.0, error_estimate=0.0, evaluations=1)
    if math.isinf(pot.coupling):
        raise ValueError("beta is undefined for infinite coupling")
    tol = tol or BETA_TOLERANCES
    a = pot.a
    start = start_per_coupling * max(1.0, pot.coupling) / a

    def f(omega):
        return beta_integrand(omega, pot)

    head = integrate(f, (0.0, start), tol, breakpoints=_resonances(a, start))
    tail = average_oscillatory(f, start, 2.0 * math.pi / a, cycles, tol, subdivisions=TAIL_SUBDIVISIONS,
                               boundary=lambda omega: beta_boundary_term(omega, pot))
    result = head + tail
    logger.debug("beta=%.10g +- %.2e (Lambda=%g, a=%g)", result.value, result.error_estimate, pot.coupling, a)
    return result


def density_profile(
    pot: PotentialSpec,
    tol: Optional[Tolerances] = None,
    *,
    with_beta: bool = True,
    beta_max_coupling: float = BETA_MAX_COUPLING,
    beta_start_per_coupling: float = BETA_START_PER_COUPLING,
    beta_cycles: int = BETA_CYCLES,
) -> DensityProfile:
    eta1, eta2 = eta_components(pot, tol)
    beta: Optional[float] = None
    if with_beta:
        if pot.coupling <= beta_max_coupling:
            beta = beta_coefficient(pot, start_per_coupling=beta_start_per_coupling, cycles=beta_cycles).value
        else:
            logger.warning("Skipping beta for Lambda=%g above beta_max_coupling=%g; total-energy check not run",
                           pot.coupling, beta_max_coupling)
    return DensityProfile.from_components(eta1, eta2, pot, beta=beta)
