"""Mode solutions of a massless scalar field with a symmetric double delta potential.

Parity j = 1 modes are odd (sine), j = 2 modes are even (cosine). Inside the
well (region I, |x| < a/2) a mode is A_j times the free sinusoid; outside
(region II) it is the free sinusoid shifted by the phase delta_j. In a
periodic box of length L the frequencies satisfy
omega = omega_0 - 2*delta_j(omega)/L.

Every function here accepts scalars or numpy arrays for omega so that a whole
spectrum can be solved in one vectorized fixed-point sweep.
"""
import functools
import logging
import math
from typing import List, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from casimir_qi.errors import (
    BoxTooSmall,
    CasimirQIError,
    EigenvalueSolveFailure,
    InvalidFrequency,
    OutsideBox,
)
from casimir_qi.numerics import Tolerances, fixed_point, gauss_legendre_panels, solve_root

logger = logging.getLogger(__name__)

Parity = Literal[1, 2]
Region = Literal["I", "II"]
Side = Literal["inner", "outer"]

MIN_BOX_RATIO = 10.0


class PotentialSpec(BaseModel):
    """V(x) = strength * [delta(x - a/2) + delta(x + a/2)]."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    strength: float = Field(ge=0, alias="lambda")
    a: float = Field(gt=0)

    @computed_field
    @property
    def coupling(self) -> float:
        """Dimensionless Lambda = lambda * a / 2."""
        return self.strength * self.a / 2

    @classmethod
    def from_coupling(cls, coupling: float, a: float = 1.0) -> "PotentialSpec":
        return cls(strength=2.0 * coupling / a, a=a)


class BoxSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    length: float = Field(gt=0)


class FreeMode(BaseModel):
    model_config = ConfigDict(frozen=True)

    parity: Parity
    index: int = Field(ge=1)
    box_length: float = Field(gt=0)

    @computed_field
    @property
    def omega0(self) -> float:
        return float(free_frequency(self.parity, self.index, BoxSpec(length=self.box_length)))


class ModeSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    parity: Parity
    index: int = Field(ge=1)
    omega: float = Field(gt=0)
    omega0: float = Field(gt=0)
    amplitude: float = Field(gt=0)
    phase: float
    norm_B: float
    norm_N: float = Field(gt=0)
    box_length: float = Field(gt=0)

    @model_validator(mode="after")
    def _normalization_consistent(self) -> "ModeSolution":
        expected = 1.0 / math.sqrt(1.0 - self.norm_B / self.box_length)
        if not math.isclose(self.norm_N, expected, rel_tol=1e-12):
            raise ValueError(f"norm_N={self.norm_N!r} inconsistent with norm_B (expected {expected!r})")
        return self

    @property
    def free(self) -> FreeMode:
        return FreeMode(parity=self.parity, index=self.index, box_length=self.box_length)


class ScatteringData(NamedTuple):
    amplitude: Union[float, np.ndarray]
    phase: Union[float, np.ndarray]


class NormalizationData(NamedTuple):
    B: Union[float, np.ndarray]
    N: Union[float, np.ndarray]


class ModeValue(NamedTuple):
    u: float
    du_dx: float


class ModeResiduals(BaseModel):
    model_config = ConfigDict(frozen=True)

    norm_residual: float
    continuity_residual: float
    jump_residual_left: float
    jump_residual_right: float
    boundary_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.norm_residual, self.continuity_residual,
                   self.jump_residual_left, self.jump_residual_right)

    def passes(self, threshold: float = 1e-10) -> bool:
        return self.max_residual < threshold


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _check_frequency(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InvalidFrequency(f"invalid frequency: omega must be finite and > 0, got {omega!r}",
                               omega=np.asarray(omega).tolist())
    return w


def check_box(pot: PotentialSpec, box: BoxSpec) -> None:
    if box.length < MIN_BOX_RATIO * pot.a:
        raise BoxTooSmall(
            f"box too small: L={box.length!r} < {MIN_BOX_RATIO:g}*a={MIN_BOX_RATIO * pot.a!r}",
            L=box.length, a=pot.a)


def free_frequency(parity: Parity, index, box: BoxSpec):
    n = np.asarray(index, dtype=float)
    shift = 0.0 if parity == 1 else 0.5
    return _scalar_or_array(2.0 * math.pi * (n - shift) / box.length, index)


def scattering_data(parity: Parity, omega, pot: PotentialSpec) -> ScatteringData:
    """Region-I amplitude A_j > 0 and continuous phase shift delta_j in (-pi, 0].

    The phase is atan2(numerator, denominator). The numerator is never positive
    and vanishes only where the denominator equals 1, so the pair never crosses
    the branch cut of atan2 and the result is continuous in omega.
    """
    w = _check_frequency(omega)
    if pot.coupling == 0:
        return ScatteringData(_scalar_or_array(np.ones_like(w), omega),
                              _scalar_or_array(np.zeros_like(w), omega))
    big_omega = w * pot.a / 2
    p = pot.coupling / big_omega
    s, c = np.sin(big_omega), np.cos(big_omega)
    if parity == 1:
        inverse_square = s * s + (p * s + c) ** 2
        numerator, denominator = -p * s * s, 1.0 + p * s * c
    else:
        inverse_square = c * c + (p * c - s) ** 2
        numerator, denominator = -p * c * c, 1.0 - p * s * c
    amplitude = 1.0 / np.sqrt(inverse_square)
    phase = np.arctan2(numerator, denominator)
    return ScatteringData(_scalar_or_array(amplitude, omega), _scalar_or_array(phase, omega))


def unwrapped_phase(parity: Parity, omega_grid: np.ndarray, pot: PotentialSpec) -> np.ndarray:
    """Phase shift along an increasing grid, unwrapped by multiples of pi."""
    phase = np.asarray(scattering_data(parity, np.asarray(omega_grid, dtype=float), pot).phase)
    return np.unwrap(phase, period=math.pi)


def b_coefficient(parity: Parity, omega, pot: PotentialSpec):
    """B_j(omega), the O(1/L) normalization correction (independent of L)."""
    w = _check_frequency(omega)
    amplitude, phase = scattering_data(parity, w, pot)
    if pot.coupling == 0:
        return _scalar_or_array(np.zeros_like(w), omega)
    a2 = amplitude * amplitude
    wa = w * pot.a
    oscillating = (a2 * np.sin(wa) - np.sin(wa + 2.0 * phase)) / w
    sign = 1.0 if parity == 1 else -1.0
    return _scalar_or_array(pot.a * (1.0 - a2) + sign * oscillating, omega)


def normalization_data(parity: Parity, omega, pot: PotentialSpec, box: BoxSpec) -> NormalizationData:
    B = np.asarray(b_coefficient(parity, omega, pot))
    if np.any(B >= box.length):
        raise BoxTooSmall("box too small for mode: normalization undefined (B >= L)",
                          B=float(np.max(B)), L=box.length)
    N = 1.0 / np.sqrt(1.0 - B / box.length)
    return NormalizationData(_scalar_or_array(B, omega), _scalar_or_array(N, omega))


def eigen_residual(parity: Parity, omega, omega0, pot: PotentialSpec, box: BoxSpec):
    """omega - omega_0 + 2*delta_j(omega)/L, zero on the box spectrum."""
    return omega - omega0 + 2.0 * scattering_data(parity, omega, pot).phase / box.length


def solve_frequencies(
    parity: Parity,
    indices: np.ndarray,
    pot: PotentialSpec,
    box: BoxSpec,
    tol: Optional[Tolerances] = None,
) -> np.ndarray:
    """Solve omega = omega_0 - 2*delta(omega)/L for every index at once.

    Fixed-point iteration seeded at omega_0; entries that do not converge fall
    back to a bracketed root on [omega_0 - pi/L, omega_0 + 2*pi/L], which
    always contains the root because delta lies in (-pi, 0].
    """
    tol = tol or Tolerances()
    omega0 = np.asarray(free_frequency(parity, np.asarray(indices), box), dtype=float)
    if pot.coupling == 0:
        return omega0.copy()

    L = box.length
    result = fixed_point(
        lambda w: omega0 - 2.0 * np.asarray(scattering_data(parity, w, pot).phase) / L,
        omega0, xtol=1e-12 / pot.a, damping=1.0, max_iter=tol.max_iter,
    )
    omega = result.x
    stragglers = np.flatnonzero(~result.converged)
    if stragglers.size:
        logger.warning("Fixed point did not converge for %d parity-%d modes; using bracketed root",
                       stragglers.size, parity)
    root_tol = Tolerances(rel_tol=1e-15, abs_tol=1e-15, max_iter=tol.max_iter)
    for i in stragglers:
        target = omega0[i]
        bracket = (max(target - math.pi / L, 0.5 * target), target + 2.0 * math.pi / L)
        try:
            omega[i] = solve_root(lambda w: eigen_residual(parity, w, target, pot, box), bracket, root_tol)
        except CasimirQIError as exc:
            raise EigenvalueSolveFailure(parity, int(indices[i]), str(exc)) from exc
    return omega


@functools.lru_cache(maxsize=1)
def _note_even_prefactor() -> None:
    logger.warning(
        "Even-parity modes use the prefactor N/sqrt(omega*L); N/(2*sqrt(omega*L)) "
        "would violate the normalization 2*omega*int(u^2) = 1")


def mode_values(parity: Parity, omega, amplitude, phase, norm_N, pot: PotentialSpec,
                box: BoxSpec, x: float, side: Side = "inner"):
    """Vectorized (u, du/dx) at a single x for arrays of mode parameters."""
    half = pot.a / 2
    prefactor = norm_N / np.sqrt(omega * box.length)
    if abs(x) < half or (abs(x) == half and side == "inner"):
        region_one = True
    else:
        region_one = False
    # u is continuous across the delta; at |x| = a/2 report the region-I value.
    if parity == 1:
        u = prefactor * amplitude * np.sin(omega * x)
        inner_slope = prefactor * amplitude * omega * np.cos(omega * x)
    else:
        u = prefactor * amplitude * np.cos(omega * x)
        inner_slope = -prefactor * amplitude * omega * np.sin(omega * x)
    if region_one:
        return u, inner_slope

    sgn = 1.0 if x >= 0 else -1.0
    argument = omega * x + sgn * phase
    if parity == 1:
        outer_u, outer_slope = prefactor * np.sin(argument), prefactor * omega * np.cos(argument)
    else:
        outer_u, outer_slope = prefactor * np.cos(argument), -prefactor * omega * np.sin(argument)
    if abs(x) == half:
        return u, outer_slope
    return outer_u, outer_slope


def mode_eval(mode: ModeSolution, pot: PotentialSpec, box: BoxSpec, x: float,
              side: Side = "inner") -> ModeValue:
    """u and du/dx at x; `side` picks the one-sided derivative at |x| = a/2."""
    if abs(x) > box.length / 2 * (1 + 1e-14):
        raise OutsideBox(f"outside box: |x|={abs(x)!r} > L/2={box.length / 2!r}", x=x, L=box.length)
    if mode.parity == 2:
        _note_even_prefactor()
    u, du = mode_values(mode.parity, mode.omega, mode.amplitude, mode.phase, mode.norm_N,
                        pot, box, float(x), side)
    return ModeValue(float(u), float(du))


def mode_density(mode: Union[ModeSolution, FreeMode], box: BoxSpec, region: Region = "I") -> float:
    """Kinetic density 1/2(omega^2 u^2 + u'^2) of one mode; constant within each region."""
    if isinstance(mode, FreeMode):
        return mode.omega0 / (2 * box.length)
    weight = mode.amplitude ** 2 if region == "I" else 1.0
    return mode.norm_N ** 2 * weight * mode.omega / (2 * box.length)


def _norm_integral_exact(parity, omega, amplitude, phase, norm_N, pot, box):
    """2*omega*int u^2 over the box from the piecewise antiderivative."""
    a, L = pot.a, box.length
    sign = 1.0 if parity == 2 else -1.0
    inner = a / 2 + sign * np.sin(omega * a) / (2 * omega)
    outer = (L - a) / 2 + sign * (np.sin(omega * L + 2 * phase) - np.sin(omega * a + 2 * phase)) / (2 * omega)
    return 2.0 * norm_N ** 2 / L * (amplitude ** 2 * inner + outer)


def _norm_integral_quadrature(mode: ModeSolution, pot: PotentialSpec, box: BoxSpec) -> float:
    half, edge = pot.a / 2, box.length / 2
    inner_panels = max(2, int(math.ceil(mode.omega * pot.a / math.pi)) + 1)
    outer_panels = max(2, int(math.ceil(mode.omega * (edge - half) / math.pi)) + 1)
    prefactor_sq = mode.norm_N ** 2 / (mode.omega * box.length)

    def inner(x):
        base = np.sin(mode.omega * x) if mode.parity == 1 else np.cos(mode.omega * x)
        return prefactor_sq * (mode.amplitude * base) ** 2

    def outer(x):
        argument = mode.omega * x + mode.phase
        base = np.sin(argument) if mode.parity == 1 else np.cos(argument)
        return prefactor_sq * base ** 2

    total = gauss_legendre_panels(inner, np.linspace(-half, half, inner_panels + 1))
    # u^2 is even, so region II contributes twice its x > a/2 half.
    total += 2.0 * gauss_legendre_panels(outer, np.linspace(half, edge, outer_panels + 1))
    return 2.0 * mode.omega * total


def _residual_arrays(parity, omega, amplitude, phase, norm_N, pot, box):
    half = pot.a / 2
    lam = pot.strength
    scale = (omega + lam) * norm_N / np.sqrt(omega * box.length)

    u_in, slope_in = mode_values(parity, omega, amplitude, phase, norm_N, pot, box, half, "inner")
    _, slope_out = mode_values(parity, omega, amplitude, phase, norm_N, pot, box, half, "outer")
    u_in_l, slope_in_l = mode_values(parity, omega, amplitude, phase, norm_N, pot, box, -half, "inner")
    _, slope_out_l = mode_values(parity, omega, amplitude, phase, norm_N, pot, box, -half, "outer")

    # Region-II form evaluated exactly at the deltas, to compare with region I.
    sgn_arg_r = omega * half + phase
    sgn_arg_l = -omega * half - phase
    prefactor = norm_N / np.sqrt(omega * box.length)
    if parity == 1:
        outer_r, outer_l = prefactor * np.sin(sgn_arg_r), prefactor * np.sin(sgn_arg_l)
        boundary = np.sin(omega * box.length / 2 + phase)
    else:
        outer_r, outer_l = prefactor * np.cos(sgn_arg_r), prefactor * np.cos(sgn_arg_l)
        boundary = np.cos(omega * box.length / 2 + phase)

    continuity = np.maximum(np.abs(u_in - outer_r), np.abs(u_in_l - outer_l)) / prefactor
    jump_right = np.abs(slope_out - slope_in - lam * u_in) / scale
    jump_left = np.abs(slope_in_l - slope_out_l - lam * u_in_l) / scale
    norm = np.abs(_norm_integral_exact(parity, omega, amplitude, phase, norm_N, pot, box) - 1.0)
    return norm, continuity, jump_left, jump_right, np.abs(boundary)


def validate_mode(mode: ModeSolution, pot: PotentialSpec, box: BoxSpec,
                  method: Literal["exact", "quadrature"] = "exact") -> ModeResiduals:
    """Normalization, continuity, derivative-jump and boundary residuals (all dimensionless)."""
    norm, continuity, jump_left, jump_right, boundary = _residual_arrays(
        mode.parity, mode.omega, mode.amplitude, mode.phase, mode.norm_N, pot, box)
    if method == "quadrature":
        norm = abs(_norm_integral_quadrature(mode, pot, box) - 1.0)
    return ModeResiduals(
        norm_residual=float(norm),
        continuity_residual=float(continuity),
        jump_residual_left=float(jump_left),
        jump_residual_right=float(jump_right),
        boundary_residual=float(boundary),
    )


def spectrum(
    pot: PotentialSpec,
    box: BoxSpec,
    n_max: int,
    tol: Optional[Tolerances] = None,
    *,
    validate: bool = True,
    residual_tol: float = 1e-10,
) -> List[ModeSolution]:
    """Both parities for n = 1..n_max, sorted by (parity, n)."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max!r}")
    check_box(pot, box)
    indices = np.arange(1, n_max + 1)
    modes: List[ModeSolution] = []
    for parity in (1, 2):
        omega = solve_frequencies(parity, indices, pot, box, tol)
        omega0 = np.asarray(free_frequency(parity, indices, box), dtype=float)
        amplitude, phase = scattering_data(parity, omega, pot)
        B, N = normalization_data(parity, omega, pot, box)
        if validate:
            residuals = np.vstack(_residual_arrays(parity, omega, amplitude, phase, N, pot, box)[:4])
            worst = residuals.max(axis=0)
            bad = np.flatnonzero(worst >= residual_tol)
            if bad.size:
                i = int(bad[0])
                raise EigenvalueSolveFailure(parity, int(indices[i]),
                                             f"mode residual {worst[i]:.3e} >= {residual_tol:.1e}")
        modes.extend(
            ModeSolution(
                parity=parity, index=int(n), omega=float(w), omega0=float(w0),
                amplitude=float(A), phase=float(d), norm_B=float(b), norm_N=float(nn),
                box_length=box.length,
            )
            for n, w, w0, A, d, b, nn in zip(indices, omega, omega0, amplitude, phase, B, N)
        )
    logger.info("Solved %d modes (Lambda=%g, L=%g, n_max=%d)", len(modes), pot.coupling, box.length, n_max)
    return modes
