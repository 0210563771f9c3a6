"""Finite-box mode sums: renormalized density at finite L, 1/L extrapolation and jump identities.

The renormalized density is sum_n sum_j (T_lambda,jn(x) - T_0,jn) over paired
interacting and free modes. The summand oscillates in n with period L/a, so
partial sums are averaged over the last tenth of the truncation window.
"""
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, computed_field, model_validator

from casimir_qi.errors import NonInverseLBehavior, OutsideBox, SingularPoint
from casimir_qi.modes import (
    BoxSpec,
    FreeMode,
    ModeSolution,
    PotentialSpec,
    check_box,
    mode_eval,
    mode_values,
    spectrum,
)
from casimir_qi.numerics import Tolerances

logger = logging.getLogger(__name__)

MODES_PER_LENGTH = 40.0
SINGULAR_BAND = 1e-9
FIT_RESIDUAL_FRACTION = 0.1
_EPS = float(np.finfo(float).eps)


def default_n_max(pot: PotentialSpec, box: BoxSpec, modes_per_length: float = MODES_PER_LENGTH) -> int:
    """Keeps the frequency cutoff near 2*pi*modes_per_length/a for every L."""
    return int(math.ceil(modes_per_length * box.length / pot.a))


class _ParityArrays(NamedTuple):
    omega: np.ndarray
    omega0: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    norm_N: np.ndarray


class FiniteBoxRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    pot: PotentialSpec
    box: BoxSpec
    n_max: int = Field(ge=1)
    modes: Tuple[ModeSolution, ...]
    free_modes: Tuple[FreeMode, ...]

    _arrays: Dict[int, _ParityArrays] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _aligned(self) -> "FiniteBoxRun":
        interacting = [(m.parity, m.index) for m in self.modes]
        free = [(m.parity, m.index) for m in self.free_modes]
        if interacting != free:
            raise ValueError("modes and free_modes must be index-aligned")
        if len(interacting) != 2 * self.n_max:
            raise ValueError(f"expected {2 * self.n_max} modes, got {len(interacting)}")
        return self

    def model_post_init(self, __context) -> None:
        for parity in (1, 2):
            chosen = [m for m in self.modes if m.parity == parity]
            self._arrays[parity] = _ParityArrays(
                omega=np.array([m.omega for m in chosen]),
                omega0=np.array([m.omega0 for m in chosen]),
                amplitude=np.array([m.amplitude for m in chosen]),
                phase=np.array([m.phase for m in chosen]),
                norm_N=np.array([m.norm_N for m in chosen]),
            )

    def arrays(self, parity: int) -> _ParityArrays:
        return self._arrays[parity]

    @classmethod
    def build(cls, pot: PotentialSpec, box: BoxSpec, n_max: Optional[int] = None,
              tol: Optional[Tolerances] = None) -> "FiniteBoxRun":
        n_max = n_max or default_n_max(pot, box)
        modes = spectrum(pot, box, n_max, tol)
        free_modes = tuple(m.free for m in modes)
        return cls(pot=pot, box=box, n_max=n_max, modes=tuple(modes), free_modes=free_modes)


@functools.lru_cache(maxsize=8)
def cached_run(pot: PotentialSpec, box: BoxSpec, n_max: int) -> FiniteBoxRun:
    return FiniteBoxRun.build(pot, box, n_max)


class FiniteBoxEstimate(NamedTuple):
    value: float
    tail_bound: float


def _region(run: FiniteBoxRun, x: float) -> Literal["I", "II"]:
    half = run.pot.a / 2
    if abs(x) > run.box.length / 2:
        raise OutsideBox(f"outside box: |x|={abs(x)!r} > L/2", x=x, L=run.box.length)
    if abs(abs(x) - half) <= SINGULAR_BAND * run.pot.a:
        raise SingularPoint(f"evaluation on singular point x={x!r} (delta at +-{half!r})", x=x)
    return "I" if abs(x) < half else "II"


def _mode_densities(run: FiniteBoxRun, parity: int, x: float, pointwise: bool) -> np.ndarray:
    arrays = run.arrays(parity)
    L = run.box.length
    if pointwise:
        u, du = mode_values(parity, arrays.omega, arrays.amplitude, arrays.phase, arrays.norm_N,
                            run.pot, run.box, x)
        return 0.5 * (arrays.omega ** 2 * u ** 2 + du ** 2)
    weight = arrays.amplitude ** 2 if _region(run, x) == "I" else 1.0
    return arrays.norm_N ** 2 * weight * arrays.omega / (2 * L)


def partial_sums(run: FiniteBoxRun, x: float, pointwise: bool = False) -> np.ndarray:
    """Renormalized partial sums S_K for K = 1..n_max, both parities per K.

    The n-th interacting mode is paired with the n-th free mode, so S_K stops
    at the same index in both spectra.
    """
    _region(run, x)
    L = run.box.length
    summands = np.zeros(run.n_max)
    for parity in (1, 2):
        arrays = run.arrays(parity)
        density = _mode_densities(run, parity, x, pointwise)
        summands += density - arrays.omega0 / (2 * L)
    return np.cumsum(summands)


def finite_box_estimate(run: FiniteBoxRun, x: float, pointwise: bool = False) -> FiniteBoxEstimate:
    sums = partial_sums(run, x, pointwise)
    window = sums[-int(math.ceil(run.n_max / 10)):]
    return FiniteBoxEstimate(value=float(np.mean(window)), tail_bound=float(np.ptp(window)))


def finite_box_density(run: FiniteBoxRun, x: float) -> float:
    return finite_box_estimate(run, x).value


def integrated_energy(run: FiniteBoxRun, x_region1: float = 0.0, x_region2: Optional[float] = None) -> float:
    """Region-I value times a plus region-II value times (L - a)."""
    a, L = run.pot.a, run.box.length
    x_region2 = 0.75 * a if x_region2 is None else x_region2
    return finite_box_density(run, x_region1) * a + finite_box_density(run, x_region2) * (L - a)


class Extrapolation(BaseModel):
    model_config = ConfigDict(frozen=True)

    limit: float
    slope: float
    Ls: List[float]
    values: List[float]
    tail_bounds: List[float]
    fit_residual: float
    spread: float
    non_inverse_L: bool

    @computed_field
    @property
    def exponent(self) -> Optional[float]:
        """Power-law exponent p of value ~ C * L^p, if every value has one sign."""
        values = np.asarray(self.values)
        if np.all(values > 0) or np.all(values < 0):
            return float(np.polyfit(np.log(self.Ls), np.log(np.abs(values)), 1)[0])
        return None


def continuum_extrapolate(
    pot: PotentialSpec,
    Ls: Sequence[float],
    x: float,
    modes_per_length: float = MODES_PER_LENGTH,
    *,
    strict: bool = False,
    workers: int = 1,
) -> Extrapolation:
    """Least-squares fit value(L) = limit + slope/L over the given box sizes."""
    Ls = sorted({float(L) for L in Ls})
    if len(Ls) < 3:
        raise ValueError(f"continuum_extrapolate needs >= 3 distinct box sizes, got {Ls!r}")
    boxes = [BoxSpec(length=L) for L in Ls]
    for box in boxes:
        check_box(pot, box)

    def estimate(box: BoxSpec) -> FiniteBoxEstimate:
        run = cached_run(pot, box, default_n_max(pot, box, modes_per_length))
        return finite_box_estimate(run, x)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        estimates = list(pool.map(estimate, boxes))

    values = np.array([e.value for e in estimates])
    inverse = 1.0 / np.array(Ls)
    slope, limit = np.polyfit(inverse, values, 1)
    residual = float(np.max(np.abs(limit + slope * inverse - values)))
    spread = float(np.ptp(values))
    non_inverse = spread > 0 and residual > FIT_RESIDUAL_FRACTION * spread
    if non_inverse:
        detail = dict(x=x, residual=residual, spread=spread, Ls=Ls)
        if strict:
            raise NonInverseLBehavior("non-1/L behavior in finite-box density", **detail)
        logger.warning("Finite-box density at x=%g is not 1/L-like: residual %.3e vs spread %.3e",
                       x, residual, spread)
    logger.info("Extrapolated x=%g: limit=%.10g slope=%.6g over L=%s", x, limit, slope, Ls)
    return Extrapolation(
        limit=float(limit), slope=float(slope), Ls=Ls, values=values.tolist(),
        tail_bounds=[e.tail_bound for e in estimates], fit_residual=residual,
        spread=spread, non_inverse_L=non_inverse,
    )


class JumpEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    parity: int
    n: int
    delta_T_direct: float
    delta_T_closed: float
    density_scale: float = Field(gt=0)


class JumpReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    per_mode: List[JumpEntry]
    total_jump: float
    density_difference: float
    rounding_bound: float = Field(ge=0)

    @computed_field
    @property
    def max_mode_mismatch(self) -> float:
        """Worst |direct - closed| relative to the mode's summed region densities, in units of 1e-12."""
        if not self.per_mode:
            return 0.0
        return max(abs(e.delta_T_direct - e.delta_T_closed) / (1e-12 * e.density_scale)
                   for e in self.per_mode)

    @computed_field
    @property
    def total_mismatch(self) -> float:
        return abs(self.total_jump - self.density_difference)


def jump_consistency(run: FiniteBoxRun, limit: Optional[int] = None) -> JumpReport:
    """Region-I minus region-II density at the left delta, mode by mode.

    The direct route uses the one-sided slopes there,
    (lambda/2) * u * (u'_II + u'_I); the closed route is omega*N^2*(A^2 - 1)/(2L).
    `limit` restricts the per-mode list to the lowest modes of each parity;
    the totals always use all n_max.
    """
    pot, box = run.pot, run.box
    L, half, lam = box.length, pot.a / 2, pot.strength
    per_mode: List[JumpEntry] = []
    region1_terms: List[float] = []
    region2_terms: List[float] = []
    closed_terms: List[float] = []
    magnitude: List[float] = []
    for mode, free in zip(run.modes, run.free_modes):
        closed = mode.omega * mode.norm_N ** 2 * (mode.amplitude ** 2 - 1.0) / (2 * L)
        closed_terms.append(closed)
        free_density = free.omega0 / (2 * L)
        inner_density = mode.norm_N ** 2 * mode.amplitude ** 2 * mode.omega / (2 * L)
        outer_density = mode.norm_N ** 2 * mode.omega / (2 * L)
        region1_terms.append(inner_density - free_density)
        region2_terms.append(outer_density - free_density)
        magnitude.append(inner_density + outer_density + 2 * free_density + abs(closed))
        if limit is not None and mode.index > limit:
            continue
        inner = mode_eval(mode, pot, box, -half, side="inner")
        outer = mode_eval(mode, pot, box, -half, side="outer")
        direct = 0.5 * lam * inner.u * (outer.du_dx + inner.du_dx)
        per_mode.append(JumpEntry(parity=mode.parity, n=mode.index,
                                  delta_T_direct=direct, delta_T_closed=closed,
                                  density_scale=inner_density + outer_density))
    return JumpReport(
        per_mode=per_mode,
        total_jump=math.fsum(closed_terms),
        density_difference=math.fsum(region1_terms) - math.fsum(region2_terms),
        # each summand carries one rounding of its unsubtracted densities
        rounding_bound=1e-13 + _EPS * math.fsum(magnitude),
    )


def density_flatness_check(run: FiniteBoxRun, xs: Sequence[float]) -> float:
    """Max deviation of the pointwise mode sum across xs, all inside one region."""
    regions = {_region(run, x) for x in xs}
    if len(regions) != 1:
        raise ValueError(f"xs must lie in a single region, got {sorted(regions)}")
    if run.pot.coupling == 0:
        # interacting and free modes coincide, so every summand is identically zero
        return 0.0
    values = [finite_box_estimate(run, x, pointwise=True).value for x in xs]
    return float(max(abs(v - values[0]) for v in values))
