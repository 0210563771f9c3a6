"""Independent eigensolver: march -u'' + U(x) u = omega^2 u across the box.

Each delta is replaced by a square barrier of height lambda/w and width w.
The potential is piecewise constant, so one classical RK4 step on the linear
system y' = K y is the fixed matrix P(hK) = I + hK + (hK)^2/2 + (hK)^3/6 + (hK)^4/24,
and a whole segment is a matrix power of it.
"""
import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from casimir_qi.errors import SpectrumGap
from casimir_qi.modes import BoxSpec, PotentialSpec, check_box
from casimir_qi.numerics import Tolerances, solve_root

logger = logging.getLogger(__name__)

MIN_BARRIER_STEPS = 8
INITIAL_STEP_EXPONENT = 10
REFINE_TOL = 1e-8
MAX_REFINEMENTS = 8
SCAN_STEPS_PER_SPACING = 32

_IDENTITY = np.eye(2)


class ShootingSpectrum(NamedTuple):
    omega: np.ndarray
    parity: np.ndarray
    step: float


def _segments(pot: PotentialSpec, box: BoxSpec, width: float) -> List[Tuple[float, float]]:
    """(length, U) pairs from -L/2 to L/2."""
    half, edge, w = pot.a / 2, box.length / 2, width
    height = pot.strength / w
    return [
        (edge - half - w / 2, 0.0),
        (w, height),
        (pot.a - w, 0.0),
        (w, height),
        (edge - half - w / 2, 0.0),
    ]


def _step_matrix(h: float, U: float, omega: float) -> np.ndarray:
    hk = h * np.array([[0.0, 1.0], [U - omega * omega, 0.0]])
    hk2 = hk @ hk
    return _IDENTITY + hk + hk2 / 2 + hk2 @ hk / 6 + hk2 @ hk2 / 24


def march(omega: float, segments: Sequence[Tuple[float, float]], step: float) -> np.ndarray:
    """(u, u') at x = L/2 starting from u = 0, u' = 1 at x = -L/2."""
    y = np.array([0.0, 1.0])
    for length, U in segments:
        minimum = MIN_BARRIER_STEPS if U != 0.0 else 1
        count = max(int(math.ceil(length / step)), minimum)
        y = np.linalg.matrix_power(_step_matrix(length / count, U, omega), count) @ y
    return y


def _free_count(omega_max: float, box: BoxSpec) -> int:
    return int(math.floor(omega_max * box.length / math.pi))


def _roots(pot: PotentialSpec, box: BoxSpec, width: float, k_max: int, step: float) -> ShootingSpectrum:
    segments = _segments(pot, box, width)
    L = box.length
    spacing = math.pi / L
    # ends between free levels so no free root sits on the last point
    grid = spacing * np.arange(2, SCAN_STEPS_PER_SPACING * (k_max + 4) + 4) / SCAN_STEPS_PER_SPACING
    endpoint = np.array([march(w, segments, step)[0] for w in grid])
    tol = Tolerances(rel_tol=1e-14, abs_tol=1e-15)

    omegas, parities = [], []
    for i in np.flatnonzero(np.sign(endpoint[:-1]) * np.sign(endpoint[1:]) <= 0):
        lo, hi = float(grid[i]), float(grid[i + 1])
        if endpoint[i] == 0.0 and omegas and omegas[-1] == lo:
            continue
        root = solve_root(lambda w: march(w, segments, step)[0], (lo, hi), tol)
        omegas.append(root)
        parities.append(1 if march(root, segments, step)[1] > 0 else 2)

    expected = _free_count(float(grid[-1]), box)
    if not expected - 2 <= len(omegas) <= expected:
        raise SpectrumGap(f"spectrum gap: found {len(omegas)} roots below omega={grid[-1]!r}, "
                          f"expected between {expected - 2} and {expected}",
                          found=len(omegas), expected=expected)
    if len(omegas) < k_max:
        raise SpectrumGap(f"spectrum gap: only {len(omegas)} roots for k_max={k_max}",
                          found=len(omegas), expected=k_max)
    return ShootingSpectrum(np.array(omegas[:k_max]), np.array(parities[:k_max]), step)


def shooting_spectrum(
    pot: PotentialSpec,
    box: BoxSpec,
    barrier_width: float,
    k_max: int,
    *,
    refine_tol: float = REFINE_TOL,
    max_refinements: int = MAX_REFINEMENTS,
) -> ShootingSpectrum:
    """The k_max lowest eigenfrequencies with the barrier pair of width w.

    The marching step starts at (L/2)/2^10 and is halved until no eigenvalue
    moves by more than refine_tol relative.
    """
    if barrier_width <= 0 or barrier_width > pot.a / 100:
        raise ValueError(f"barrier_width must be in (0, a/100], got {barrier_width!r}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max!r}")
    check_box(pot, box)

    step = box.length / 2 / 2 ** INITIAL_STEP_EXPONENT
    current = _roots(pot, box, barrier_width, k_max, step)
    for _ in range(max_refinements):
        step /= 2
        refined = _roots(pot, box, barrier_width, k_max, step)
        shift = float(np.max(np.abs(refined.omega - current.omega) / refined.omega))
        current = refined
        logger.debug("Shooting w=%g step=%g: max relative shift %.3e", barrier_width, step, shift)
        if shift < refine_tol:
            return current
    logger.warning("Shooting did not reach relative shift %.1e after %d refinements", refine_tol, max_refinements)
    return current


class BarrierExtrapolation(NamedTuple):
    omega: np.ndarray
    parity: np.ndarray
    widths: List[float]
    per_width: List[np.ndarray]


def extrapolate_barrier(
    pot: PotentialSpec,
    box: BoxSpec,
    widths: Sequence[float],
    k_max: int,
    *,
    refine_tol: float = REFINE_TOL,
) -> BarrierExtrapolation:
    """Polynomial fit of each eigenvalue in w through all widths, read off at w = 0."""
    widths = sorted(float(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("need at least two barrier widths to extrapolate")
    runs = [shooting_spectrum(pot, box, w, k_max, refine_tol=refine_tol) for w in widths]
    parity: Optional[np.ndarray] = None
    for run in runs:
        if parity is not None and not np.array_equal(parity, run.parity):
            raise SpectrumGap("parity ordering differs between barrier widths", widths=widths)
        parity = run.parity
    stacked = np.vstack([run.omega for run in runs])
    degree = len(widths) - 1
    limit = np.array([np.polyval(np.polyfit(widths, stacked[:, k], degree), 0.0) for k in range(k_max)])
    return BarrierExtrapolation(limit, parity, widths, [run.omega for run in runs])
