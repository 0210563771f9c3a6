"""Mode solutions, spectrum and per-mode residuals."""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from casimir_qi.errors import BoxTooSmall, EigenvalueSolveFailure, InvalidFrequency, OutsideBox
from casimir_qi.modes import (
    BoxSpec,
    FreeMode,
    ModeSolution,
    PotentialSpec,
    b_coefficient,
    eigen_residual,
    free_frequency,
    mode_density,
    mode_eval,
    scattering_data,
    spectrum,
    unwrapped_phase,
    validate_mode,
)


def test_coupling_and_lambda_alias():
    pot = PotentialSpec(**{"lambda": 4.0, "a": 0.5})
    assert pot.coupling == pytest.approx(1.0)
    assert PotentialSpec.from_coupling(3.0, a=2.0).strength == pytest.approx(3.0)
    assert pot.model_dump(by_alias=True)["lambda"] == 4.0


@pytest.mark.parametrize("values", [{"strength": -1.0, "a": 1.0}, {"strength": 1.0, "a": 0.0}])
def test_potential_rejects_bad_parameters(values):
    with pytest.raises(ValidationError):
        PotentialSpec(**values)


def test_free_frequencies(box_20):
    assert free_frequency(1, 3, box_20) == pytest.approx(2 * math.pi * 3 / 20)
    assert free_frequency(2, 3, box_20) == pytest.approx(2 * math.pi * 2.5 / 20)
    np.testing.assert_allclose(free_frequency(1, np.array([1, 2]), box_20), [math.pi / 10, math.pi / 5])
    assert FreeMode(parity=2, index=1, box_length=20.0).omega0 == pytest.approx(math.pi / 20)


def test_free_potential_has_no_scattering(free_pot):
    amplitude, phase = scattering_data(1, np.array([0.3, 7.0]), free_pot)
    np.testing.assert_array_equal(amplitude, [1.0, 1.0])
    np.testing.assert_array_equal(phase, [0.0, 0.0])
    assert b_coefficient(2, 1.3, free_pot) == 0.0


def test_scattering_at_quarter_resonance(unit_pot):
    # omega*a/2 = pi/2: sin = 1 and cos = 0, so p = 2*Lambda/pi decides everything.
    p = 2.0 / math.pi
    odd = scattering_data(1, math.pi, unit_pot)
    even = scattering_data(2, math.pi, unit_pot)
    assert odd.amplitude == pytest.approx(1.0 / math.sqrt(1.0 + p * p), rel=1e-12)
    assert odd.phase == pytest.approx(-math.atan(p), rel=1e-12)
    assert even.amplitude == pytest.approx(1.0, rel=1e-12)
    assert even.phase == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("coupling", [0.3, 1.0, 5.0])
@pytest.mark.parametrize("parity", [1, 2])
def test_phase_is_continuous_and_in_range(coupling, parity):
    pot = PotentialSpec.from_coupling(coupling)
    grid = np.linspace(0.01, 60.0, 60000)
    amplitude, phase = scattering_data(parity, grid, pot)
    assert np.all(amplitude > 0)
    assert np.all(phase <= 0) and np.all(phase > -math.pi)
    assert np.max(np.abs(np.diff(phase))) < 0.1
    np.testing.assert_allclose(unwrapped_phase(parity, grid, pot), phase, atol=1e-12)


@pytest.mark.parametrize("omega", [0.0, -1.0, math.nan, math.inf])
def test_invalid_frequency(unit_pot, omega):
    with pytest.raises(InvalidFrequency):
        scattering_data(1, omega, unit_pot)


def test_spectrum_layout_and_eigen_equation(unit_pot, box_20):
    modes = spectrum(unit_pot, box_20, 50)
    assert [(m.parity, m.index) for m in modes] == [(j, n) for j in (1, 2) for n in range(1, 51)]
    for parity in (1, 2):
        omegas = [m.omega for m in modes if m.parity == parity]
        assert omegas == sorted(omegas)
    for mode in modes:
        assert abs(eigen_residual(mode.parity, mode.omega, mode.omega0, unit_pot, box_20)) < 1e-11
        shift = mode.omega - mode.omega0
        assert 0.0 <= shift < 2 * math.pi / box_20.length


def test_weak_coupling_shift_stays_below_half_spacing(box_20):
    pot = PotentialSpec.from_coupling(0.5)
    for mode in spectrum(pot, box_20, 80):
        assert mode.omega - mode.omega0 <= math.pi / box_20.length


def test_free_spectrum_is_unshifted(free_pot, box_20):
    for mode in spectrum(free_pot, box_20, 10):
        assert mode.omega == mode.omega0
        assert (mode.amplitude, mode.phase, mode.norm_B, mode.norm_N) == (1.0, 0.0, 0.0, 1.0)


def test_every_mode_passes_validation(box_100):
    pot = PotentialSpec.from_coupling(2.0)
    for mode in spectrum(pot, box_100, 120):
        residuals = validate_mode(mode, pot, box_100)
        assert residuals.passes(1e-10), (mode.parity, mode.index, residuals)


@pytest.mark.parametrize("index", [1, 7, 40])
def test_quadrature_normalization_agrees(unit_pot, box_20, index):
    modes = spectrum(unit_pot, box_20, 40)
    for mode in (m for m in modes if m.index == index):
        assert validate_mode(mode, unit_pot, box_20, method="quadrature").norm_residual < 1e-10


def test_perturbed_frequency_breaks_the_jump(unit_pot, box_100):
    mode = next(m for m in spectrum(unit_pot, box_100, 75) if m.parity == 1 and m.index == 75)
    assert validate_mode(mode, unit_pot, box_100).passes()
    perturbed = mode.model_copy(update={"omega": mode.omega + 1e-4})
    residuals = validate_mode(perturbed, unit_pot, box_100)
    assert max(residuals.jump_residual_left, residuals.jump_residual_right) > 1e-6
    assert not residuals.passes()


@pytest.mark.parametrize("parity", [1, 2])
def test_one_sided_derivatives_jump_by_lambda_u(unit_pot, box_20, parity):
    mode = next(m for m in spectrum(unit_pot, box_20, 5) if m.parity == parity and m.index == 3)
    half = unit_pot.a / 2
    inner = mode_eval(mode, unit_pot, box_20, half, side="inner")
    outer = mode_eval(mode, unit_pot, box_20, half, side="outer")
    assert inner.u == outer.u
    assert outer.du_dx - inner.du_dx == pytest.approx(unit_pot.strength * inner.u, abs=1e-11)
    left_inner = mode_eval(mode, unit_pot, box_20, -half, side="inner")
    left_outer = mode_eval(mode, unit_pot, box_20, -half, side="outer")
    assert left_inner.du_dx - left_outer.du_dx == pytest.approx(unit_pot.strength * left_inner.u, abs=1e-11)


def test_mode_eval_outside_box(unit_pot, box_20):
    mode = spectrum(unit_pot, box_20, 1)[0]
    with pytest.raises(OutsideBox):
        mode_eval(mode, unit_pot, box_20, 10.5)


def test_mode_density_per_region(unit_pot, box_20):
    mode = spectrum(unit_pot, box_20, 3)[2]
    free = mode.free
    assert mode_density(free, box_20) == pytest.approx(free.omega0 / 40.0)
    ratio = mode_density(mode, box_20, "I") / mode_density(mode, box_20, "II")
    assert ratio == pytest.approx(mode.amplitude ** 2)


def test_normalization_constant_is_checked():
    with pytest.raises(ValidationError):
        ModeSolution(parity=1, index=1, omega=1.0, omega0=1.0, amplitude=1.0, phase=0.0,
                     norm_B=0.5, norm_N=1.0, box_length=10.0)


def test_box_too_small(unit_pot):
    with pytest.raises(BoxTooSmall):
        spectrum(unit_pot, BoxSpec(length=5.0), 10)


def test_residual_threshold_is_enforced(unit_pot, box_20):
    with pytest.raises(EigenvalueSolveFailure):
        spectrum(unit_pot, box_20, 10, residual_tol=0.0)


def test_n_max_must_be_positive(unit_pot, box_20):
    with pytest.raises(ValueError):
        spectrum(unit_pot, box_20, 0)
