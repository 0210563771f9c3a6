"""Finite-box mode sums, jump identities and the shooting eigensolver."""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from casimir_qi.energy import density_profile
from casimir_qi.errors import BoxTooSmall, OutsideBox, SingularPoint
from casimir_qi.modes import BoxSpec, PotentialSpec, free_frequency, spectrum
from casimir_qi.oracle import (
    FiniteBoxRun,
    continuum_extrapolate,
    density_flatness_check,
    extrapolate_barrier,
    finite_box_density,
    integrated_energy,
    jump_consistency,
    shooting_spectrum,
)
from casimir_qi.oracle.finite_box import default_n_max, partial_sums

BARRIER_WIDTHS = (0.005, 0.0025, 0.00125)


@pytest.fixture
def small_run(unit_pot, box_20) -> FiniteBoxRun:
    return FiniteBoxRun.build(unit_pot, box_20, n_max=200)


def test_run_pairs_every_mode_with_its_free_partner(small_run):
    assert len(small_run.modes) == 400
    assert all((m.parity, m.index) == (f.parity, f.index)
               for m, f in zip(small_run.modes, small_run.free_modes))
    with pytest.raises(ValidationError):
        FiniteBoxRun(pot=small_run.pot, box=small_run.box, n_max=200,
                     modes=small_run.modes, free_modes=small_run.free_modes[::-1])


def test_default_n_max_tracks_box_length(unit_pot):
    assert default_n_max(unit_pot, BoxSpec(length=50.0)) == 2000
    assert default_n_max(PotentialSpec.from_coupling(1.0, a=2.0), BoxSpec(length=50.0)) == 1000


def test_evaluation_points_are_checked(small_run):
    with pytest.raises(SingularPoint):
        finite_box_density(small_run, 0.5)
    with pytest.raises(OutsideBox):
        finite_box_density(small_run, 10.5)


def test_free_potential_sums_vanish(free_pot, box_20):
    run = FiniteBoxRun.build(free_pot, box_20, n_max=50)
    np.testing.assert_array_equal(partial_sums(run, 0.0), np.zeros(50))
    assert density_flatness_check(run, [0.0, 0.2]) == 0.0
    jumps = jump_consistency(run)
    assert jumps.total_jump == 0.0
    assert all(e.delta_T_direct == 0.0 and e.delta_T_closed == 0.0 for e in jumps.per_mode)


def test_density_is_flat_within_each_region(small_run):
    scale = abs(density_profile(small_run.pot, with_beta=False).region1_value)
    assert density_flatness_check(small_run, [0.0, 0.25, -0.25, 0.4]) <= 1e-8 * scale
    assert density_flatness_check(small_run, [0.75, 1.0, -1.0, 2.0]) <= 1e-8 * scale
    with pytest.raises(ValueError):
        density_flatness_check(small_run, [0.0, 1.0])


def test_jump_routes_agree_mode_by_mode(small_run):
    report = jump_consistency(small_run)
    assert len(report.per_mode) == 400
    assert report.max_mode_mismatch <= 1.0
    assert report.total_mismatch <= report.rounding_bound
    assert report.rounding_bound < 1e-9


def test_jump_limit_trims_only_the_listing(small_run):
    full = jump_consistency(small_run)
    trimmed = jump_consistency(small_run, limit=10)
    assert len(trimmed.per_mode) == 20
    assert trimmed.total_jump == full.total_jump


@pytest.mark.slow
def test_jump_identity_on_large_box(unit_pot, box_100):
    run = FiniteBoxRun.build(unit_pot, box_100)
    report = jump_consistency(run, limit=100)
    assert len(report.per_mode) == 200
    assert report.max_mode_mismatch <= 1.0
    assert report.total_mismatch <= report.rounding_bound


def test_integrated_energy_is_positive(small_run, free_pot, box_20):
    assert integrated_energy(small_run) > 0
    assert integrated_energy(FiniteBoxRun.build(free_pot, box_20, n_max=50)) == 0.0


def test_extrapolation_needs_three_boxes(unit_pot):
    with pytest.raises(ValueError):
        continuum_extrapolate(unit_pot, [20.0, 40.0], 0.0)


@pytest.mark.slow
def test_finite_box_approaches_the_continuum(unit_pot):
    profile = density_profile(unit_pot)
    Ls = [50.0, 100.0, 200.0]

    inside = continuum_extrapolate(unit_pot, Ls, 0.0)
    assert not inside.non_inverse_L
    assert inside.limit == pytest.approx(profile.region1_value, rel=1e-2)

    outside = continuum_extrapolate(unit_pot, Ls, 0.75)
    assert not outside.non_inverse_L
    assert abs(outside.limit) < 1e-2 * profile.eta
    assert outside.slope == pytest.approx(profile.beta, rel=0.1)
    scaled = np.asarray(outside.values) * np.asarray(Ls)
    assert np.ptp(scaled) < 0.15 * abs(np.mean(scaled))
    assert outside.exponent == pytest.approx(-1.0, abs=0.1)


def test_shooting_recovers_the_free_spectrum(free_pot, box_20):
    result = shooting_spectrum(free_pot, box_20, 0.005, 6)
    expected = math.pi / box_20.length * np.arange(1, 7)
    np.testing.assert_allclose(result.omega, expected, rtol=1e-7)
    assert result.parity.tolist() == [2, 1, 2, 1, 2, 1]


@pytest.mark.slow
def test_shooting_matches_the_closed_form_spectrum(unit_pot, box_20):
    extrapolated = extrapolate_barrier(unit_pot, box_20, BARRIER_WIDTHS, 10)
    closed = sorted(spectrum(unit_pot, box_20, 7), key=lambda m: m.omega)[:10]
    reference = np.array([m.omega for m in closed])
    np.testing.assert_allclose(extrapolated.omega, reference, rtol=1e-6)
    assert extrapolated.parity.tolist() == [m.parity for m in closed]


def test_shooting_lowest_mode_is_even(unit_pot, box_20):
    result = shooting_spectrum(unit_pot, box_20, 0.005, 2)
    assert result.parity.tolist() == [2, 1]
    assert result.omega[0] > float(free_frequency(2, 1, box_20))


@pytest.mark.parametrize("width", [0.0, 0.02])
def test_shooting_barrier_width_range(unit_pot, box_20, width):
    with pytest.raises(ValueError):
        shooting_spectrum(unit_pot, box_20, width, 3)


def test_shooting_needs_a_large_box(unit_pot):
    with pytest.raises(BoxTooSmall):
        shooting_spectrum(unit_pot, BoxSpec(length=5.0), 0.005, 3)


def test_barrier_extrapolation_needs_two_widths(unit_pot, box_20):
    with pytest.raises(ValueError):
        extrapolate_barrier(unit_pot, box_20, [0.005], 3)
