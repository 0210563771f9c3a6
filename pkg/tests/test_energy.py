"""Continuum density profile: eta components, beta and the spectral cross-check."""
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from casimir_qi.energy import (
    DensityProfile,
    beta_coefficient,
    beta_boundary_term,
    density_profile,
    eta_components,
    region1_density_spectral,
)
from casimir_qi.modes import PotentialSpec


def _eta_by_trapezoid(coupling: float):
    """Kernels in their textbook form on a dense grid; independent of the stable rewrite."""
    y = np.linspace(0.0, 40.0, 10 ** 6 + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        odd = coupling * y * np.exp(-y) / (y * np.exp(y) + coupling * np.sinh(y))
        even = coupling * y * np.exp(-y) / (y * np.exp(y) + coupling * np.cosh(y))
    odd[0] = coupling / (1.0 + coupling)
    return -np.trapezoid(odd, y) / math.pi, np.trapezoid(even, y) / math.pi


@pytest.mark.parametrize("coupling", [0.1, 1.0, 10.0])
def test_eta_components_match_direct_trapezoid(coupling):
    eta1, eta2 = eta_components(PotentialSpec.from_coupling(coupling))
    expected1, expected2 = _eta_by_trapezoid(coupling)
    assert eta1 == pytest.approx(expected1, abs=1e-8)
    assert eta2 == pytest.approx(expected2, abs=1e-8)


def test_free_potential_has_zero_density(free_pot):
    assert eta_components(free_pot) == (0.0, 0.0)
    profile = density_profile(free_pot)
    assert profile.region1_value == 0.0
    assert profile.beta == 0.0
    assert profile.total_energy == 0.0


def test_dirichlet_limit():
    eta1, eta2 = eta_components(PotentialSpec(strength=math.inf, a=1.0))
    assert eta1 == pytest.approx(-math.pi / 12, rel=1e-9)
    assert eta2 == pytest.approx(math.pi / 24, rel=1e-9)
    assert DensityProfile.dirichlet_limit().eta == pytest.approx(math.pi / 24)
    assert DensityProfile.dirichlet_limit(2.0).eta == pytest.approx(math.pi / 96)


def test_eta_grows_monotonically_towards_dirichlet():
    couplings = [0.01, 0.1, 1.0, 10.0, 100.0, 1e4]
    etas = [density_profile(PotentialSpec.from_coupling(c), with_beta=False).eta for c in couplings]
    assert all(lo < hi for lo, hi in zip(etas, etas[1:]))
    assert etas[-1] < math.pi / 24
    assert etas[-1] == pytest.approx(math.pi / 24, rel=1e-3)


def test_weak_coupling_components_are_linear():
    coupling = 1e-4
    eta1, eta2 = eta_components(PotentialSpec.from_coupling(coupling))
    assert eta1 == pytest.approx(-coupling / (2 * math.pi), rel=1e-3)
    # eta2 carries an extra Lambda*log(1/Lambda) correction
    assert eta2 == pytest.approx(coupling / (2 * math.pi), rel=5e-3)


def test_density_scales_as_inverse_square_separation():
    near = density_profile(PotentialSpec.from_coupling(2.0, a=1.0), with_beta=False)
    far = density_profile(PotentialSpec.from_coupling(2.0, a=3.0), with_beta=False)
    assert far.region1_value == pytest.approx(near.region1_value / 9.0, rel=1e-9)


def test_profile_is_piecewise_constant(unit_pot):
    profile = density_profile(unit_pot, with_beta=False)
    assert profile.kinetic_density(0.0) == profile.region1_value
    assert profile.kinetic_density(0.5) == profile.region1_value
    assert profile.kinetic_density(-3.0) == 0.0
    np.testing.assert_array_equal(profile.kinetic_density(np.array([0.1, 0.6])), [profile.region1_value, 0.0])
    assert profile.region1_value < 0
    assert profile.total_energy is None
    assert profile.total_energy_positive is None


def test_profile_rejects_inconsistent_fields(unit_pot):
    with pytest.raises(ValidationError):
        DensityProfile(eta1=-0.2, eta2=0.1, region1_value=-0.2, eta=0.2, pot=unit_pot)
    with pytest.raises(ValidationError):
        DensityProfile.from_components(0.1, 0.1, unit_pot)


@pytest.mark.parametrize("coupling", [0.5, 1.0, 5.0, pytest.param(50.0, marks=pytest.mark.slow)])
def test_total_energy_is_positive(coupling):
    profile = density_profile(PotentialSpec.from_coupling(coupling))
    assert profile.beta is not None and profile.beta > 0
    assert profile.total_energy == pytest.approx(profile.beta - profile.eta)
    assert profile.total_energy_positive is True


def test_beta_approaches_coupling_over_pi_a(unit_pot):
    # -(S/2pi) * sum_j delta_j(S) averages to Lambda/(pi*a)
    beta = beta_coefficient(unit_pot)
    assert beta.value == pytest.approx(1.0 / math.pi, rel=1e-3)
    assert beta_boundary_term(1e4, unit_pot) == pytest.approx(1.0 / math.pi, rel=1e-3)


def test_beta_scales_as_inverse_separation():
    near = beta_coefficient(PotentialSpec.from_coupling(1.0, a=1.0)).value
    far = beta_coefficient(PotentialSpec.from_coupling(1.0, a=2.0)).value
    assert far == pytest.approx(near / 2.0, rel=1e-2)


def test_strong_coupling_reaches_the_dirichlet_density():
    profile = density_profile(PotentialSpec.from_coupling(1e6), with_beta=False)
    assert profile.eta1 == pytest.approx(-math.pi / 12, rel=1e-3)
    assert profile.eta2 == pytest.approx(math.pi / 24, rel=1e-3)
    assert profile.region1_value == pytest.approx(-math.pi / 24, rel=1e-3)


def test_beta_is_skipped_above_the_coupling_cap(caplog):
    with caplog.at_level(logging.WARNING, logger="casimir_qi.energy"):
        profile = density_profile(PotentialSpec.from_coupling(200.0), beta_max_coupling=100.0)
    assert profile.beta is None
    assert "beta_max_coupling" in caplog.text


def test_beta_undefined_for_infinite_coupling():
    with pytest.raises(ValueError):
        beta_coefficient(PotentialSpec(strength=math.inf, a=1.0))


def test_spectral_start_must_be_in_asymptotic_regime(unit_pot):
    with pytest.raises(ValueError):
        region1_density_spectral(unit_pot, omega_start=5.0)


@pytest.mark.slow
@pytest.mark.parametrize("coupling", [0.5, 1.0, 5.0])
def test_spectral_route_agrees_with_imaginary_frequency_route(coupling):
    pot = PotentialSpec.from_coupling(coupling)
    spectral = region1_density_spectral(pot).value
    expected = sum(eta_components(pot))
    assert spectral == pytest.approx(expected, rel=1e-2)


@pytest.mark.slow
def test_spectral_route_scales_as_inverse_square_separation():
    narrow = PotentialSpec.from_coupling(10.0, a=1.0)
    wide = PotentialSpec.from_coupling(10.0, a=2.0)
    spectral = region1_density_spectral(wide).value
    assert spectral == pytest.approx(sum(eta_components(wide)), rel=1e-2)
    assert spectral == pytest.approx(region1_density_spectral(narrow).value / 4.0, rel=1e-2)
