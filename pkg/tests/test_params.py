import numpy as np
import pytest

from crossing_marl.params import (
    PHI_BOUNDS,
    PopulationSpec,
    clamp_phi,
    phi_to_unit,
    sample_agent_params,
    sample_population_spec,
    unit_to_phi,
)


def test_phi_roundtrip():
    rng = np.random.default_rng(0)
    spec = sample_population_spec(rng)
    assert PopulationSpec.from_phi(spec.to_phi()) == spec
    np.testing.assert_allclose(unit_to_phi(phi_to_unit(spec.to_phi())), spec.to_phi(), rtol=1e-14)


def test_population_draws_inside_bounds():
    rng = np.random.default_rng(1)
    phis = np.array([sample_population_spec(rng).to_phi() for _ in range(500)])
    assert np.all(phis >= PHI_BOUNDS[:, 0]) and np.all(phis <= PHI_BOUNDS[:, 1])


def test_agent_params_non_negative_and_driver_weight_at_least_one():
    rng = np.random.default_rng(2)
    spec = PopulationSpec.from_phi(PHI_BOUNDS[:, 0])
    for _ in range(300):
        p = sample_agent_params(spec, rng)
        assert min(p.nu_ped, p.nu_veh, p.w_ped) >= 0 and p.w_veh >= 1.0


def test_agent_params_centre_on_means():
    rng = np.random.default_rng(3)
    spec = PopulationSpec.midpoint()
    draws = np.array([[p.nu_ped, p.w_ped] for p in (sample_agent_params(spec, rng) for _ in range(3000))])
    np.testing.assert_allclose(draws.mean(axis=0), [spec.mu_nu_ped, spec.mu_w_ped], rtol=0.02)


def test_zero_std_gives_the_mean():
    phi = PHI_BOUNDS.mean(axis=1)
    phi[1::2] = 0.0
    p = sample_agent_params(PopulationSpec.from_phi(phi), np.random.default_rng(0))
    assert p.nu_ped == phi[0] and p.w_veh == phi[6]


def test_clamp_and_shape_checks():
    np.testing.assert_array_equal(clamp_phi(np.full(8, 100.0)), PHI_BOUNDS[:, 1])
    with pytest.raises(ValueError):
        clamp_phi(np.zeros(7))
    with pytest.raises(ValueError):
        PopulationSpec.from_phi([1.0] * 9)
