import math

import numpy as np
import pytest

from scenarios import S1, S2, S3, get_scenario, supplementary_dataset
from src.common.exceptions import DomainError, ValidationError
from src.core.constants import LAMBDA
from src.simulation.noise import NoiseSettings, noiseless_settings, perturb_measurement, reported_sd
from src.simulation.scenario import Scenario
from src.simulation.simulator import (
    PERCENT_GRID,
    density_at,
    expected_concentration,
    simulate_core,
    subsample,
    subsample_size,
    true_age,
    true_total_concentration,
)


def test_true_age():
    assert true_age(S1, 10) == pytest.approx(30.0)
    assert true_age(S2, 15) == pytest.approx(135.0)
    for scenario in (S1, S2, S3):
        assert true_age(scenario, 0) == 0.0
    with pytest.raises(DomainError):
        true_age(S1, -1.0)


def test_density_at():
    assert density_at(14.5) == pytest.approx(0.14738, abs=1e-5)
    assert density_at(0.5) == pytest.approx(0.10007, abs=1e-5)
    assert density_at(15) == pytest.approx(0.15)


def test_true_total_concentration():
    assert true_total_concentration(S2, 2.0, 3.0) == pytest.approx(454.1, abs=0.1)
    # Within two reported sds of the published Sim02-03 value
    assert abs(true_total_concentration(S2, 2.0, 3.0) - 453.0503) < 2 * 20.3873
    assert true_total_concentration(S3, 9.0, 10.0) == pytest.approx(19.2, abs=0.5)
    assert expected_concentration(S1.age_fn, 0.0, 15.0, 4.0, 5.0) == pytest.approx(15.0)
    with pytest.raises(DomainError):
        true_total_concentration(S1, 3.0, 3.0)


def test_builtin_scenarios_keep_table_values():
    assert (S1.phi, S1.supported) == (50.0, 25.0)
    assert S1.table_values() == (100.0, 10.0)
    assert get_scenario(2, use_table_values=True).supported == 25.0
    assert S3.table_values() == (500.0, 15.0)
    assert get_scenario("s3") is S3
    with pytest.raises(DomainError):
        get_scenario(4)


def test_custom_scenario():
    custom = Scenario.custom((0.0, 8.0), 25.0, math.pi, phi=500.0, supported=15.0)
    assert custom.age_fn(10.0) == pytest.approx(S3.age_fn(10.0))
    assert custom.number == 0
    with pytest.raises(ValidationError, match="non-decreasing"):
        Scenario.custom((0.0, 1.0, -1.0), phi=50.0, supported=10.0)
    with pytest.raises(ValidationError, match="age_fn\\(0\\)"):
        Scenario.custom((5.0, 1.0), phi=50.0, supported=10.0)
    with pytest.raises(ValidationError, match="phi"):
        S1.with_parameters(phi=-1.0)


def test_reported_sd():
    assert reported_sd(909.39) == pytest.approx(40.92, abs=0.01)
    assert reported_sd(21.36) == 1.0
    nominal = NoiseSettings(use_nominal_sd_rule=True)
    assert nominal.sd_factor == pytest.approx(0.015)
    assert reported_sd(1000.0, nominal) == pytest.approx(15.0)


def test_noise_settings_validation():
    with pytest.raises(ValueError):
        NoiseSettings(p_out=1.5)
    with pytest.raises(ValueError):
        NoiseSettings(scatter_var=-1.0)
    with pytest.raises(AttributeError):
        NoiseSettings(flux=1.0)
    assert NoiseSettings(scatter_var=4.0).outlier_shift == pytest.approx(6.0)


def test_perturb_without_noise_is_exact():
    true_conc = np.array([500.0, 40.0, 12.0])
    measured, sd = perturb_measurement(true_conc, noiseless_settings(), np.random.default_rng(0))
    np.testing.assert_array_equal(measured, true_conc)
    np.testing.assert_allclose(sd, [22.5, 1.8, 1.0])


def test_perturb_spread_matches_noise_model():
    cfg = NoiseSettings(p_out=0.0)
    measured, _ = perturb_measurement(np.full(100000, 500.0), cfg, np.random.default_rng(3))
    expected = math.sqrt(cfg.scatter_var + reported_sd(500.0, cfg) ** 2)
    assert np.std(measured) == pytest.approx(expected, rel=0.03)


def test_outliers_stay_within_the_shift():
    cfg = NoiseSettings(scatter_var=0.0, p_out=1.0, x_shift=5.0, measurement_noise=False)
    measured, _ = perturb_measurement(np.full(1000, 100.0), cfg, np.random.default_rng(1))
    assert np.all(np.abs(measured - 100.0) <= 5.0)
    assert np.std(measured) > 1.0


def test_simulate_core_shape_and_ra_sd():
    dataset = simulate_core(S3, NoiseSettings(seed=7))
    assert len(dataset) == 30
    np.testing.assert_allclose(dataset.ra226_sd, 0.675)
    assert dataset.labels[0] == "S3-01"


def test_simulate_core_noiseless(noiseless_s1):
    tops, bottoms = noiseless_s1.tops, noiseless_s1.depths
    np.testing.assert_allclose(noiseless_s1.pb210, true_total_concentration(S1, tops, bottoms))
    np.testing.assert_array_equal(noiseless_s1.ra226, np.full(30, 25.0))
    np.testing.assert_allclose(noiseless_s1.densities, density_at((tops + bottoms) / 2.0))


def test_simulate_core_is_deterministic():
    assert simulate_core(S2, NoiseSettings(seed=5)) == simulate_core(S2, NoiseSettings(seed=5))
    assert simulate_core(S2, NoiseSettings(seed=5)) != simulate_core(S2, NoiseSettings(seed=6))


def test_simulate_core_grid():
    half = simulate_core(S1, noiseless_settings(), thickness=0.5)
    assert len(half) == 60
    with pytest.raises(DomainError):
        simulate_core(S1, thickness=0.7)


@pytest.mark.parametrize("scenario", [S1, S2, S3])
def test_noiseless_cores_have_constant_supply(scenario):
    dataset = simulate_core(scenario, noiseless_settings())
    mass = 10.0 * dataset.densities * dataset.thicknesses
    inventory = (dataset.pb210 - scenario.supported) * mass
    decayed = (np.exp(-LAMBDA * scenario.age_fn(dataset.tops)) - np.exp(-LAMBDA * scenario.age_fn(dataset.depths)))
    np.testing.assert_allclose(LAMBDA * inventory / decayed, scenario.phi, rtol=1e-9)


@pytest.mark.parametrize("scenario", [S1, S2, S3])
def test_noiseless_inventory_telescopes(scenario):
    dataset = simulate_core(scenario, noiseless_settings())
    mass = 10.0 * dataset.densities * dataset.thicknesses
    total = ((dataset.pb210 - scenario.supported) * mass).sum()
    expected = (scenario.phi / LAMBDA) * (1.0 - math.exp(-LAMBDA * scenario.age_fn(30.0)))
    assert total == pytest.approx(expected, rel=1e-9)


def test_subsample_size():
    assert subsample_size(20, 30) == 6
    assert subsample_size(50, 30) == 15
    assert subsample_size(10, 5) == 1
    assert PERCENT_GRID[0] == 10 and PERCENT_GRID[-1] == 100 and len(PERCENT_GRID) == 19


def test_subsample(sim01):
    rng = np.random.default_rng(0)
    sample = subsample(sim01, 20, rng)
    assert len(sample) == 6
    assert sample.max_depth == 30.0
    assert np.all(np.diff(sample.depths) > 0)
    assert subsample(sim01, 100, rng) is sim01
    with pytest.raises(DomainError):
        subsample(sim01, 12, rng)


def test_subsample_always_keeps_the_deepest_slab(sim01):
    rng = np.random.default_rng(1)
    assert all(subsample(sim01, 50, rng).max_depth == 30.0 for _ in range(1000))


def test_supplementary_sd_rule():
    for key, scenario in (('S1', S1), ('S2', S2), ('S3', S3)):
        dataset = supplementary_dataset(key)
        np.testing.assert_allclose(reported_sd(dataset.pb210), dataset.pb210_sd, atol=6e-5)
        np.testing.assert_allclose(dataset.ra226_sd, 0.045 * scenario.supported, rtol=1e-12)
