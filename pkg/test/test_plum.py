import math

import numpy as np
import pytest
from scipy import stats

from algorithms.mcmc import McmcSettings
from algorithms.plum import (
    PlumModel,
    PlumParams,
    PlumPriors,
    PosteriorDraws,
    age_at,
    initial_params,
    log_likelihood,
    log_prior,
    sample_posterior,
    summarize_chronology,
)
from src.common.exceptions import ConvergenceWarning, DomainError
from src.core.chronology import PLUM
from src.core.units import slab_mass_factor
from src.simulation.noise import noiseless_settings
from src.simulation.simulator import simulate_core

from .conftest import make_dataset

PRIORS = PlumPriors(s_mean=20.0)


def constant_params(rate=5.0, n=30, w=0.5, phi=80.0, supported=20.0):
    return PlumParams(alphas=[rate] * n, w=w, phi=phi, supported=supported)


def constant_draws(n_draws, alphas):
    ones = np.ones(n_draws)
    return PosteriorDraws(alphas=np.tile(alphas, (n_draws, 1)), w=0.5 * ones, phi=50.0 * ones,
                          supported=10.0 * ones, log_posterior=np.zeros(n_draws), chain=np.zeros(n_draws, dtype=int))


def test_age_at():
    assert age_at([2.0, 3.0], 1.5) == pytest.approx(3.5)
    assert age_at([2.0, 3.0], 2.0) == pytest.approx(5.0)
    assert age_at(PlumParams([2.0, 3.0], 0.5, 50.0, 10.0), 0.0) == 0.0
    assert age_at([4.0] * 5, 3.7) == pytest.approx(14.8)
    np.testing.assert_allclose(age_at([1.0, 2.0, 4.0], [0.25, 0.75, 1.25, 1.5], section_width=0.5),
                               [0.25, 1.0, 2.5, 3.5])


@pytest.mark.parametrize("alphas, depth, section_width", [
    ([2.0, 3.0], 2.5, 1.0),
    ([2.0, 3.0], -0.1, 1.0),
    ([1.0, 2.0], 1.5, 0.5),
    ([1.0, 2.0], [0.25, 1.01], 0.5),
])
def test_age_at_outside_the_grid(alphas, depth, section_width):
    with pytest.raises(DomainError):
        age_at(alphas, depth, section_width=section_width)


def test_params_support():
    assert PlumParams([1.0, 2.0], 0.5, 50.0, 10.0).in_support
    assert not PlumParams([1.0, 0.0], 0.5, 50.0, 10.0).in_support
    assert not PlumParams([1.0], 1.0, 50.0, 10.0).in_support


def test_log_prior_matches_scipy():
    expected = (stats.gamma.logpdf(4.0, 1.5, scale=10.0 / 1.5) + stats.gamma.logpdf(8.0, 1.5, scale=10.0 / 1.5)
                - math.log(0.5) + stats.beta.logpdf(0.5, 5.0, 5.0)
                + stats.gamma.logpdf(50.0, 2.0, scale=25.0) + stats.gamma.logpdf(20.0, 2.0, scale=10.0))
    assert log_prior(PlumParams([4.0, 6.0], 0.5, 50.0, 20.0), PRIORS) == pytest.approx(expected)


def test_log_prior_support():
    assert log_prior(PlumParams([5.0, 1.0], 0.9, 50.0, 20.0), PRIORS) == -np.inf
    assert log_prior(PlumParams([5.0, 5.0], 0.5, -1.0, 20.0), PRIORS) == -np.inf
    assert log_prior(PlumParams([5.0, 5.0], 0.0, 50.0, 20.0), PRIORS) == -np.inf
    with pytest.raises(DomainError, match="s_mean"):
        log_prior(PlumParams([5.0], 0.5, 50.0, 20.0), PlumPriors())


def test_log_prior_supply_term_decreases_past_its_mode():
    values = [log_prior(PlumParams([5.0, 5.0], 0.5, phi, 20.0), PRIORS) for phi in (25.0, 50.0, 100.0)]
    assert values[0] > values[1] > values[2]


def test_log_likelihood_of_a_perfect_fit(linear_scenario):
    dataset = simulate_core(linear_scenario, noiseless_settings())
    mass = slab_mass_factor(dataset.densities, dataset.thicknesses)
    expected = (-np.log(dataset.pb210_sd * mass).sum() - np.log(dataset.ra226_sd).sum()
                - 0.5 * math.log(2.0 * math.pi) * 60)
    value = log_likelihood(constant_params(), dataset)
    assert value == pytest.approx(expected, rel=1e-9)

    alphas = [5.0] * 30
    alphas[4] = 6.0
    assert log_likelihood(PlumParams(alphas, 0.5, 80.0, 20.0), dataset) < value
    assert log_likelihood(constant_params(supported=21.0), dataset) < value


def test_zero_supply_is_best_without_excess():
    dataset = make_dataset([15.0] * 5, ra226=[15.0] * 5)
    flat = log_likelihood(PlumParams([5.0] * 5, 0.5, 0.0, 15.0), dataset)
    assert flat > log_likelihood(PlumParams([5.0] * 5, 0.5, 5.0, 15.0), dataset)


def test_model_grid():
    model = PlumModel(make_dataset([50.0] * 3), section_width=2.0)
    assert model.n_sections == 15
    assert model.grid_depth == 30.0
    with pytest.raises(DomainError):
        PlumModel(make_dataset([50.0] * 3), n_sections=2)
    with pytest.raises(DomainError):
        PlumModel(make_dataset([50.0] * 3), section_width=0.0)


def test_unconstrained_round_trip():
    model = PlumModel(None, PRIORS, n_sections=3)
    params = PlumParams([1.0, 2.0, 3.0], 0.3, 40.0, 12.0)
    back = model.from_vector(model.to_vector(params))
    np.testing.assert_allclose(back.alphas, params.alphas)
    assert (back.w, back.phi, back.supported) == pytest.approx((0.3, 40.0, 12.0))


def test_log_target_adds_the_jacobian(sim02):
    model = PlumModel(sim02)
    params = initial_params(sim02, model=model)
    theta = model.to_vector(params)
    jacobian = (np.log(params.alphas).sum() + math.log(params.w * (1.0 - params.w))
                + math.log(params.phi * params.supported))
    assert model.log_target(theta) == pytest.approx(model.log_posterior(params) + jacobian, rel=1e-9)

    outside = theta.copy()
    outside[1] = outside[0] + math.log(0.1 * params.w)
    assert model.log_target(outside) == -np.inf


def test_proposal_blocks_cover_every_coordinate():
    model = PlumModel(None, PRIORS, n_sections=12)
    blocks = model.proposal_blocks(rates_per_block=5)
    names = [name for name, _, _ in blocks]
    assert names == ['joint', 'alphas_1-5', 'alphas_6-10', 'alphas_11-12', 'w', 'phi', 'supported']
    np.testing.assert_array_equal(blocks[0][1], np.arange(15))
    rates = np.concatenate([indices for name, indices, _ in blocks if name.startswith('alphas')])
    np.testing.assert_array_equal(rates, np.arange(12))
    assert all(sd > 0 for _, _, sd in blocks)


def test_initial_params_are_supported(sim02):
    model = PlumModel(sim02)
    start = initial_params(sim02, model=model)
    assert len(start.alphas) == 30
    assert np.isfinite(model.log_posterior(start))
    assert start.supported == pytest.approx(np.mean(sim02.ra226))

    prior_only = initial_params(None, PRIORS)
    assert prior_only.alphas == (10.0,) * 30


def test_sampling_is_deterministic(sim01, quick_mcmc):
    first = sample_posterior(sim01, mcmc=quick_mcmc)
    second = sample_posterior(sim01, mcmc=quick_mcmc)
    assert len(first) == 100
    assert first.n_sections == 30
    np.testing.assert_array_equal(first.alphas, second.alphas)
    np.testing.assert_array_equal(first.phi, second.phi)
    assert np.all(first.alphas > 0)
    assert np.all((first.w > 0) & (first.w < 1))
    assert set(first.acceptance) == {name for name, _, _ in PlumModel(sim01).proposal_blocks()}
    assert first.warnings == ()


def test_draws_frame(sim01, quick_mcmc):
    frame = sample_posterior(sim01, mcmc=quick_mcmc).to_frame()
    assert list(frame.columns[:6]) == ['chain', 'draw', 'log_posterior', 'w', 'phi', 'supported']
    assert frame.columns[-1] == 'alpha_30'
    assert len(frame) == 100


def test_summary_of_sampled_draws(sim01, quick_mcmc):
    chronology = summarize_chronology(sample_posterior(sim01, mcmc=quick_mcmc))
    assert chronology.method == PLUM
    assert [e.depth for e in chronology] == list(np.arange(1.0, 31.0))
    for estimate in chronology:
        assert estimate.lower95 <= estimate.age_mean <= estimate.upper95
        assert estimate.sd_proxy == pytest.approx(estimate.interval_length / 4.0)
    ages = chronology.ages
    assert np.all(np.diff(ages) > 0)


def test_summary_of_constant_draws():
    chronology = summarize_chronology(constant_draws(100, [2.0, 2.0, 2.0]), depths=[3.0, 1.0])
    assert [e.depth for e in chronology] == [1.0, 3.0]
    assert chronology.estimates[1].age_mean == pytest.approx(6.0)
    assert all(e.interval_length == 0.0 for e in chronology)
    with pytest.raises(DomainError, match="at least 100"):
        summarize_chronology(constant_draws(99, [2.0]))
    with pytest.raises(DomainError):
        summarize_chronology(constant_draws(100, [2.0]), depths=[2.0])


def test_summary_mean_stays_inside_the_interval():
    # One extreme draw drags the mean above the 97.5 percentile
    alphas = np.ones((100, 1))
    alphas[-1] = 1000.0
    ones = np.ones(100)
    draws = PosteriorDraws(alphas=alphas, w=0.5 * ones, phi=50.0 * ones, supported=10.0 * ones,
                           log_posterior=np.zeros(100), chain=np.zeros(100, dtype=int))
    assert draws.ages([1.0]).mean() > np.percentile(draws.ages([1.0]), 97.5)
    estimate = summarize_chronology(draws).estimates[0]
    assert estimate.age_mean == estimate.upper95 == pytest.approx(1.0)


def test_short_chains_warn_at_the_default_ess_floor(sim01):
    mcmc = McmcSettings(iterations=600, burn_in=200, thinning=4, seed=11)
    assert mcmc.ess_floor == 100
    with pytest.warns(ConvergenceWarning, match="effective sample size below 100"):
        draws = sample_posterior(sim01, mcmc=mcmc)
    assert len(draws.warnings) == 1
    assert draws.diagnostics['low_ess']


@pytest.mark.slow
def test_recovers_the_parameters_of_noiseless_scenario_1(noiseless_s1):
    draws = sample_posterior(noiseless_s1, mcmc=McmcSettings(seed=1))
    assert draws.phi.mean() == pytest.approx(50.0, rel=0.10)
    assert draws.supported.mean() == pytest.approx(25.0, rel=0.05)
    ages = draws.ages(np.arange(0.0, 31.0))
    assert np.all(np.diff(ages, axis=1) > 0)


@pytest.mark.slow
def test_prior_only_sampling_recovers_prior_means():
    mcmc = McmcSettings(iterations=60000, burn_in=10000, thinning=10, seed=2, ess_floor=0)
    draws = sample_posterior(None, PlumPriors(s_mean=25.0), mcmc)
    mcse = draws.diagnostics['mcse']
    assert abs(draws.phi.mean() - 50.0) <= 3 * mcse['phi']
    assert abs(draws.supported.mean() - 25.0) <= 3 * mcse['supported']
    assert abs(draws.w.mean() - 0.5) <= 3 * mcse['w']
