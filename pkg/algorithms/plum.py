"""
Bayesian 210Pb dating.

The age-depth model is piecewise linear over sections of equal width starting at the
surface (age 0). Section slopes (yr/cm) follow an autoregressive gamma prior with memory w;
a constant supply phi and a constant supported level are inferred jointly with them.
Total 210Pb is modelled in areal form: the slab inventory y * 10 rho delta is normal around
10 rho delta * supported + (phi / lambda) (exp(-lambda t(top)) - exp(-lambda t(bottom))).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from scipy.special import betaln, expit, gammaln, log_expit

from algorithms.crs import ci_crs_chronology
from algorithms.mcmc import AdaptiveMetropolis, McmcSettings, chain_diagnostics, warn_low_ess
from src.common.exceptions import ChronologyError, DomainError
from src.common.settings import Settings
from src.common.utils import derive_rng
from src.common.validators import validate_open_unit, validate_optional_positive, validate_positive
from src.core.chronology import PLUM, AgeEstimate, Chronology
from src.core.constants import LAMBDA
from src.core.units import slab_mass_factor

logger = logging.getLogger(__name__)

# The section grid always reaches this depth, cm
MIN_GRID_DEPTH = 30.0
MIN_SUMMARY_DRAWS = 100
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PlumParams:
    """
    One state of the Bayesian model.

    Attributes:
        alphas (tuple of float): Accumulation rate of each section, yr/cm, shallowest first.
        w (float): Memory, in (0, 1).
        phi (float): 210Pb supply, Bq/(m2 yr).
        supported (float): Supported 210Pb, Bq/kg.
    """
    alphas: Tuple[float, ...]
    w: float
    phi: float
    supported: float

    def __post_init__(self):
        object.__setattr__(self, 'alphas', tuple(float(a) for a in np.ravel(self.alphas)))

    @property
    def in_support(self):
        return (all(a > 0 for a in self.alphas) and 0 < self.w < 1
                and self.phi > 0 and self.supported > 0)


class PlumPriors(Settings):
    """
    Prior settings.

    Keys:
        acc_shape, acc_mean: Gamma prior on the accumulation innovations, mean in yr/cm.
        mem_mean, mem_strength: Beta(mem_strength * mem_mean, mem_strength * (1 - mem_mean)) prior on w.
        phi_shape, phi_mean: Gamma prior on the supply, mean in Bq/(m2 yr).
        s_shape, s_mean: Gamma prior on the supported level, mean in Bq/kg.
            s_mean None stands for the mean of the 226Ra column of the dataset.
    """
    default_settings = {
        'acc_shape': 1.5,
        'acc_mean': 10.0,
        'mem_mean': 0.5,
        'mem_strength': 10.0,
        'phi_shape': 2.0,
        'phi_mean': 50.0,
        's_shape': 2.0,
        's_mean': None,
    }

    _validators = {
        'acc_shape': validate_positive('acc_shape'),
        'acc_mean': validate_positive('acc_mean'),
        'mem_mean': validate_open_unit('mem_mean'),
        'mem_strength': validate_positive('mem_strength'),
        'phi_shape': validate_positive('phi_shape'),
        'phi_mean': validate_positive('phi_mean'),
        's_shape': validate_positive('s_shape'),
        's_mean': validate_optional_positive('s_mean'),
    }

    def for_dataset(self, dataset):
        """Copy with s_mean filled in from the dataset's 226Ra mean when unset."""
        resolved = PlumPriors(self.to_dict())
        if resolved.s_mean is None:
            if dataset is None:
                raise DomainError("s_mean must be given when sampling without data")
            resolved.s_mean = float(np.mean(dataset.ra226))
        return resolved


def _gamma_logpdf(x, shape, mean):
    rate = shape / mean
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def age_at(params, depth, section_width=1.0):
    """
    Age (yr) at depth (cm) under the piecewise linear model, t(0) = 0.

    Args:
        params (PlumParams or array of alphas): Section accumulation rates.
        depth (float or array): Depths in [0, number of sections * section_width].
        section_width (float): cm.

    Raises:
        DomainError: If a depth lies outside the section grid.
    """
    alphas = np.asarray(params.alphas if isinstance(params, PlumParams) else params, dtype=float)
    depth = np.asarray(depth, dtype=float)
    grid_depth = len(alphas) * section_width
    if np.any(depth < 0) or np.any(depth > grid_depth + 1e-9):
        raise DomainError(f"depth must lie within [0, {grid_depth:g}] cm")
    boundary_ages = np.concatenate([[0.0], np.cumsum(alphas * section_width)])
    section = np.minimum((depth // section_width).astype(int), len(alphas) - 1)
    age = boundary_ages[section] + alphas[section] * (depth - section * section_width)
    return float(age) if age.ndim == 0 else age


class PlumModel:
    """
    Log prior, log likelihood and log posterior of a dataset, with all data-dependent
    arrays and prior constants computed once.

    Attributes:
        dataset (Dataset or None): None gives the prior alone.
        priors (PlumPriors): With s_mean resolved.
        section_width (float): cm.
        n_sections (int): Sections covering max(30 cm, deepest slab).
    """

    def __init__(self, dataset, priors=None, *, section_width=1.0, n_sections=None, lam=LAMBDA):
        if section_width <= 0:
            raise DomainError("section_width must be > 0")
        self.dataset = dataset
        self.priors = (priors or PlumPriors()).for_dataset(dataset)
        self.section_width = float(section_width)
        self.lam = lam

        deepest = dataset.max_depth if dataset is not None else 0.0
        if n_sections is None:
            n_sections = int(math.ceil(max(MIN_GRID_DEPTH, deepest) / section_width - 1e-9))
        elif n_sections < 1 or n_sections * section_width < deepest - 1e-9:
            raise DomainError(f"{n_sections} sections of {section_width:g} cm do not reach {deepest:g} cm")
        self.n_sections = int(n_sections)
        self.grid_depth = self.n_sections * self.section_width

        if dataset is not None:
            mass = slab_mass_factor(dataset.densities, dataset.thicknesses)
            self._mass = mass
            self._y = dataset.pb210 * mass
            self._y_sd = dataset.pb210_sd * mass
            self._top_section, self._top_offset = self._locate(dataset.tops)
            self._bottom_section, self._bottom_offset = self._locate(dataset.depths)
            self._ra = dataset.ra226
            self._ra_sd = dataset.ra226_sd
            self._likelihood_constant = -(np.log(self._y_sd).sum() + np.log(self._ra_sd).sum()
                                          + _HALF_LOG_2PI * (len(self._y) + len(self._ra)))

        p = self.priors
        self._acc_rate = p.acc_shape / p.acc_mean
        self._acc_constant = p.acc_shape * math.log(self._acc_rate) - gammaln(p.acc_shape)
        self._mem_a = p.mem_strength * p.mem_mean
        self._mem_b = p.mem_strength * (1.0 - p.mem_mean)
        self._mem_constant = -betaln(self._mem_a, self._mem_b)

    def _locate(self, depths):
        section = np.minimum((depths // self.section_width).astype(int), self.n_sections - 1)
        return section, depths - section * self.section_width

    def log_prior(self, params):
        """Log prior density, -inf outside the support."""
        alphas = np.asarray(params.alphas, dtype=float)
        if len(alphas) != self.n_sections:
            raise DomainError(f"expected {self.n_sections} section rates, got {len(alphas)}")
        return self._log_prior(alphas, params.w, params.phi, params.supported)

    def _log_prior(self, alphas, w, phi, supported):
        if np.any(alphas <= 0) or not 0 < w < 1 or phi <= 0 or supported <= 0:
            return -np.inf

        innovations = np.empty_like(alphas)
        innovations[0] = alphas[0]
        innovations[1:] = (alphas[1:] - w * alphas[:-1]) / (1.0 - w)
        if np.any(innovations <= 0):
            return -np.inf

        p = self.priors
        acc = (len(alphas) * self._acc_constant + (p.acc_shape - 1.0) * np.log(innovations).sum()
               - self._acc_rate * innovations.sum() - (len(alphas) - 1) * math.log(1.0 - w))
        mem = self._mem_constant + (self._mem_a - 1.0) * math.log(w) + (self._mem_b - 1.0) * math.log(1.0 - w)
        return float(acc + mem + _gamma_logpdf(phi, p.phi_shape, p.phi_mean)
                     + _gamma_logpdf(supported, p.s_shape, p.s_mean))

    def log_likelihood(self, params):
        """Gaussian log likelihood of the areal 210Pb inventories and of the 226Ra values; 0 without data."""
        return self._log_likelihood(np.asarray(params.alphas, dtype=float), params.phi, params.supported)

    def _log_likelihood(self, alphas, phi, supported):
        if self.dataset is None:
            return 0.0
        boundary_ages = np.concatenate([[0.0], np.cumsum(alphas * self.section_width)])
        top_age = boundary_ages[self._top_section] + alphas[self._top_section] * self._top_offset
        bottom_age = boundary_ages[self._bottom_section] + alphas[self._bottom_section] * self._bottom_offset

        expected = (self._mass * supported
                    + (phi / self.lam) * (np.exp(-self.lam * top_age) - np.exp(-self.lam * bottom_age)))
        pb_residual = (self._y - expected) / self._y_sd
        ra_residual = (self._ra - supported) / self._ra_sd
        return float(self._likelihood_constant - 0.5 * (pb_residual @ pb_residual + ra_residual @ ra_residual))

    def log_posterior(self, params):
        prior = self.log_prior(params)
        if not np.isfinite(prior):
            return -np.inf
        return prior + self.log_likelihood(params)

    # Unconstrained coordinates: log alphas, logit w, log phi, log supported

    def to_vector(self, params):
        return np.concatenate([np.log(params.alphas),
                               [math.log(params.w) - math.log1p(-params.w), math.log(params.phi),
                                math.log(params.supported)]])

    def from_vector(self, theta):
        k = self.n_sections
        return PlumParams(alphas=np.exp(theta[:k]), w=float(expit(theta[k])), phi=float(np.exp(theta[k + 1])),
                          supported=float(np.exp(theta[k + 2])))

    def log_target(self, theta):
        """Log posterior in unconstrained coordinates, Jacobian included."""
        k = self.n_sections
        with np.errstate(over='ignore'):
            alphas = np.exp(theta[:k])
            phi, supported = math.exp(min(theta[k + 1], 700.0)), math.exp(min(theta[k + 2], 700.0))
        w = float(expit(theta[k]))
        if not (np.all(np.isfinite(alphas)) and np.isfinite(phi) and np.isfinite(supported)):
            return -np.inf
        prior = self._log_prior(alphas, w, phi, supported)
        if not np.isfinite(prior):
            return -np.inf
        value = prior + self._log_likelihood(alphas, phi, supported)
        if not np.isfinite(value):
            return -np.inf
        jacobian = theta[:k].sum() + log_expit(theta[k]) + log_expit(-theta[k]) + theta[k + 1] + theta[k + 2]
        return value + float(jacobian)

    def proposal_blocks(self, rates_per_block=5):
        """
        Named coordinate blocks of the sampler, with their initial step sds.

        One block moves every coordinate jointly, the section rates are also moved in
        contiguous groups of rates_per_block, and w, phi and the supported level alone.

        Returns:
            list of (str, numpy.ndarray, float): Name, indices and initial sd of each block.
        """
        k = self.n_sections
        blocks = [('joint', np.arange(k + 3), 0.02)]
        for start in range(0, k, rates_per_block):
            stop = min(start + rates_per_block, k)
            blocks.append((f"alphas_{start + 1}-{stop}", np.arange(start, stop), 0.05))
        blocks += [('w', np.array([k]), 0.3), ('phi', np.array([k + 1]), 0.05),
                   ('supported', np.array([k + 2]), 0.02)]
        return blocks


def log_prior(params, priors):
    """
    Log prior density of params, -inf outside the support.

    The section rates follow alphas[j] = w * alphas[j - 1] + (1 - w) * g_j, g_1 = alphas[0], with
    independent Gamma(acc_shape, mean acc_mean) innovations g_j; w, phi and the supported level have
    the Beta and Gamma priors set in priors.

    Raises:
        DomainError: If priors.s_mean is unset.
    """
    return PlumModel(None, priors, n_sections=len(params.alphas)).log_prior(params)


def log_likelihood(params, dataset, section_width=1.0):
    """Log likelihood of the dataset's 210Pb and 226Ra under params, sections of section_width cm."""
    model = PlumModel(dataset, section_width=section_width, n_sections=len(params.alphas))
    return model.log_likelihood(params)


def _repair_memory_constraint(alphas, w, margin=1.05):
    # The prior needs alphas[j] > w * alphas[j - 1]
    repaired = np.array(alphas, dtype=float)
    for j in range(1, len(repaired)):
        repaired[j] = max(repaired[j], margin * w * repaired[j - 1])
    return repaired


def initial_params(dataset, priors=None, *, model=None):
    """
    Starting point of the sampler.

    Section rates follow a CI-CRS chronology of the dataset where one can be computed
    (the mean rate of the dated part beyond it), otherwise acc_mean. The supply starts at
    lambda times the CI-CRS total inventory, the supported level at the 226Ra mean and
    w at mem_mean.
    """
    model = model or PlumModel(dataset, priors)
    p = model.priors
    alphas = np.full(model.n_sections, p.acc_mean)
    phi = p.phi_mean
    supported = p.s_mean

    if dataset is not None:
        supported = float(np.mean(dataset.ra226))
        try:
            chronology = ci_crs_chronology(dataset)
        except ChronologyError as e:
            chronology = None
            logger.debug("No CI-CRS starting point (%s), using prior means", e)
        dated = chronology.dated if chronology is not None else ()
        if dated:
            depths = np.concatenate([[0.0], [estimate.depth for estimate in dated]])
            ages = np.concatenate([[0.0], [estimate.age_mean for estimate in dated]])
            boundaries = model.section_width * np.arange(model.n_sections + 1)
            mean_rate = ages[-1] / depths[-1]
            extrapolated = ages[-1] + mean_rate * np.clip(boundaries - depths[-1], 0.0, None)
            boundary_ages = np.where(boundaries <= depths[-1], np.interp(boundaries, depths, ages), extrapolated)
            alphas = np.clip(np.diff(boundary_ages) / model.section_width, 0.01 * p.acc_mean, None)
            phi = LAMBDA * chronology.notes['a0']

    alphas = _repair_memory_constraint(alphas, p.mem_mean)
    params = PlumParams(alphas=alphas, w=p.mem_mean, phi=phi, supported=supported)
    if not np.isfinite(model.log_posterior(params)):
        params = PlumParams(alphas=np.full(model.n_sections, p.acc_mean), w=p.mem_mean, phi=p.phi_mean,
                            supported=supported)
    return params


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """
    Retained MCMC draws of the Bayesian model, all chains stacked.

    Attributes:
        alphas (numpy.ndarray): n_draws x n_sections, yr/cm.
        w, phi, supported (numpy.ndarray): n_draws each.
        log_posterior (numpy.ndarray): Log posterior density of each draw.
        chain (numpy.ndarray): Chain index of each draw.
        section_width (float): cm.
        acceptance (dict): Block name -> post-burn-in acceptance rate, averaged over chains.
        diagnostics (dict): 'ess', 'mcse' and, with several chains, 'rhat' per quantity.
        warnings (tuple of str): Convergence warnings issued while sampling.
    """
    alphas: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    supported: np.ndarray
    log_posterior: np.ndarray
    chain: np.ndarray
    section_width: float = 1.0
    acceptance: Dict[str, float] = field(default_factory=dict)
    diagnostics: Dict[str, dict] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def __len__(self):
        return len(self.phi)

    @property
    def n_sections(self):
        return self.alphas.shape[1]

    @property
    def grid_depth(self):
        return self.n_sections * self.section_width

    def params(self, index):
        return PlumParams(alphas=self.alphas[index], w=float(self.w[index]), phi=float(self.phi[index]),
                          supported=float(self.supported[index]))

    def ages(self, depths):
        """n_draws x len(depths) matrix of ages, yr."""
        depths = np.asarray(depths, dtype=float)
        if np.any(depths < 0) or np.any(depths > self.grid_depth + 1e-9):
            raise DomainError(f"depths must lie within [0, {self.grid_depth:g}] cm")
        boundary_ages = np.concatenate([np.zeros((len(self), 1)), np.cumsum(self.alphas * self.section_width, axis=1)],
                                       axis=1)
        section = np.minimum((depths // self.section_width).astype(int), self.n_sections - 1)
        return boundary_ages[:, section] + self.alphas[:, section] * (depths - section * self.section_width)

    def to_frame(self):
        """One row per retained draw: chain, draw, log_posterior, w, phi, supported, alpha_1..alpha_K."""
        frame = pd.DataFrame({
            'chain': self.chain,
            'draw': np.arange(len(self)),
            'log_posterior': self.log_posterior,
            'w': self.w,
            'phi': self.phi,
            'supported': self.supported,
        })
        alphas = pd.DataFrame(self.alphas, columns=[f"alpha_{j + 1}" for j in range(self.n_sections)])
        return pd.concat([frame, alphas], axis=1)


def _chain_matrix(values, n_chains):
    return np.asarray(values).reshape(n_chains, -1) if n_chains > 1 else np.asarray(values)[np.newaxis, :]


def sample_posterior(dataset, priors=None, mcmc=None, *, section_width=1.0):
    """
    Samples the posterior of the Bayesian model with blocked adaptive Metropolis.

    Coordinates are the log section rates, logit memory, log supply and log supported level.
    Blocks: every coordinate jointly, groups of five neighbouring section rates, then memory,
    supply and supported level alone (see PlumModel.proposal_blocks).

    Args:
        dataset (Dataset or None): None samples the prior (s_mean must then be set).
        priors (PlumPriors, optional): Prior settings.
        mcmc (McmcSettings, optional): Sampler settings.
        section_width (float): cm.

    Returns:
        PosteriorDraws: Deterministic given mcmc.seed. When an effective sample size falls below
        mcmc.ess_floor a ConvergenceWarning is issued and its message kept in warnings.
    """
    mcmc = mcmc or McmcSettings()
    model = PlumModel(dataset, priors, section_width=section_width)
    start = initial_params(dataset, model.priors, model=model)
    start_vector = model.to_vector(start)

    initials = [start_vector]
    for k in range(1, mcmc.chains):
        rng = derive_rng(mcmc.seed, k)
        jittered = start_vector.copy()
        # A common shift of the log rates keeps the memory constraint satisfied
        jittered[:model.n_sections] += rng.normal(0.0, 0.1)
        jittered[model.n_sections + 1:] += rng.normal(0.0, 0.05, size=2)
        initials.append(jittered)

    names, indices, sds = zip(*model.proposal_blocks())
    sampler = AdaptiveMetropolis(model.log_target, indices, block_names=names, initial_sds=sds, settings=mcmc)
    runs = sampler.run_chains(initials)

    samples = np.vstack([run.samples for run in runs])
    chain = np.concatenate([np.full(len(run.samples), run.chain) for run in runs])
    k = model.n_sections
    alphas = np.exp(samples[:, :k])
    w = expit(samples[:, k])
    phi = np.exp(samples[:, k + 1])
    supported = np.exp(samples[:, k + 2])
    log_posterior = np.array([model.log_posterior(PlumParams(alphas[i], w[i], phi[i], supported[i]))
                              for i in range(len(samples))])

    n_chains = len(runs)
    quantities = {
        'w': _chain_matrix(w, n_chains),
        'phi': _chain_matrix(phi, n_chains),
        'supported': _chain_matrix(supported, n_chains),
        'log_posterior': _chain_matrix(log_posterior, n_chains),
    }
    for j in range(k):
        quantities[f"alpha_{j + 1}"] = _chain_matrix(alphas[:, j], n_chains)
    diagnostics = chain_diagnostics(quantities, ess_floor=mcmc.ess_floor)
    message = warn_low_ess(diagnostics, mcmc.ess_floor)

    acceptance = {name: float(np.mean([run.acceptance[name] for run in runs])) for name in runs[0].acceptance}
    logger.info("Plum sampling done: %d draws, acceptance %s", len(samples),
                ", ".join(f"{name}={rate:.2f}" for name, rate in acceptance.items()))
    return PosteriorDraws(alphas=alphas, w=w, phi=phi, supported=supported, log_posterior=log_posterior,
                          chain=chain, section_width=model.section_width, acceptance=acceptance,
                          diagnostics=diagnostics, warnings=(message,) if message else ())


def summarize_chronology(draws, depths=None):
    """
    Posterior age summary at the given depths.

    Args:
        draws (PosteriorDraws): At least 100 retained draws.
        depths (list of float, optional): Depths in cm, defaults to every section boundary below the surface.

    Returns:
        Chronology: method "Plum"; lower95/upper95 are the 2.5 and 97.5 percentiles, age_mean the
        posterior mean clipped into them and sd_proxy a quarter of the interval length.

    Raises:
        DomainError: If there are fewer than 100 draws or a depth lies outside the section grid.
    """
    if len(draws) < MIN_SUMMARY_DRAWS:
        raise DomainError(f"at least {MIN_SUMMARY_DRAWS} posterior draws are needed, got {len(draws)}")
    if depths is None:
        depths = draws.section_width * np.arange(1, draws.n_sections + 1)
    depths = np.asarray(sorted(float(d) for d in depths))
    ages = draws.ages(depths)
    lower, upper = np.percentile(ages, [2.5, 97.5], axis=0)
    means = np.clip(ages.mean(axis=0), lower, upper)

    estimates = tuple(
        AgeEstimate(depth=float(d), age_mean=float(m), lower95=float(lo), upper95=float(up),
                    sd_proxy=float((up - lo) / 4.0))
        for d, m, lo, up in zip(depths, means, lower, upper))
    notes = {'n_draws': len(draws), 'acceptance': dict(draws.acceptance), 'warnings': list(draws.warnings)}
    return Chronology(PLUM, estimates, notes=notes)
