import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import arviz as az
import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from src.common.exceptions import ConvergenceWarning
from src.common.settings import Settings
from src.common.validators import validate_boolean, validate_integer, validate_non_negative

logger = logging.getLogger(__name__)


class McmcSettings(Settings):
    """
    Settings of the adaptive Metropolis sampler.

    Keys:
        iterations: Total iterations per chain, burn-in included.
        burn_in: Iterations discarded at the start of each chain.
        thinning: Keep one iteration out of thinning after burn-in.
        seed: Master seed; chain k uses the k-th child of numpy.random.SeedSequence(seed).
        chains: Number of independent chains.
        jobs: Worker processes running the chains.
        ess_floor: Effective sample size below which a ConvergenceWarning is issued.
        adapt_interval: Iterations between two proposal adaptations.
        adapt_after_burn_in: Keep adapting, with vanishing steps, while draws are retained.
            When False the proposals are frozen at the end of burn-in.
        show_progress: Show a progress bar per chain.
    """
    default_settings = {
        'iterations': 100000,
        'burn_in': 20000,
        'thinning': 40,
        'seed': 0,
        'chains': 1,
        'jobs': 1,
        'ess_floor': 100,
        'adapt_interval': 100,
        'adapt_after_burn_in': True,
        'show_progress': False,
    }

    _validators = {
        'iterations': validate_integer('iterations', minimum=1),
        'burn_in': validate_integer('burn_in', minimum=0),
        'thinning': validate_integer('thinning', minimum=1),
        'seed': validate_integer('seed', minimum=0),
        'chains': validate_integer('chains', minimum=1),
        'jobs': validate_integer('jobs'),
        'ess_floor': validate_non_negative('ess_floor'),
        'adapt_interval': validate_integer('adapt_interval', minimum=1),
        'adapt_after_burn_in': validate_boolean('adapt_after_burn_in'),
        'show_progress': validate_boolean('show_progress'),
    }

    def _check_consistency(self):
        if self.iterations <= self.burn_in:
            raise ValueError(f"iterations ({self.iterations}) must be greater than burn_in ({self.burn_in}).")

    @property
    def retained(self):
        """Draws kept per chain."""
        return len(range(self.burn_in, self.iterations, self.thinning))


class RunningMoments:
    """
    Running mean and covariance of the visited states (Welford updates).

    Attributes:
        count (int): States seen since the last restart.
        mean (numpy.ndarray): Their mean.
    """

    def __init__(self, dim):
        self.dim = dim
        self.restart()

    def restart(self):
        self.count = 0
        self.mean = np.zeros(self.dim)
        self._scatter = np.zeros((self.dim, self.dim))

    def update(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._scatter += np.outer(delta, x - self.mean)

    @property
    def covariance(self):
        if self.count < 2:
            return None
        return self._scatter / (self.count - 1)


class BlockProposal:
    """
    Random-walk proposal for one block of coordinates.

    Blocks of one coordinate use a normal step of sd exp(log_scale). Larger blocks draw
    exp(log_scale) * L z, where L L^T is the running covariance of the block's coordinates
    scaled by 2.38^2 / dimension; until enough states are seen L is the identity. Once a
    covariance is in use, a small share of the steps falls back to the initial isotropic sd.

    Every adaptation moves log_scale by (acceptance rate - target) / sqrt(round), so the
    changes vanish as the chain grows.

    Attributes:
        name (str): Label used in diagnostics.
        indices (numpy.ndarray): Coordinates moved by this block.
        target_acceptance (float): Acceptance rate the scale is tuned towards.
    """
    target_acceptance_scalar = 0.44
    target_acceptance_block = 0.234
    # Relative jitter added to a learned covariance before factorisation
    covariance_jitter = 1e-8
    # States needed per coordinate before the running covariance is used
    min_states_per_dim = 10
    fixed_share = 0.05

    def __init__(self, name, indices, initial_sd):
        self.name = name
        self.indices = np.asarray(indices, dtype=int)
        self.dim = len(self.indices)
        self.target_acceptance = self.target_acceptance_scalar if self.dim == 1 else self.target_acceptance_block
        self.initial_sd = float(initial_sd)
        self.log_scale = math.log(initial_sd)
        self.chol = np.eye(self.dim)
        self.covariance_learned = False

        self.window_proposed = 0
        self.window_accepted = 0
        self.proposed = 0
        self.accepted = 0
        self.rounds = 0

    def propose(self, theta, rng):
        z = rng.standard_normal(self.dim)
        if self.covariance_learned and rng.random() < self.fixed_share:
            step = self.initial_sd * z
        else:
            step = math.exp(self.log_scale) * (self.chol @ z)
        candidate = theta.copy()
        candidate[self.indices] += step
        return candidate

    def record(self, accepted, counting):
        self.window_proposed += 1
        self.window_accepted += accepted
        if counting:
            self.proposed += 1
            self.accepted += accepted

    def adapt(self, moments):
        """Moves the scale towards the target acceptance and, for blocks, refreshes the covariance from moments."""
        self.rounds += 1
        rate = self.window_accepted / max(self.window_proposed, 1)
        self.log_scale += (rate - self.target_acceptance) / math.sqrt(self.rounds)
        self.window_proposed = 0
        self.window_accepted = 0

        if self.dim == 1 or moments.count < self.min_states_per_dim * self.dim:
            return
        covariance = moments.covariance[np.ix_(self.indices, self.indices)] * (2.38 ** 2 / self.dim)
        jitter = self.covariance_jitter * max(np.trace(covariance) / self.dim, 1e-12)
        try:
            chol = np.linalg.cholesky(covariance + jitter * np.eye(self.dim))
        except np.linalg.LinAlgError:
            return
        if not np.all(np.isfinite(chol)):
            return
        if not self.covariance_learned:
            # The learned covariance carries the step size from here on
            self.log_scale = 0.0
            self.covariance_learned = True
        self.chol = chol

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposed if self.proposed else float('nan')


@dataclass
class ChainRun:
    """Output of one chain: retained states of the sampled vector and their log target."""
    samples: np.ndarray
    log_target: np.ndarray
    acceptance: Dict[str, float] = field(default_factory=dict)
    chain: int = 0


class AdaptiveMetropolis:
    """
    Blocked adaptive random-walk Metropolis on an unconstrained vector.

    Each iteration updates the blocks in turn and feeds the new state to a running mean and
    covariance. Every adapt_interval iterations each block tunes its step size towards its
    target acceptance rate and multi-coordinate blocks take their covariance from the running
    estimate. The estimate restarts once, halfway through burn-in, to forget the start-up
    transient. Adaptation continues after burn-in with vanishing steps unless
    settings.adapt_after_burn_in is False.

    Attributes:
        log_target (callable): Maps a float vector to its log density (-inf outside the support).
        blocks (list of BlockProposal): Built from block_indices.
        settings (McmcSettings): Sampler settings.
    """
    block_class = BlockProposal

    def __init__(self, log_target, block_indices, *, block_names=None, initial_sds=None, settings=None):
        self.log_target = log_target
        self.block_indices = [np.asarray(b, dtype=int) for b in block_indices]
        self.block_names = list(block_names or [f"block{i}" for i in range(len(self.block_indices))])
        self.initial_sds = list(initial_sds or [0.1] * len(self.block_indices))
        self.settings = settings or McmcSettings()
        self.blocks: List[BlockProposal] = []

    def run(self, initial, *, seed=None, chain_index=0):
        """
        Runs one chain.

        Args:
            initial (array): Starting vector, must have a finite log target.
            seed (int or numpy.random.SeedSequence, optional): Defaults to settings.seed.
            chain_index (int): Position of the chain, used in progress and log messages.

        Returns:
            ChainRun: The retained draws and the post-burn-in acceptance rate of every block.
        """
        settings = self.settings
        rng = np.random.default_rng(settings.seed if seed is None else seed)
        self.blocks = [self.block_class(name, idx, sd)
                       for name, idx, sd in zip(self.block_names, self.block_indices, self.initial_sds)]

        theta = np.array(initial, dtype=float)
        current = self.log_target(theta)
        if not np.isfinite(current):
            raise ValueError("The initial state has a non-finite log target.")

        moments = RunningMoments(theta.size)
        restart_at = settings.burn_in // 2
        samples = np.empty((settings.retained, theta.size))
        log_values = np.empty(settings.retained)
        kept = 0

        iterations = tqdm(range(settings.iterations), desc=f"chain {chain_index}", disable=not settings.show_progress)
        for it in iterations:
            in_burn_in = it < settings.burn_in
            for block in self.blocks:
                candidate = block.propose(theta, rng)
                proposed = self.log_target(candidate)
                accepted = bool(np.log(rng.random()) < proposed - current)
                if accepted:
                    theta, current = candidate, proposed
                block.record(accepted, counting=not in_burn_in)

            if it == restart_at and restart_at > 0:
                moments.restart()
            moments.update(theta)
            if (it + 1) % settings.adapt_interval == 0 and (in_burn_in or settings.adapt_after_burn_in):
                for block in self.blocks:
                    block.adapt(moments)

            if not in_burn_in and (it - settings.burn_in) % settings.thinning == 0:
                samples[kept] = theta
                log_values[kept] = current
                kept += 1

        acceptance = {block.name: block.acceptance_rate for block in self.blocks}
        logger.debug("Chain %d acceptance: %s", chain_index,
                     ", ".join(f"{name}={rate:.2f}" for name, rate in acceptance.items()))
        return ChainRun(samples=samples[:kept], log_target=log_values[:kept], acceptance=acceptance,
                        chain=chain_index)

    def run_chains(self, initials, *, seed=None, jobs=None):
        """
        Runs one chain per starting vector, in parallel when jobs != 1.

        Chain k is seeded by the k-th child of SeedSequence(seed), so results do not depend on jobs.
        """
        seed = self.settings.seed if seed is None else seed
        children = np.random.SeedSequence(seed).spawn(len(initials))
        jobs = self.settings.jobs if jobs is None else jobs
        if len(initials) == 1 or jobs == 1:
            return [self.run(initial, seed=child, chain_index=k)
                    for k, (initial, child) in enumerate(zip(initials, children))]
        return Parallel(n_jobs=jobs)(
            delayed(self.run)(initial, seed=child, chain_index=k)
            for k, (initial, child) in enumerate(zip(initials, children))
        )


def chain_diagnostics(draws_by_name, ess_floor=0):
    """
    Effective sample size, Monte Carlo standard error and R-hat of named quantities.

    Args:
        draws_by_name (dict): Name -> array of shape (chains, draws).
        ess_floor (float): Quantities with a bulk ESS below this value are listed in low_ess.

    Returns:
        dict: 'ess', 'mcse' and, with more than one chain, 'rhat' (each name -> float), plus 'low_ess'.
    """
    diagnostics = {'ess': {}, 'mcse': {}, 'low_ess': []}
    n_chains = None
    for name, draws in draws_by_name.items():
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        n_chains = draws.shape[0]
        if np.ptp(draws) == 0:
            ess, mcse = float(draws.size), 0.0
        else:
            ess = float(az.ess(draws))
            mcse = float(az.mcse(draws))
        diagnostics['ess'][name] = ess
        diagnostics['mcse'][name] = mcse
        if n_chains > 1:
            diagnostics.setdefault('rhat', {})[name] = float(az.rhat(draws)) if np.ptp(draws) > 0 else 1.0
        if ess < ess_floor:
            diagnostics['low_ess'].append(name)
    return diagnostics


def warn_low_ess(diagnostics, ess_floor):
    """Issues one ConvergenceWarning naming every quantity below the ESS floor; returns the message."""
    if not diagnostics['low_ess']:
        return None
    details = ", ".join(f"{name} ({diagnostics['ess'][name]:.0f})" for name in diagnostics['low_ess'])
    message = f"effective sample size below {ess_floor:g} for: {details}"
    warnings.warn(message, ConvergenceWarning, stacklevel=3)
    logger.warning(message)
    return message
