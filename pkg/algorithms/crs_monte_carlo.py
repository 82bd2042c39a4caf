"""
CRS dating with Monte Carlo uncertainty (R-CRS).

Every draw resamples the total 210Pb and 226Ra of each slab from Normal(value, sd^2)
and reruns the CRS pipeline, the supported level included. All draws are generated
up-front from one seed, so the result does not depend on how they are split among workers.
"""
import logging

import numpy as np
from joblib import Parallel, delayed, effective_n_jobs
from tqdm import tqdm

from algorithms.crs import CrsSettings, crs_point_ages
from src.common.exceptions import DomainError
from src.core.chronology import R_CRS, AgeEstimate, Chronology

logger = logging.getLogger(__name__)

# A depth excluded in more than this share of the draws is undated
MAX_EXCLUDED_SHARE = 0.5


def _chunk_ages(dataset, pb210_draws, ra226_draws, settings):
    ages = np.full(pb210_draws.shape, np.nan)
    for k in range(len(pb210_draws)):
        try:
            ages[k] = crs_point_ages(dataset, settings, pb210_draws[k], ra226_draws[k])
        except DomainError:
            pass
    return ages


def draw_ages(dataset, n_draws=10000, seed=0, settings=None, sd_scale=1.0, jobs=1, show_progress=False):
    """
    CRS ages of every slab bottom for each Monte Carlo draw.

    Returns:
        numpy.ndarray: n_draws x len(dataset), NaN where a depth is not dated in a draw.
    """
    settings = settings or CrsSettings()
    rng = np.random.default_rng(seed)
    n_slabs = len(dataset)
    pb210_draws = rng.normal(dataset.pb210, dataset.pb210_sd * sd_scale, size=(n_draws, n_slabs))
    ra226_draws = rng.normal(dataset.ra226, dataset.ra226_sd * sd_scale, size=(n_draws, n_slabs))

    n_chunks = min(n_draws, max(1, effective_n_jobs(jobs)))
    chunks = np.array_split(np.arange(n_draws), n_chunks)
    parts = Parallel(n_jobs=jobs)(
        delayed(_chunk_ages)(dataset, pb210_draws[chunk], ra226_draws[chunk], settings)
        for chunk in tqdm(chunks, desc="R-CRS", disable=not show_progress)
    )
    return np.vstack(parts)


def r_crs_chronology(dataset, n_draws=10000, seed=0, settings=None, sd_scale=1.0, jobs=1, show_progress=False):
    """
    R-CRS chronology: across-draw mean, sd and 2.5/97.5 percentiles of the CRS ages.

    Args:
        dataset (Dataset): The core.
        n_draws (int): Number of Monte Carlo draws, at least 2.
        seed (int): Seed of the draws.
        settings (CrsSettings, optional): Options of the underlying CRS pipeline.
        sd_scale (float): Multiplier of every reported sd; 0 disables the perturbation.
        jobs (int): Worker processes, as understood by joblib (-1 for all cores).
        show_progress (bool): Show a progress bar over the chunks of draws.

    Returns:
        Chronology: method "R-CRS". Draws in which a depth is not dated are left out for that
        depth and counted in excluded_draws; a depth left out of more than half of the draws is undated.

    Raises:
        DomainError: If n_draws < 2 or sd_scale < 0.
    """
    if int(n_draws) < 2:
        raise DomainError("draws must be >= 2")
    if sd_scale < 0:
        raise DomainError("sd_scale must be >= 0")
    n_draws = int(n_draws)

    ages = draw_ages(dataset, n_draws, seed, settings, sd_scale, jobs, show_progress)
    failed_draws = int(np.all(np.isnan(ages), axis=1).sum())
    if failed_draws:
        logger.warning("%d of %d R-CRS draws could not be dated at all", failed_draws, n_draws)

    estimates = []
    for i, depth in enumerate(dataset.depths):
        column = ages[:, i]
        kept = column[~np.isnan(column)]
        excluded = n_draws - len(kept)
        if excluded > MAX_EXCLUDED_SHARE * n_draws:
            estimates.append(AgeEstimate.undated(depth, excluded))
            continue
        lower, upper = np.percentile(kept, [2.5, 97.5])
        mean = float(np.clip(np.mean(kept), lower, upper))
        estimates.append(AgeEstimate(depth=float(depth), age_mean=mean, lower95=float(lower),
                                     upper95=float(upper), sd_proxy=float(np.std(kept)),
                                     excluded_draws=excluded))

    notes = {'n_draws': n_draws, 'seed': seed, 'failed_draws': failed_draws, 'sd_scale': sd_scale}
    logger.info("R-CRS dated %d of %d slabs from %d draws", sum(e.dated for e in estimates), len(dataset), n_draws)
    return Chronology(R_CRS, tuple(estimates), notes=notes)
