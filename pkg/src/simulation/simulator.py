import logging
import math

import numpy as np

from src.common.exceptions import DomainError
from src.core.constants import AREAL_MASS_FACTOR, LAMBDA
from src.core.measurement import Dataset, Measurement
from src.simulation.noise import NoiseSettings, perturb_measurement

logger = logging.getLogger(__name__)

# Information percentages of the subsampling experiment
PERCENT_GRID = tuple(range(10, 100, 5)) + (100,)

# Tolerance when checking that max_depth is a multiple of the slab thickness, cm
_GRID_TOLERANCE = 1e-9


def true_age(scenario, depth):
    """Age (yr) of the given depth (cm) under the scenario's age-depth function."""
    if np.any(np.asarray(depth) < 0):
        raise DomainError("depth must be >= 0")
    return scenario.age_fn(depth)


def density_at(depth_mid):
    """
    Dry bulk density of the simulated cores, g/cm3.

    0.15 - 0.05 cos(pi * depth_mid / 30), evaluated at the slab midpoint.
    """
    depth_mid = np.asarray(depth_mid, dtype=float)
    if np.any(depth_mid < 0):
        raise DomainError("depth must be >= 0")
    density = 0.15 - 0.05 * np.cos(np.pi * depth_mid / 30.0)
    return float(density) if density.ndim == 0 else density


def expected_concentration(age_fn, phi, supported, top, bottom, lam=LAMBDA):
    """
    Expected total 210Pb concentration (Bq/kg) of the slab [top, bottom).

    The excess part is the 210Pb deposited during the slab's time span and still
    present at sampling, spread over the slab's dry mass per unit area. Works on
    arrays of slabs.
    """
    top = np.asarray(top, dtype=float)
    bottom = np.asarray(bottom, dtype=float)
    thickness = bottom - top
    if np.any(thickness <= 0):
        raise DomainError("slab thickness must be > 0")
    mass = AREAL_MASS_FACTOR * density_at((top + bottom) / 2.0) * thickness
    inventory = (phi / lam) * (np.exp(-lam * age_fn(top)) - np.exp(-lam * age_fn(bottom)))
    concentration = supported + inventory / mass
    return float(concentration) if np.ndim(concentration) == 0 else concentration


def true_total_concentration(scenario, top, bottom):
    """
    True total 210Pb of a slab (Bq/kg) for a scenario.

    Args:
        scenario (Scenario): Supplies age_fn, phi and supported.
        top (float or array): Upper boundary of the slab, cm.
        bottom (float or array): Lower boundary of the slab, cm.
    """
    return expected_concentration(scenario.age_fn, scenario.phi, scenario.supported, top, bottom)


def slab_grid(thickness=1.0, max_depth=30.0):
    """Slab bottoms thickness, 2 * thickness, ..., max_depth."""
    if thickness <= 0 or max_depth <= 0:
        raise DomainError("thickness and max_depth must be > 0")
    n_slabs = int(round(max_depth / thickness))
    if n_slabs < 1 or abs(n_slabs * thickness - max_depth) > _GRID_TOLERANCE:
        raise DomainError(f"max_depth {max_depth:g} is not a multiple of the slab thickness {thickness:g}")
    return thickness * np.arange(1, n_slabs + 1)


def simulate_core(scenario, cfg=None, thickness=1.0, max_depth=30.0, rng=None):
    """
    Simulates a core of contiguous slabs measured for total 210Pb and 226Ra.

    Args:
        scenario (Scenario): The sedimentation history.
        cfg (NoiseSettings, optional): The noise model, defaults to NoiseSettings().
        thickness (float): Slab thickness, cm.
        max_depth (float): Bottom of the deepest slab, cm. Must be a multiple of thickness.
        rng (numpy.random.Generator, optional): Defaults to a generator seeded with cfg.seed.

    Returns:
        Dataset: One measurement per slab, labelled "<scenario id>-NN".

    Raises:
        DomainError: If max_depth is not a multiple of thickness, or the supported level is 0
            (226Ra would carry a zero standard deviation).
    """
    cfg = cfg or NoiseSettings()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    ra_sd = scenario.supported * cfg.sd_factor
    if ra_sd <= 0:
        raise DomainError("simulated 226Ra needs a supported level > 0")

    bottoms = slab_grid(thickness, max_depth)
    tops = bottoms - thickness
    densities = density_at((tops + bottoms) / 2.0)

    truth = true_total_concentration(scenario, tops, bottoms)
    pb210, pb210_sd = perturb_measurement(truth, cfg, rng)
    if cfg.measurement_noise:
        ra226 = rng.normal(scenario.supported, ra_sd, size=len(bottoms))
    else:
        ra226 = np.full(len(bottoms), float(scenario.supported))

    width = max(2, int(math.log10(len(bottoms))) + 1)
    measurements = tuple(
        Measurement(label=f"{scenario.id}-{i + 1:0{width}d}", depth=float(bottoms[i]), density=float(densities[i]),
                    pb210=float(pb210[i]), pb210_sd=float(pb210_sd[i]), thickness=float(thickness),
                    ra226=float(ra226[i]), ra226_sd=float(ra_sd))
        for i in range(len(bottoms)))
    logger.debug("Simulated %d slabs for scenario %s", len(measurements), scenario.id)
    return Dataset(measurements, core_id=scenario.id)


def subsample_size(percent, n_slabs):
    """round(percent / 100 * n_slabs), halves rounded up, at least one slab."""
    return max(1, (int(percent) * n_slabs * 2 + 100) // 200)


def subsample(dataset, percent, rng):
    """
    Keeps a random share of the slabs, always including the deepest one.

    Args:
        dataset (Dataset): The full core.
        percent (int): Information percentage, one of 10, 15, ..., 95, 100.
        rng (numpy.random.Generator): Source of randomness.

    Returns:
        Dataset: The retained slabs in depth order; the dataset itself at 100%.

    Raises:
        DomainError: If percent is not on the grid.
    """
    if percent not in PERCENT_GRID:
        raise DomainError(f"percent must be one of {', '.join(str(p) for p in PERCENT_GRID)}, got {percent!r}")
    if percent == 100:
        return dataset
    n_keep = subsample_size(percent, len(dataset))
    deepest = len(dataset) - 1
    chosen = rng.choice(deepest, size=n_keep - 1, replace=False) if n_keep > 1 else []
    return dataset.subset(list(chosen) + [deepest])
