"""
Constant Rate of Supply (CRS) dating with first-order error propagation.

The pipeline is estimate_supported -> excess_profile -> inventory_profile -> crs_age,
wrapped by ci_crs_chronology. Ages are reported at the bottom of every datable slab.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.common.exceptions import DomainError, NoDatableExcess
from src.common.settings import Settings
from src.common.validators import validate_boolean, validate_positive
from src.core.chronology import CI_CRS, AgeEstimate, Chronology
from src.core.constants import PB210
from src.core.measurement import Dataset
from src.core.units import slab_mass_factor

logger = logging.getLogger(__name__)

# Gaps narrower than this are treated as contiguous slabs, cm
_GAP_TOLERANCE = 1e-9


class CrsSettings(Settings):
    """
    Options of the CRS engines.

    Keys:
        include_supported_sd: Propagate the standard error of the supported level into every excess sd.
        use_covariance: Account for the covariance between A0 and A(x), and between slabs sharing the supported level.
        include_lambda_sd: Propagate the uncertainty of the decay constant.
        z95: Multiplier of the standard deviation giving the 95% interval half-width.
        drop_deepest: Treat the deepest slab as the equilibrium marker and leave it out of dating.
        interpolate_tail: Interpolate the excess linearly to zero between the last datable slab
            and the slab closing the profile.
    """
    default_settings = {
        'include_supported_sd': True,
        'use_covariance': False,
        'include_lambda_sd': False,
        'z95': 1.96,
        'drop_deepest': True,
        'interpolate_tail': True,
    }

    _validators = {
        'include_supported_sd': validate_boolean('include_supported_sd'),
        'use_covariance': validate_boolean('use_covariance'),
        'include_lambda_sd': validate_boolean('include_lambda_sd'),
        'z95': validate_positive('z95'),
        'drop_deepest': validate_boolean('drop_deepest'),
        'interpolate_tail': validate_boolean('interpolate_tail'),
    }


@dataclass(frozen=True)
class SupportedEstimate:
    """Supported 210Pb level (Bq/kg) estimated from the 226Ra column."""
    mean: float
    sd: float
    n: int

    @property
    def degenerate(self):
        """A single 226Ra value: the standard error is undefined and reported as 0."""
        return self.n == 1


def estimate_supported(dataset):
    """
    Mean of the 226Ra measurements and its standard error.

    Args:
        dataset (Dataset or array-like): A dataset, or the 226Ra values themselves.

    Returns:
        SupportedEstimate: With sd 0 and degenerate set when a single value is available.

    Raises:
        DomainError: If there is no 226Ra value.
    """
    values = dataset.ra226 if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=float)
    if values.size == 0:
        raise DomainError("cannot estimate the supported level of an empty dataset")
    n = int(values.size)
    sd = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SupportedEstimate(mean=float(np.mean(values)), sd=sd, n=n)


@dataclass(frozen=True, eq=False)
class ExcessProfile:
    """
    Excess (unsupported) 210Pb of every slab of a dataset.

    Attributes:
        supported (SupportedEstimate): The subtracted supported level.
        excess (numpy.ndarray): Total minus supported, Bq/kg, one value per slab.
        excess_sd (numpy.ndarray): Standard deviation of excess, Bq/kg.
        pb210_sd (numpy.ndarray): Reported sd of the total 210Pb, Bq/kg.
        datable (numpy.ndarray): Boolean mask of the slabs used for dating.
        truncation_depth (float, optional): Bottom of the first slab with excess <= 0, None if dating was not cut short.
        marker_index (int, optional): Index of the slab closing the profile (the truncating slab, or the
            equilibrium slab when the deepest one is dropped).
    """
    supported: SupportedEstimate
    excess: np.ndarray
    excess_sd: np.ndarray
    pb210_sd: np.ndarray
    datable: np.ndarray
    truncation_depth: Optional[float] = None
    marker_index: Optional[int] = None

    @property
    def datable_indices(self):
        return np.flatnonzero(self.datable)

    @property
    def supported_sd(self):
        return self.supported.sd


def excess_profile(dataset, settings=None, pb210=None, ra226=None):
    """
    Subtracts the mean supported level from every slab and finds where dating stops.

    Dating stops at the first slab, above the equilibrium marker, whose excess is <= 0;
    that slab and every deeper one are excluded.

    Args:
        dataset (Dataset): The core.
        settings (CrsSettings, optional): Engine options.
        pb210 (array, optional): Total 210Pb values replacing the dataset's own (Monte Carlo draws).
        ra226 (array, optional): 226Ra values replacing the dataset's own.

    Raises:
        NoDatableExcess: If no slab is left to date.
    """
    settings = settings or CrsSettings()
    pb210 = dataset.pb210 if pb210 is None else np.asarray(pb210, dtype=float)
    ra226 = dataset.ra226 if ra226 is None else np.asarray(ra226, dtype=float)

    supported = estimate_supported(ra226)
    supported_sd = supported.sd if settings.include_supported_sd else 0.0
    excess = pb210 - supported.mean
    excess_sd = np.sqrt(dataset.pb210_sd ** 2 + supported_sd ** 2)

    n_candidates = len(dataset) - 1 if settings.drop_deepest else len(dataset)
    marker_index = len(dataset) - 1 if settings.drop_deepest else None
    non_positive = np.flatnonzero(excess[:n_candidates] <= 0)
    truncation_depth = None
    n_datable = n_candidates
    if non_positive.size:
        n_datable = int(non_positive[0])
        truncation_depth = float(dataset.depths[n_datable])
        marker_index = n_datable
    if n_datable == 0:
        raise NoDatableExcess()

    datable = np.zeros(len(dataset), dtype=bool)
    datable[:n_datable] = True
    if truncation_depth is not None:
        logger.debug("Excess 210Pb <= 0 at %g cm, dating stops above it", truncation_depth)
    return ExcessProfile(supported=supported, excess=excess, excess_sd=excess_sd, pb210_sd=dataset.pb210_sd,
                         datable=datable, truncation_depth=truncation_depth, marker_index=marker_index)


@dataclass(frozen=True, eq=False)
class InventoryProfile:
    """
    Excess 210Pb inventory below each datable slab bottom.

    Every inventory is a fixed linear combination of the measured slab inventories,
    held in weights: row 0 gives A0, row i + 1 gives A(boundaries[i]).

    Attributes:
        boundaries (numpy.ndarray): Bottoms of the datable slabs, cm.
        slab_inventory (numpy.ndarray): Areal excess activity of each datable slab, Bq/m2.
        weights (numpy.ndarray): (1 + m) x m matrix mapping slab inventories to A0 and A(x).
        covariance (numpy.ndarray): Covariance of the slab inventories, (Bq/m2)^2.
        surface_extrapolated (bool): The shallowest datable slab does not reach the surface and its
            activity density was extended flat to 0 cm.
        tail_depth (float, optional): Depth at which the interpolated tail reaches zero excess.
    """
    boundaries: np.ndarray
    slab_inventory: np.ndarray
    weights: np.ndarray
    covariance: np.ndarray
    surface_extrapolated: bool = False
    tail_depth: Optional[float] = None
    _values: np.ndarray = field(init=False, repr=False, compare=False)
    _value_cov: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, '_values', self.weights @ self.slab_inventory)
        object.__setattr__(self, '_value_cov', self.weights @ self.covariance @ self.weights.T)

    @property
    def a0(self):
        return float(self._values[0])

    @property
    def a0_sd(self):
        return math.sqrt(max(self._value_cov[0, 0], 0.0))

    @property
    def a_below(self):
        return self._values[1:]

    @property
    def a_below_sd(self):
        return np.sqrt(np.clip(np.diag(self._value_cov)[1:], 0.0, None))

    @property
    def a0_covariance(self):
        """Covariance between A0 and each A(x)."""
        return self._value_cov[0, 1:]


def _inventory_weights(tops, bottoms, marker_top=None):
    """
    Weights turning slab inventories into the inventory of the whole profile and below each bottom.

    Unmeasured gaps are filled by linear interpolation of the activity density (Bq/m2 per cm)
    between neighbouring slab midpoints. The surface gap takes the density of the shallowest slab.
    When marker_top is given the density decreases linearly to zero there, from the deepest slab's midpoint.
    """
    m = len(tops)
    thickness = bottoms - tops
    mids = (tops + bottoms) / 2.0
    # Inventory of each depth interval, as weights on the slab inventories, shallowest first
    segments = []

    if tops[0] > _GAP_TOLERANCE:
        w = np.zeros(m)
        w[0] = tops[0] / thickness[0]
        segments.append((tops[0], w))

    for i in range(m):
        w = np.zeros(m)
        w[i] = 1.0
        segments.append((bottoms[i], w))
        if i + 1 < m and tops[i + 1] - bottoms[i] > _GAP_TOLERANCE:
            length = tops[i + 1] - bottoms[i]
            frac = ((bottoms[i] + tops[i + 1]) / 2.0 - mids[i]) / (mids[i + 1] - mids[i])
            w = np.zeros(m)
            w[i] = length * (1.0 - frac) / thickness[i]
            w[i + 1] = length * frac / thickness[i + 1]
            segments.append((tops[i + 1], w))

    if marker_top is not None and marker_top - bottoms[-1] > _GAP_TOLERANCE:
        w = np.zeros(m)
        w[-1] = (marker_top - bottoms[-1]) ** 2 / (2.0 * (marker_top - mids[-1])) / thickness[-1]
        segments.append((marker_top, w))

    ends = np.array([end for end, _ in segments])
    parts = np.array([w for _, w in segments])
    total = parts.sum(axis=0)
    rows = [total]
    for bottom in bottoms:
        rows.append(parts[ends > bottom + _GAP_TOLERANCE].sum(axis=0))
    return np.array(rows)


def inventory_profile(excess, dataset, settings=None):
    """
    Integrates the excess activity into A0 and the inventory below every datable slab.

    Args:
        excess (ExcessProfile): The excess activity of the dataset.
        dataset (Dataset): The dataset excess was computed from.
        settings (CrsSettings, optional): Engine options.

    Returns:
        InventoryProfile: With surface_extrapolated set when the first datable slab starts below 0 cm.

    Raises:
        DomainError: If fewer than two slabs are datable.
    """
    settings = settings or CrsSettings()
    idx = excess.datable_indices
    if len(idx) < 2:
        raise DomainError(f"CRS dating needs at least 2 datable slabs, found {len(idx)}")

    tops = dataset.tops[idx]
    bottoms = dataset.depths[idx]
    mass = slab_mass_factor(dataset.densities[idx], dataset.thicknesses[idx])
    slab_inventory = excess.excess[idx] * mass

    if settings.use_covariance:
        supported_sd = excess.supported_sd if settings.include_supported_sd else 0.0
        covariance = np.diag((excess.pb210_sd[idx] * mass) ** 2) + supported_sd ** 2 * np.outer(mass, mass)
    else:
        covariance = np.diag((excess.excess_sd[idx] * mass) ** 2)

    marker_top = None
    if settings.interpolate_tail and excess.marker_index is not None:
        marker_top = float(dataset.tops[excess.marker_index])

    weights = _inventory_weights(tops, bottoms, marker_top)
    surface_extrapolated = bool(tops[0] > _GAP_TOLERANCE)
    tail_depth = marker_top if marker_top is not None and marker_top - bottoms[-1] > _GAP_TOLERANCE else None
    if surface_extrapolated:
        logger.debug("No slab reaches the surface, activity density extended flat over [0, %g) cm", tops[0])
    return InventoryProfile(boundaries=bottoms, slab_inventory=slab_inventory, weights=weights,
                            covariance=covariance, surface_extrapolated=surface_extrapolated, tail_depth=tail_depth)


def crs_age(a0, a_below, a0_sd=0.0, a_below_sd=0.0, covariance=0.0, lambda_sd=0.0, lam=PB210.lam):
    """
    CRS age t = ln(A0 / A(x)) / lambda and its first-order standard deviation.

    Args:
        a0 (float): Total excess inventory, Bq/m2.
        a_below (float or array): Inventory below the depth(s) being dated, Bq/m2.
        a0_sd (float): Standard deviation of a0.
        a_below_sd (float or array): Standard deviation of a_below.
        covariance (float or array): Covariance between a0 and a_below.
        lambda_sd (float): Standard deviation of the decay constant, 0 to leave it out.
        lam (float): Decay constant, 1/yr.

    Returns:
        tuple: (age, sd) in yr, NaN where a_below <= 0. Floats for scalar input, arrays otherwise.

    Raises:
        DomainError: If a0 is not positive.
    """
    if not a0 > 0:
        raise DomainError("total inventory A0 must be > 0")
    a_below = np.asarray(a_below, dtype=float)
    positive = a_below > 0
    safe = np.where(positive, a_below, 1.0)

    age = np.log(a0 / safe) / lam
    relative_var = (a0_sd / a0) ** 2 + (np.asarray(a_below_sd) / safe) ** 2 - 2.0 * np.asarray(covariance) / (a0 * safe)
    var = np.clip(relative_var, 0.0, None) / lam ** 2 + (age * lambda_sd / lam) ** 2
    age = np.where(positive, age, np.nan)
    sd = np.where(positive, np.sqrt(var), np.nan)
    if age.ndim == 0:
        return float(age), float(sd)
    return age, sd


def crs_point_ages(dataset, settings=None, pb210=None, ra226=None):
    """
    CRS ages at every slab bottom of the dataset, NaN where the slab is not dated.

    Used by the Monte Carlo engine; raises the same errors as ci_crs_chronology.
    """
    settings = settings or CrsSettings()
    excess = excess_profile(dataset, settings, pb210, ra226)
    inventory = inventory_profile(excess, dataset, settings)
    ages = np.full(len(dataset), np.nan)
    ages[excess.datable_indices] = crs_age(inventory.a0, inventory.a_below)[0]
    return ages


def ci_crs_chronology(dataset, settings=None):
    """
    Classical CRS chronology with first-order error propagation.

    Every slab bottom of the dataset gets an estimate; slabs below the truncation depth,
    the equilibrium slab and bottoms with no inventory left below them are marked undated.

    Args:
        dataset (Dataset): The core.
        settings (CrsSettings, optional): Engine options.

    Returns:
        Chronology: method "CI-CRS", ages in yr before sampling.

    Raises:
        NoDatableExcess: If every excess activity is <= 0.
        DomainError: If fewer than two slabs are datable.
    """
    settings = settings or CrsSettings()
    excess = excess_profile(dataset, settings)
    inventory = inventory_profile(excess, dataset, settings)

    covariance = inventory.a0_covariance if settings.use_covariance else 0.0
    lambda_sd = PB210.lam_sd if settings.include_lambda_sd else 0.0
    ages, sds = crs_age(inventory.a0, inventory.a_below, inventory.a0_sd, inventory.a_below_sd,
                        covariance=covariance, lambda_sd=lambda_sd)

    dated_age = dict(zip(excess.datable_indices, zip(ages, sds)))
    estimates = []
    for i, depth in enumerate(dataset.depths):
        age, sd = dated_age.get(i, (np.nan, np.nan))
        if np.isnan(age):
            estimates.append(AgeEstimate.undated(depth))
            continue
        half_width = settings.z95 * sd
        estimates.append(AgeEstimate(depth=float(depth), age_mean=float(age), lower95=float(age - half_width),
                                     upper95=float(age + half_width), sd_proxy=float(sd)))

    notes = {
        'supported_mean': excess.supported.mean,
        'supported_sd': excess.supported.sd,
        'supported_degenerate': excess.supported.degenerate,
        'a0': inventory.a0,
        'a0_sd': inventory.a0_sd,
        'surface_extrapolated': inventory.surface_extrapolated,
    }
    chronology = Chronology(CI_CRS, tuple(estimates), truncation_depth=excess.truncation_depth, notes=notes)
    logger.info("CI-CRS dated %d of %d slabs (A0 = %.1f Bq/m2)", len(chronology.dated), len(dataset), inventory.a0)
    return chronology
