import numpy as np

from src.common.exceptions import DomainError
from src.core.constants import AREAL_MASS_FACTOR


def slab_mass_factor(density, thickness):
    """Dry mass per unit area of a slab, kg/m2, from g/cm3 and cm."""
    density = np.asarray(density, dtype=float)
    thickness = np.asarray(thickness, dtype=float)
    if np.any(density <= 0):
        raise DomainError("density must be > 0")
    if np.any(thickness <= 0):
        raise DomainError("thickness must be > 0")
    factor = AREAL_MASS_FACTOR * density * thickness
    return float(factor) if factor.ndim == 0 else factor


def slab_areal_activity(concentration, density, thickness):
    """
    Converts a per-mass activity of a slab into an areal activity.

    Args:
        concentration (float or array): Activity, Bq/kg.
        density (float or array): Dry bulk density, g/cm3.
        thickness (float or array): Slab thickness, cm.

    Returns:
        float or numpy.ndarray: Activity per unit area, Bq/m2.

    Raises:
        DomainError: If density or thickness is not positive.
    """
    areal = np.asarray(concentration, dtype=float) * slab_mass_factor(density, thickness)
    return float(areal) if np.ndim(areal) == 0 else areal
