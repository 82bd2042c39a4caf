import math

import numpy as np

from src.common.exceptions import ValidationError

CI_CRS = "CI-CRS"
R_CRS = "R-CRS"
PLUM = "Plum"
METHODS = (CI_CRS, R_CRS, PLUM)

# Relative slack on ordering checks, yr
_ORDER_TOLERANCE = 1e-9


class AgeEstimate:
    """
    Age estimate at one depth, in years before sampling.

    Attributes:
        depth (float): cm.
        age_mean (float): Point estimate, yr. NaN when the depth is undated.
        lower95 (float): Lower end of the 95% interval, yr.
        upper95 (float): Upper end of the 95% interval, yr.
        sd_proxy (float): Standard deviation (CRS) or 95% interval length / 4 (Plum), yr.
        dated (bool): False when the engine could not date this depth.
        excluded_draws (int): Monte Carlo draws in which this depth was truncated (R-CRS only).
    """

    def __init__(self, depth, age_mean, lower95, upper95, sd_proxy, dated=True, excluded_draws=0):
        self.depth = depth
        self.age_mean = age_mean
        self.lower95 = lower95
        self.upper95 = upper95
        self.sd_proxy = sd_proxy
        self.dated = dated
        self.excluded_draws = excluded_draws
        if not dated:
            return
        if not (lower95 - _ORDER_TOLERANCE <= age_mean <= upper95 + _ORDER_TOLERANCE):
            raise ValidationError(f"age estimate at {depth} cm violates lower95 <= mean <= upper95")
        if not sd_proxy >= 0 or math.isnan(sd_proxy):
            raise ValidationError(f"age estimate at {depth} cm has a negative sd_proxy")

    def _key(self):
        return (self.depth, self.age_mean, self.lower95, self.upper95, self.sd_proxy, self.dated,
                self.excluded_draws)

    def __eq__(self, other):
        if not isinstance(other, AgeEstimate):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (f"AgeEstimate(depth={self.depth!r}, age_mean={self.age_mean!r}, lower95={self.lower95!r}, "
                f"upper95={self.upper95!r}, sd_proxy={self.sd_proxy!r}, dated={self.dated!r}, "
                f"excluded_draws={self.excluded_draws!r})")

    @property
    def interval_length(self):
        return self.upper95 - self.lower95

    @classmethod
    def undated(cls, depth, excluded_draws=0):
        # math.nan is one shared object, so undated estimates at the same depth compare equal
        return cls(depth=float(depth), age_mean=math.nan, lower95=math.nan, upper95=math.nan, sd_proxy=math.nan,
                   dated=False, excluded_draws=int(excluded_draws))


class Chronology:
    """
    Per-depth age estimates produced by one dating method.

    Equality ignores the notes.

    Args:
        method (str): One of "CI-CRS", "R-CRS", "Plum".
        estimates (iterable of AgeEstimate): Ordered by depth.
        truncation_depth (float, optional): CRS only, depth at which dating stopped.
        notes (dict, optional): Free-form diagnostics (e.g. surface extrapolation, acceptance rates).

    Raises:
        ValidationError: On an unknown method, unordered depths, or (CI-CRS and Plum) ages decreasing with depth.
    """

    def __init__(self, method, estimates, truncation_depth=None, notes=None):
        self.method = method
        self.estimates = tuple(estimates)
        self.truncation_depth = truncation_depth
        self.notes = {} if notes is None else notes
        if method not in METHODS:
            raise ValidationError(f"unknown dating method '{method}'")
        depths = [e.depth for e in self.estimates]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise ValidationError("chronology estimates must be ordered by depth")
        ages = [e.age_mean for e in self.estimates if e.dated]
        if method != R_CRS and any(b < a - _ORDER_TOLERANCE for a, b in zip(ages, ages[1:])):
            raise ValidationError(f"{method} ages must not decrease with depth")

    def __eq__(self, other):
        if not isinstance(other, Chronology):
            return NotImplemented
        return (self.method, self.estimates, self.truncation_depth) == \
            (other.method, other.estimates, other.truncation_depth)

    def __hash__(self):
        return hash((self.method, self.estimates, self.truncation_depth))

    def __repr__(self):
        return f"Chronology(method={self.method!r}, {len(self.estimates)} estimates)"

    def __len__(self):
        return len(self.estimates)

    def __iter__(self):
        return iter(self.estimates)

    @property
    def dated(self):
        return tuple(e for e in self.estimates if e.dated)

    @property
    def depths(self):
        return np.array([e.depth for e in self.estimates], dtype=float)

    @property
    def ages(self):
        return np.array([e.age_mean for e in self.estimates], dtype=float)

    def age_at(self, depth):
        """Linear interpolation of the dated point estimates; age 0 at the surface."""
        dated = self.dated
        xs = np.concatenate([[0.0], [e.depth for e in dated]])
        ys = np.concatenate([[0.0], [e.age_mean for e in dated]])
        if depth < 0 or depth > xs[-1]:
            return float('nan')
        return float(np.interp(depth, xs, ys))
