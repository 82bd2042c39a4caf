import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from src.common.exceptions import ValidationError

# Grid on which a custom age-depth function is checked for monotonicity, cm
_CHECK_DEPTH = 30.0
_CHECK_POINTS = 3001


@dataclass(frozen=True)
class AgeFunction:
    """
    Age-depth function t(x) = c0 + c1 x + c2 x^2 + ... + amplitude * sin(x / period), yr.

    A plain value object rather than a closure so scenarios can be sent to worker processes.
    """
    coefficients: Tuple[float, ...] = (0.0,)
    sin_amplitude: float = 0.0
    sin_period: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', tuple(float(c) for c in self.coefficients))
        if self.sin_period <= 0:
            raise ValidationError("sin_period must be > 0")

    def __call__(self, depth):
        depth = np.asarray(depth, dtype=float)
        age = np.polynomial.polynomial.polyval(depth, self.coefficients)
        if self.sin_amplitude:
            age = age + self.sin_amplitude * np.sin(depth / self.sin_period)
        return float(age) if age.ndim == 0 else age

    def __str__(self):
        terms = [f"{c:g}*x^{k}" for k, c in enumerate(self.coefficients) if c]
        if self.sin_amplitude:
            terms.append(f"{self.sin_amplitude:g}*sin(x/{self.sin_period:g})")
        return " + ".join(terms) or "0"


@dataclass(frozen=True)
class Scenario:
    """
    A known sedimentation history used to simulate a core.

    Attributes:
        id (str): "S1", "S2", "S3" or "custom".
        age_fn (callable): Depth (cm) -> age (yr), with age_fn(0) = 0 and non-decreasing.
        phi (float): 210Pb supply, Bq/(m2 yr).
        supported (float): Supported 210Pb activity, Bq/kg.
        table_phi (float, optional): Supply as printed in the scenario table, when it differs.
        table_supported (float, optional): Supported activity as printed in the scenario table.
    """
    id: str
    age_fn: AgeFunction
    phi: float
    supported: float
    table_phi: float = None
    table_supported: float = None

    def __post_init__(self):
        problems = []
        if not (math.isfinite(self.phi) and self.phi > 0):
            problems.append("phi must be > 0")
        if not (math.isfinite(self.supported) and self.supported >= 0):
            problems.append("supported must be >= 0")
        if abs(self.age_fn(0.0)) > 1e-12:
            problems.append("age_fn(0) must be 0")
        grid = np.linspace(0.0, _CHECK_DEPTH, _CHECK_POINTS)
        if np.any(np.diff(self.age_fn(grid)) < -1e-12):
            problems.append(f"age_fn must be non-decreasing on [0, {_CHECK_DEPTH:g}] cm")
        if problems:
            raise ValidationError(f"Invalid scenario '{self.id}': {'; '.join(problems)}")

    @classmethod
    def custom(cls, coefficients, sin_amplitude=0.0, sin_period=1.0, *, phi, supported):
        """
        Builds a scenario from polynomial coefficients (constant term first) and an optional sinusoid.

        Raises:
            ValidationError: If the resulting function is not anchored at 0 or decreases somewhere on [0, 30] cm.
        """
        age_fn = AgeFunction(tuple(coefficients), sin_amplitude, sin_period)
        return cls("custom", age_fn, float(phi), float(supported))

    def table_values(self):
        """(phi, supported) as printed in the scenario table, falling back to the values in use."""
        phi = self.phi if self.table_phi is None else self.table_phi
        supported = self.supported if self.table_supported is None else self.table_supported
        return phi, supported

    def with_table_values(self):
        phi, supported = self.table_values()
        return replace(self, phi=phi, supported=supported)

    def with_parameters(self, phi=None, supported=None):
        return replace(self,
                       phi=self.phi if phi is None else float(phi),
                       supported=self.supported if supported is None else float(supported))

    @property
    def number(self):
        """1, 2 or 3 for the built-in scenarios, 0 for custom ones."""
        return int(self.id[1:]) if self.id[:1] == "S" and self.id[1:].isdigit() else 0

    def __str__(self):
        return f"{self.id}: t(x) = {self.age_fn}, phi = {self.phi:g}, supported = {self.supported:g}"
