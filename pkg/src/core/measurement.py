from functools import cached_property

import numpy as np

from src.common.exceptions import ValidationError

# Tolerance on slab overlap, cm
_OVERLAP_TOLERANCE = 1e-9


class Measurement:
    """
    One sediment slab measured for total 210Pb and 226Ra.

    The slab spans [depth - thickness, depth).

    Attributes:
        label (str): Sample label, e.g. "Sim02-14".
        depth (float): Bottom of the slab, cm.
        density (float): Dry bulk density, g/cm3.
        pb210 (float): Total 210Pb activity, Bq/kg. Any real value, noise can push it below the supported level.
        pb210_sd (float): Reported standard deviation of pb210, Bq/kg.
        thickness (float): Slab thickness, cm.
        ra226 (float): 226Ra activity, Bq/kg (proxy of supported 210Pb).
        ra226_sd (float): Reported standard deviation of ra226, Bq/kg.

    Raises:
        ValidationError: Listing every problem of the values.
    """
    FIELDS = ('label', 'depth', 'density', 'pb210', 'pb210_sd', 'thickness', 'ra226', 'ra226_sd')

    def __init__(self, label, depth, density, pb210, pb210_sd, thickness, ra226, ra226_sd):
        self.label = label
        self.depth = depth
        self.density = density
        self.pb210 = pb210
        self.pb210_sd = pb210_sd
        self.thickness = thickness
        self.ra226 = ra226
        self.ra226_sd = ra226_sd
        problems = self.problems()
        if problems:
            raise ValidationError(f"Invalid measurement '{label}': {'; '.join(problems)}")

    def _key(self):
        return tuple(getattr(self, name) for name in self.FIELDS)

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "Measurement(" + ", ".join(f"{name}={getattr(self, name)!r}" for name in self.FIELDS) + ")"

    def with_values(self, **values):
        """Copy of the measurement with some fields replaced."""
        return Measurement(**{**dict(zip(self.FIELDS, self._key())), **values})

    def problems(self):
        problems = []
        for name in self.FIELDS[1:]:
            if not np.isfinite(getattr(self, name)):
                problems.append(f"{name} is not finite")
        if self.depth <= 0:
            problems.append("depth must be > 0")
        if self.density <= 0:
            problems.append("density must be > 0")
        if self.thickness <= 0:
            problems.append("thickness must be > 0")
        if self.pb210_sd <= 0:
            problems.append("pb210_sd must be > 0")
        if self.ra226_sd <= 0:
            problems.append("ra226_sd must be > 0")
        return problems

    @property
    def top(self):
        return self.depth - self.thickness

    @property
    def midpoint(self):
        return self.depth - self.thickness / 2.0


class Dataset:
    """
    An ordered, validated series of slab measurements from one core.

    Depths are strictly increasing and slabs do not overlap. Ages computed from
    a Dataset are in years before sampling_year (the core surface is age zero).

    Args:
        measurements (iterable of Measurement): The slabs, shallowest first.
        core_id (str): Identifier of the core.
        sampling_year (int, optional): Calendar year of coring, informative only.

    Raises:
        ValidationError: If the dataset is empty, or with the 1-based rows whose depth does not
            increase or whose slab overlaps the previous one.
    """

    def __init__(self, measurements, core_id="core", sampling_year=None):
        self.measurements = tuple(measurements)
        self.core_id = core_id
        self.sampling_year = sampling_year
        if len(self.measurements) == 0:
            raise ValidationError("dataset is empty")

        not_increasing = []
        overlapping = []
        for i in range(1, len(self.measurements)):
            previous, current = self.measurements[i - 1], self.measurements[i]
            if current.depth <= previous.depth:
                not_increasing.append(i + 1)
            elif current.top < previous.depth - _OVERLAP_TOLERANCE:
                overlapping.append(i + 1)
        if not_increasing:
            raise ValidationError("depths not increasing", not_increasing)
        if overlapping:
            raise ValidationError("slabs overlap", overlapping)

    def __repr__(self):
        return f"Dataset(core_id={self.core_id!r}, {len(self.measurements)} measurements)"

    def __len__(self):
        return len(self.measurements)

    def __iter__(self):
        return iter(self.measurements)

    def __getitem__(self, index):
        return self.measurements[index]

    def _column(self, name):
        values = np.array([getattr(m, name) for m in self.measurements], dtype=float)
        values.flags.writeable = False
        return values

    @cached_property
    def depths(self):
        return self._column('depth')

    @cached_property
    def thicknesses(self):
        return self._column('thickness')

    @cached_property
    def tops(self):
        return self.depths - self.thicknesses

    @cached_property
    def densities(self):
        return self._column('density')

    @cached_property
    def pb210(self):
        return self._column('pb210')

    @cached_property
    def pb210_sd(self):
        return self._column('pb210_sd')

    @cached_property
    def ra226(self):
        return self._column('ra226')

    @cached_property
    def ra226_sd(self):
        return self._column('ra226_sd')

    @property
    def labels(self):
        return [m.label for m in self.measurements]

    @property
    def max_depth(self):
        return float(self.depths[-1])

    def subset(self, indices):
        """Returns a new Dataset holding the measurements at the given positions (kept in depth order)."""
        indices = sorted(int(i) for i in indices)
        return Dataset(tuple(self.measurements[i] for i in indices), core_id=self.core_id,
                       sampling_year=self.sampling_year)

    def replace_values(self, pb210=None, ra226=None):
        """Returns a copy of the dataset with new total 210Pb and/or 226Ra values, sds unchanged."""
        pb210 = self.pb210 if pb210 is None else np.asarray(pb210, dtype=float)
        ra226 = self.ra226 if ra226 is None else np.asarray(ra226, dtype=float)
        if len(pb210) != len(self) or len(ra226) != len(self):
            raise ValidationError("replacement columns must match the dataset length")
        measurements = tuple(m.with_values(pb210=float(p), ra226=float(r))
                             for m, p, r in zip(self.measurements, pb210, ra226))
        return Dataset(measurements, core_id=self.core_id, sampling_year=self.sampling_year)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.measurements == other.measurements and self.core_id == other.core_id
                and self.sampling_year == other.sampling_year)

    def __hash__(self):
        return hash((self.measurements, self.core_id, self.sampling_year))
