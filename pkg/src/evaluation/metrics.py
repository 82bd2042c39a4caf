import logging
import math

import numpy as np
import pandas as pd

from src.common.exceptions import DomainError
from src.core.io import numeric_column, read_table
from src.simulation.simulator import true_age

logger = logging.getLogger(__name__)

COVERAGE_THRESHOLDS = (1.0, 2.0)
# A run is one model applied to one subsampled dataset
RUN_KEYS = ['scenario', 'percent', 'replicate', 'method']


class ComparisonRecord:
    """
    Accuracy and precision of one age estimate against the known age.

    Attributes:
        scenario (str): Scenario id.
        percent (int): Information percentage of the dataset the model saw.
        replicate (int): Replicate number at that percentage.
        method (str): "CI-CRS", "R-CRS" or "Plum".
        depth (float): cm.
        true_age (float): yr.
        age (float): Estimated age, yr.
        offset (float): |age - true_age|, yr.
        signed_offset (float): age - true_age, yr.
        interval_length (float): Length of the 95% interval, yr.
        sd_proxy (float): Standard deviation proxy of the estimate, yr.
        normalized_offset (float): offset / sd_proxy; inf when sd_proxy is 0 and offset is not.
    """
    FIELDS = ('scenario', 'percent', 'replicate', 'method', 'depth', 'true_age', 'age', 'offset', 'signed_offset',
              'interval_length', 'sd_proxy', 'normalized_offset')

    def __init__(self, scenario, percent, replicate, method, depth, true_age, age, offset, signed_offset,
                 interval_length, sd_proxy, normalized_offset):
        self.scenario = scenario
        self.percent = percent
        self.replicate = replicate
        self.method = method
        self.depth = depth
        self.true_age = true_age
        self.age = age
        self.offset = offset
        self.signed_offset = signed_offset
        self.interval_length = interval_length
        self.sd_proxy = sd_proxy
        self.normalized_offset = normalized_offset

    def to_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS}

    def __eq__(self, other):
        if not isinstance(other, ComparisonRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return (f"ComparisonRecord({self.scenario}, {self.percent}%, #{self.replicate}, {self.method}, "
                f"depth={self.depth:g}, offset={self.offset:g}, normalized={self.normalized_offset:g})")


def _normalized(offset, sd_proxy):
    if sd_proxy > 0:
        return offset / sd_proxy
    return 0.0 if offset == 0 else math.inf


def score_chronology(chronology, scenario, *, percent=100, replicate=0, max_depth=30.0):
    """
    Compares every dated estimate of a chronology with the scenario's true ages.

    Args:
        chronology (Chronology): The model output; undated estimates are skipped.
        scenario (Scenario): Supplies the true age-depth function.
        percent (int): Information percentage, copied into the records.
        replicate (int): Replicate number, copied into the records.
        max_depth (float): Deepest depth the scenario is defined for, cm.

    Returns:
        list of ComparisonRecord: One per dated depth.

    Raises:
        DomainError: If an estimate lies outside [0, max_depth].
    """
    records = []
    for estimate in chronology.dated:
        if not 0 <= estimate.depth <= max_depth:
            raise DomainError(f"depth {estimate.depth:g} cm lies outside [0, {max_depth:g}] cm")
        truth = float(true_age(scenario, estimate.depth))
        signed = estimate.age_mean - truth
        records.append(ComparisonRecord(
            scenario=scenario.id, percent=int(percent), replicate=int(replicate), method=chronology.method,
            depth=estimate.depth, true_age=truth, age=estimate.age_mean, offset=abs(signed), signed_offset=signed,
            interval_length=estimate.interval_length, sd_proxy=estimate.sd_proxy,
            normalized_offset=_normalized(abs(signed), estimate.sd_proxy)))
    return records


def records_frame(records):
    """Long-format DataFrame of records, one row per record, columns as in ComparisonRecord."""
    return pd.DataFrame([r.to_dict() for r in records], columns=list(ComparisonRecord.FIELDS))


class Summary:
    """
    Aggregated experiment metrics.

    Args:
        by_percent (pandas.DataFrame): Per (method, percent): record and run counts, mean offset,
            mean interval length, mean normalized offset (finite values only), number of infinite
            normalized offsets excluded, and the coverage fractions.
        overall (pandas.DataFrame): Same columns pooled over percentages, per method.
        by_scenario (pandas.DataFrame): Same columns per (scenario, method).
    """

    def __init__(self, by_percent, overall, by_scenario):
        self.by_percent = by_percent
        self.overall = overall
        self.by_scenario = by_scenario


def _run_means(frame):
    finite = frame.assign(finite_normalized=frame['normalized_offset'].where(np.isfinite(frame['normalized_offset'])))
    runs = finite.groupby(RUN_KEYS, sort=True).agg(run_normalized=('finite_normalized', 'mean')).reset_index()
    # A run with no finite normalized offset never counts as covered
    runs['run_normalized'] = runs['run_normalized'].fillna(math.inf)
    return finite, runs


def _aggregate(finite, runs, keys):
    metrics = finite.groupby(keys, sort=True).agg(
        n_records=('offset', 'size'),
        mean_offset=('offset', 'mean'),
        mean_interval=('interval_length', 'mean'),
        mean_normalized=('finite_normalized', 'mean'),
        n_infinite=('finite_normalized', lambda s: int(s.isna().sum())),
    )
    coverage = runs.groupby(keys, sort=True).agg(n_runs=('run_normalized', 'size'))
    for threshold in COVERAGE_THRESHOLDS:
        column = f"coverage_{threshold:g}"
        coverage[column] = runs.assign(covered=runs['run_normalized'] <= threshold).groupby(keys, sort=True)['covered'].mean()
    return metrics.join(coverage).reset_index()


def aggregate_summary(records):
    """
    Means of offset, interval length and normalized offset, and coverage fractions.

    The coverage at threshold k is the fraction of runs whose mean normalized offset is <= k,
    for k = 1 and 2. Infinite normalized offsets are left out of every mean and counted in n_infinite.

    Args:
        records (iterable of ComparisonRecord or pandas.DataFrame): Non-empty.

    Returns:
        Summary: Grouped per (method, percent), per method and per (scenario, method).

    Raises:
        DomainError: If there are no records.
    """
    frame = records if isinstance(records, pd.DataFrame) else records_frame(records)
    if frame.empty:
        raise DomainError("cannot summarise an empty record set")
    frame = frame.sort_values(RUN_KEYS + ['depth'], kind='mergesort').reset_index(drop=True)
    finite, runs = _run_means(frame)
    n_infinite = int((~np.isfinite(frame['normalized_offset'])).sum())
    if n_infinite:
        logger.info("%d infinite normalized offsets left out of the means", n_infinite)
    return Summary(
        by_percent=_aggregate(finite, runs, ['method', 'percent']),
        overall=_aggregate(finite, runs, ['method']),
        by_scenario=_aggregate(finite, runs, ['scenario', 'method']),
    )


def load_records(path):
    """Reads a records CSV written from records_frame."""
    columns = list(ComparisonRecord.FIELDS)
    frame = read_table(path, columns)
    if frame.empty:
        raise DomainError(f"'{path}' holds no records")
    for column in ('scenario', 'method'):
        frame[column] = frame[column].str.strip()
    for column in columns:
        if column not in ('scenario', 'method'):
            frame[column] = numeric_column(frame, column)
    frame['percent'] = frame['percent'].astype(int)
    frame['replicate'] = frame['replicate'].astype(int)
    return frame


SUMMARY_COLUMNS = ['level', 'scenario', 'method', 'percent', 'n_runs', 'n_records', 'mean_offset', 'mean_interval',
                   'mean_normalized', 'n_infinite', 'coverage_1', 'coverage_2', 'attempted', 'completed']


def summary_frame(summary, counts=None):
    """
    One table holding the three levels of a Summary, tagged "percent", "overall" and "scenario".

    counts (the DataFrame of ExperimentResult.counts) adds attempted and completed runs to the overall rows.
    """
    overall = summary.overall
    if counts is not None:
        overall = overall.merge(counts[['method', 'attempted', 'completed']], on='method', how='left')
    parts = [summary.by_percent.assign(level='percent'), overall.assign(level='overall'),
             summary.by_scenario.assign(level='scenario')]
    return pd.concat(parts, ignore_index=True).reindex(columns=SUMMARY_COLUMNS)
