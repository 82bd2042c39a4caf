"""
Tidy tables behind the usual figures of a dating comparison.

Schemas, one observation per row:

- agedepth: depth, mean, lower95, upper95, truth (one row per dated depth of a chronology).
- accpre: percent, method, mean_offset, mean_interval, mean_normalized (one row per method and percentage).
- depth-normalized: depth, percent, method, normalized_offset (one row per record).
"""
import numpy as np
import pandas as pd

from src.common.exceptions import DomainError
from src.core.chronology import Chronology
from src.evaluation.metrics import aggregate_summary, records_frame
from src.simulation.simulator import true_age

PLOT_KINDS = ('agedepth', 'accpre', 'depth-normalized')
PLOT_COLUMNS = {
    'agedepth': ['depth', 'mean', 'lower95', 'upper95', 'truth'],
    'accpre': ['percent', 'method', 'mean_offset', 'mean_interval', 'mean_normalized'],
    'depth-normalized': ['depth', 'percent', 'method', 'normalized_offset'],
}


def _agedepth(chronology, scenario):
    dated = chronology.dated
    depths = np.array([e.depth for e in dated], dtype=float)
    truth = true_age(scenario, depths) if scenario is not None else np.full(len(depths), np.nan)
    return pd.DataFrame({
        'depth': depths,
        'mean': [e.age_mean for e in dated],
        'lower95': [e.lower95 for e in dated],
        'upper95': [e.upper95 for e in dated],
        'truth': truth,
    }, columns=PLOT_COLUMNS['agedepth'])


def emit_plot_data(source, kind, scenario=None):
    """
    Builds the plot-ready table of one kind.

    Args:
        source (Chronology, pandas.DataFrame or list of ComparisonRecord): A chronology for
            "agedepth", experiment records for the other kinds.
        kind (str): One of PLOT_KINDS.
        scenario (Scenario, optional): Fills the truth column of "agedepth", left empty otherwise.

    Returns:
        pandas.DataFrame: Columns as in PLOT_COLUMNS[kind].

    Raises:
        DomainError: If kind is unknown, the source does not match the kind, or it is empty.
    """
    if kind not in PLOT_KINDS:
        raise DomainError(f"unknown plot kind '{kind}', expected one of {', '.join(PLOT_KINDS)}")

    if kind == 'agedepth':
        if not isinstance(source, Chronology):
            raise DomainError("agedepth data is built from a chronology")
        if not source.dated:
            raise DomainError("the chronology has no dated depth")
        return _agedepth(source, scenario)

    if isinstance(source, Chronology):
        raise DomainError(f"{kind} data is built from experiment records")
    records = source if isinstance(source, pd.DataFrame) else records_frame(source)
    if records.empty:
        raise DomainError("no records to plot")

    if kind == 'accpre':
        by_percent = aggregate_summary(records).by_percent
        return by_percent.sort_values(['method', 'percent']).reset_index(drop=True)[PLOT_COLUMNS[kind]]
    return (records.sort_values(['method', 'percent', 'depth'], kind='mergesort')
            .reset_index(drop=True)[PLOT_COLUMNS[kind]])
