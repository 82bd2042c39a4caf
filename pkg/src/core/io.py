"""
CSV input/output for datasets, chronologies and tabular results.

Every file written here may start with one provenance comment line
("# pb-chrono <version> | <invocation>"); readers skip lines starting with '#'.
"""
import logging
import os
import shlex
from pathlib import Path

import numpy as np
import pandas as pd

from src import __version__
from src.common.exceptions import DatasetIOError, FormatError, ValidationError
from src.core.chronology import AgeEstimate, Chronology
from src.core.measurement import Dataset, Measurement

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ['label', 'depth', 'density', 'pb210', 'sd_pb210', 'thickness', 'ra226', 'sd_ra226']
CHRONOLOGY_COLUMNS = ['depth', 'age', 'sd', 'lower95', 'upper95', 'truncated', 'excluded_draws', 'method']

# CSV column -> Measurement field
_FIELD_OF_COLUMN = {
    'depth': 'depth',
    'density': 'density',
    'pb210': 'pb210',
    'sd_pb210': 'pb210_sd',
    'thickness': 'thickness',
    'ra226': 'ra226',
    'sd_ra226': 'ra226_sd',
}


def provenance_line(args=None, program="pb-chrono"):
    """Comment line recording the tool version and the full invocation."""
    invocation = " ".join(shlex.quote(str(a)) for a in (args or []))
    return f"# {program} {__version__} | {invocation}".rstrip()


def read_table(path, expected_columns):
    """Reads a CSV whose header must equal expected_columns; every cell is kept as text."""
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"cannot read '{path}': file does not exist")
    try:
        frame = pd.read_csv(path, comment='#', dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise FormatError("file has no header", row=0)
    except pd.errors.ParserError as e:
        raise FormatError(f"cannot parse CSV ({e})")
    except OSError as e:
        raise DatasetIOError(f"cannot read '{path}': {e}")

    header = [c.strip() for c in frame.columns]
    if header != list(expected_columns):
        raise FormatError(f"header must be '{','.join(expected_columns)}', found '{','.join(header)}'", row=0)
    frame.columns = header
    return frame


def numeric_column(frame, column):
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors='coerce')
    bad = values.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 1
        raise FormatError(f"value '{raw.iloc[row - 1]}' is not a number", row=row, column=column)
    return values.to_numpy(dtype=float)


def load_dataset(path, core_id=None, sampling_year=None):
    """
    Reads a dataset CSV with the header label,depth,density,pb210,sd_pb210,thickness,ra226,sd_ra226.

    Args:
        path (str or Path): The CSV file.
        core_id (str, optional): Identifier of the core, defaults to the file stem.
        sampling_year (int, optional): Calendar year of coring.

    Returns:
        Dataset: The validated dataset.

    Raises:
        DatasetIOError: If the file cannot be read.
        FormatError: If the header or a cell cannot be parsed (row and column are named).
        ValidationError: If measurements break their invariants (offending rows are listed).
    """
    frame = read_table(path, DATASET_COLUMNS)
    columns = {column: numeric_column(frame, column) for column in _FIELD_OF_COLUMN}
    labels = frame['label'].str.strip().tolist()

    measurements = []
    offending = []
    problems = []
    for i, label in enumerate(labels):
        values = {field: float(columns[column][i]) for column, field in _FIELD_OF_COLUMN.items()}
        try:
            measurements.append(Measurement(label=label, **values))
        except ValidationError as e:
            offending.append(i + 1)
            problems.append(str(e))
    if offending:
        raise ValidationError("; ".join(problems), offending)

    dataset = Dataset(tuple(measurements), core_id=core_id or Path(path).stem, sampling_year=sampling_year)
    logger.debug("Loaded %d measurements from %s", len(dataset), path)
    return dataset


def dataset_frame(dataset):
    return pd.DataFrame({
        'label': dataset.labels,
        'depth': dataset.depths,
        'density': dataset.densities,
        'pb210': dataset.pb210,
        'sd_pb210': dataset.pb210_sd,
        'thickness': dataset.thicknesses,
        'ra226': dataset.ra226,
        'sd_ra226': dataset.ra226_sd,
    }, columns=DATASET_COLUMNS)


def write_frame(frame, path, provenance=None):
    """
    Writes a DataFrame as CSV, preceded by the provenance comment line when given.

    Passing path=None or '-' returns the text instead of writing a file.
    """
    text = frame.to_csv(index=False, lineterminator='\n')
    if provenance:
        text = provenance.rstrip('\n') + '\n' + text
    if path is None or str(path) == '-':
        return text
    if not os.path.isdir(os.path.dirname(os.path.abspath(path))):
        raise DatasetIOError(f"cannot write '{path}': directory does not exist")
    try:
        with open(path, 'w', newline='') as f:
            f.write(text)
    except OSError as e:
        raise DatasetIOError(f"cannot write '{path}': {e}")
    return text


def write_dataset(dataset, path, provenance=None):
    """
    Writes a Dataset in the CSV layout read by load_dataset.

    Raises:
        ValidationError: If dataset is not a valid Dataset.
        DatasetIOError: If the path is not writable.
    """
    if not isinstance(dataset, Dataset):
        raise ValidationError("write_dataset expects a validated Dataset")
    return write_frame(dataset_frame(dataset), path, provenance)


def chronology_frame(chronology):
    return pd.DataFrame({
        'depth': [e.depth for e in chronology],
        'age': [e.age_mean for e in chronology],
        'sd': [e.sd_proxy for e in chronology],
        'lower95': [e.lower95 for e in chronology],
        'upper95': [e.upper95 for e in chronology],
        'truncated': [int(not e.dated) for e in chronology],
        'excluded_draws': [e.excluded_draws for e in chronology],
        'method': [chronology.method] * len(chronology),
    }, columns=CHRONOLOGY_COLUMNS)


def write_chronology(chronology, path, provenance=None):
    return write_frame(chronology_frame(chronology), path, provenance)


def read_chronology(path):
    """Reads a chronology CSV written by write_chronology."""
    frame = read_table(path, CHRONOLOGY_COLUMNS)
    if frame.empty:
        raise FormatError("chronology file has no rows", row=1)
    methods = frame['method'].str.strip().unique()
    if len(methods) != 1:
        raise FormatError("a chronology file holds exactly one method", column='method')

    depths = numeric_column(frame, 'depth')
    truncated = numeric_column(frame, 'truncated').astype(int)
    excluded = numeric_column(frame, 'excluded_draws').astype(int)
    values = {column: pd.to_numeric(frame[column].str.strip(), errors='coerce').to_numpy(dtype=float)
              for column in ('age', 'sd', 'lower95', 'upper95')}

    estimates = []
    for i, depth in enumerate(depths):
        if truncated[i]:
            estimates.append(AgeEstimate.undated(depth, excluded[i]))
            continue
        for column, column_values in values.items():
            if not np.isfinite(column_values[i]):
                raise FormatError("dated row must hold a finite value", row=i + 1, column=column)
        estimates.append(AgeEstimate(depth=float(depth), age_mean=float(values['age'][i]),
                                     lower95=float(values['lower95'][i]), upper95=float(values['upper95'][i]),
                                     sd_proxy=float(values['sd'][i]), excluded_draws=int(excluded[i])))
    return Chronology(method=methods[0], estimates=tuple(estimates))
