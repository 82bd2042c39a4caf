import math

import numpy as np
import pytest

from scenarios import supplementary_path
from src.common.exceptions import DatasetIOError, DomainError, FormatError, ValidationError
from src.core.chronology import CI_CRS, PLUM, AgeEstimate, Chronology
from src.core.constants import LAMBDA, PB210, DecayConstants
from src.core.io import (
    load_dataset,
    provenance_line,
    read_chronology,
    write_chronology,
    write_dataset,
)
from src.core.units import slab_areal_activity

from .conftest import make_dataset

HEADER = "label,depth,density,pb210,sd_pb210,thickness,ra226,sd_ra226\n"


def test_decay_constants():
    assert LAMBDA == 0.03118
    assert PB210.lam_sd == 0.00017
    assert math.log(2) / PB210.lam == pytest.approx(22.23, abs=0.01)
    with pytest.raises(ValueError):
        DecayConstants(lam=0.05)


def test_slab_areal_activity():
    assert slab_areal_activity(100, 0.1, 1) == pytest.approx(100.0)
    assert slab_areal_activity(63.50103, 0.10009, 1) == pytest.approx(63.558, abs=1e-3)
    np.testing.assert_allclose(slab_areal_activity([10.0, 20.0], [0.1, 0.2], [1.0, 0.5]), [10.0, 20.0])
    with pytest.raises(DomainError):
        slab_areal_activity(10.0, 0.1, 0.0)
    with pytest.raises(DomainError):
        slab_areal_activity(10.0, -0.1, 1.0)


def test_load_supplementary_sim02(sim02):
    assert len(sim02) == 30
    np.testing.assert_allclose(sim02.depths, np.arange(1, 31))
    row = sim02[13]
    assert row.label == "Sim02-14"
    assert row.pb210 == pytest.approx(21.3643)
    assert row.pb210_sd == 1.0


def test_load_rejects_unordered_depths(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "a,2,0.1,50,2,1,10,0.5\nb,1,0.1,40,2,1,10,0.5\n")
    with pytest.raises(ValidationError, match="depths not increasing") as info:
        load_dataset(path)
    assert info.value.offending_rows == [2]


def test_load_names_bad_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "a,1,0.1,50,2,1,10,0.5\nb,2,0.1,forty,2,1,10,0.5\n")
    with pytest.raises(FormatError) as info:
        load_dataset(path)
    assert info.value.row == 2
    assert info.value.column == 'pb210'


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("depth,pb210\n1,50\n")
    with pytest.raises(FormatError, match="header"):
        load_dataset(path)


def test_load_lists_invalid_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "a,1,0.1,50,0,1,10,0.5\nb,2,-0.1,40,2,1,10,0.5\nc,3,0.1,40,2,1,10,0.5\n")
    with pytest.raises(ValidationError) as info:
        load_dataset(path)
    assert info.value.offending_rows == [1, 2]


def test_load_missing_file(tmp_path):
    with pytest.raises(DatasetIOError):
        load_dataset(tmp_path / "missing.csv")


def test_write_and_reload(sim01, tmp_path):
    path = tmp_path / "sim01.csv"
    write_dataset(sim01, path, provenance_line(["simulate", "--seed", "1"]))
    assert path.read_text().startswith("# pb-chrono ")
    reloaded = load_dataset(path, core_id=sim01.core_id)
    for column in ('depths', 'densities', 'pb210', 'pb210_sd', 'thicknesses', 'ra226', 'ra226_sd'):
        np.testing.assert_allclose(getattr(reloaded, column), getattr(sim01, column), atol=1e-5)
    assert reloaded.labels == sim01.labels


def test_single_row_dataset_round_trip(tmp_path):
    dataset = make_dataset([50.0])
    path = tmp_path / "one.csv"
    write_dataset(dataset, path)
    assert len(load_dataset(path)) == 1


def test_empty_dataset_is_invalid(tmp_path):
    with pytest.raises(ValidationError):
        make_dataset([])
    with pytest.raises(ValidationError):
        write_dataset(None, tmp_path / "x.csv")


def test_write_to_missing_directory(sim01, tmp_path):
    with pytest.raises(DatasetIOError):
        write_dataset(sim01, tmp_path / "nowhere" / "x.csv")


def test_overlapping_slabs():
    with pytest.raises(ValidationError, match="overlap"):
        make_dataset([50.0, 40.0], depths=[1.0, 1.5])


def test_dataset_views(sim01):
    np.testing.assert_allclose(sim01.tops, sim01.depths - 1.0)
    subset = sim01.subset([5, 0, 29])
    assert subset.labels == ["Sim01-01", "Sim01-06", "Sim01-30"]
    replaced = sim01.replace_values(pb210=np.zeros(30))
    assert np.all(replaced.pb210 == 0)
    np.testing.assert_array_equal(replaced.ra226, sim01.ra226)
    with pytest.raises(ValidationError):
        sim01.replace_values(ra226=[1.0])


def test_age_estimate_ordering():
    with pytest.raises(ValidationError):
        AgeEstimate(depth=1.0, age_mean=10.0, lower95=11.0, upper95=12.0, sd_proxy=1.0)
    undated = AgeEstimate.undated(3.0, excluded_draws=7)
    assert not undated.dated and math.isnan(undated.age_mean)


def test_chronology_checks():
    e1 = AgeEstimate(1.0, 5.0, 4.0, 6.0, 0.5)
    e2 = AgeEstimate(2.0, 4.0, 3.0, 5.0, 0.5)
    with pytest.raises(ValidationError):
        Chronology(CI_CRS, (e1, e2))
    with pytest.raises(ValidationError):
        Chronology("CIC", (e1,))
    chronology = Chronology(PLUM, (e1, AgeEstimate.undated(2.0)))
    assert len(chronology.dated) == 1
    assert chronology.age_at(0.5) == pytest.approx(2.5)
    assert math.isnan(chronology.age_at(2.0))


def test_chronology_equality_ignores_notes():
    estimates = [AgeEstimate(1.0, 5.0, 4.0, 6.0, 0.5), AgeEstimate.undated(2.0)]
    first = Chronology(CI_CRS, estimates, notes={'a0': 1.0})
    second = Chronology(CI_CRS, tuple(estimates), notes={'a0': 2.0})
    assert first == second
    assert hash(first) == hash(second)
    assert AgeEstimate.undated(2.0) == AgeEstimate.undated(2.0)
    assert first != Chronology(PLUM, estimates)


def test_measurement_with_values(sim01):
    first = sim01[0]
    changed = first.with_values(pb210=1.0)
    assert changed.pb210 == 1.0 and changed.label == first.label and changed.ra226 == first.ra226
    assert changed != first
    assert first.with_values() == first
    with pytest.raises(ValidationError, match="pb210_sd must be > 0"):
        first.with_values(pb210_sd=0.0)


def test_chronology_round_trip(tmp_path):
    estimates = (AgeEstimate(1.0, 5.0, 4.0, 6.0, 0.5), AgeEstimate(2.0, 9.0, 7.0, 11.0, 1.0),
                 AgeEstimate.undated(3.0))
    path = tmp_path / "chronology.csv"
    write_chronology(Chronology(CI_CRS, estimates), path, provenance_line(["crs", "in.csv"]))
    reloaded = read_chronology(path)
    assert reloaded.method == CI_CRS
    assert [e.dated for e in reloaded] == [True, True, False]
    assert reloaded.estimates[1].upper95 == pytest.approx(11.0)


def test_supplementary_files_are_shipped():
    for key in (1, 2, 3):
        assert supplementary_path(key).is_file()
