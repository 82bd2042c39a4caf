import math
import random
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from algorithms.crs import ci_crs_chronology
from algorithms.mcmc import McmcSettings
from algorithms.plum import sample_posterior, summarize_chronology
from scenarios import S1
from src.common.exceptions import DomainError, ValidationError
from src.core.chronology import CI_CRS, PLUM, R_CRS, AgeEstimate, Chronology
from src.core.io import write_frame
from src.evaluation import (
    ComparisonRecord,
    ExperimentPlan,
    aggregate_summary,
    load_records,
    records_frame,
    run_experiment,
    score_chronology,
    summary_frame,
)
from src.evaluation.metrics import SUMMARY_COLUMNS
from src.simulation.scenario import Scenario

FOUR_YEARS_PER_CM = Scenario.custom((0.0, 4.0), phi=50.0, supported=10.0)


def record(normalized, *, method=CI_CRS, percent=50, replicate=0, depth=1.0, scenario="S1", offset=1.0,
           interval=4.0):
    return ComparisonRecord(scenario=scenario, percent=percent, replicate=replicate, method=method, depth=depth,
                            true_age=10.0, age=10.0 + offset, offset=offset, signed_offset=offset,
                            interval_length=interval, sd_proxy=offset / normalized if normalized else 0.0,
                            normalized_offset=normalized)


def test_score_chronology():
    chronology = Chronology(CI_CRS, (
        AgeEstimate(5.0, 22.0, 20.04, 23.96, 1.0),
        AgeEstimate(6.0, 24.0, 22.04, 25.96, 1.0),
        AgeEstimate(7.0, 30.0, 20.2, 39.8, 5.0),
        AgeEstimate.undated(8.0),
    ))
    records = score_chronology(chronology, FOUR_YEARS_PER_CM, percent=40, replicate=3)
    assert len(records) == 3
    first = records[0]
    assert (first.scenario, first.method, first.percent, first.replicate) == ("custom", CI_CRS, 40, 3)
    assert first.true_age == pytest.approx(20.0)
    assert first.offset == pytest.approx(2.0)
    assert first.normalized_offset == pytest.approx(2.0)
    assert records[1].normalized_offset == pytest.approx(0.0)
    assert records[2].signed_offset == pytest.approx(2.0)
    assert records[2].normalized_offset == pytest.approx(0.4)
    assert records[2].interval_length == pytest.approx(19.6)


@pytest.mark.parametrize("shift", [-7.5, 40.0])
def test_score_is_translation_equivariant(shift):
    estimates = (AgeEstimate(5.0, 22.0, 20.04, 23.96, 1.0), AgeEstimate(7.0, 30.0, 20.2, 39.8, 5.0))
    shifted = tuple(AgeEstimate(e.depth, e.age_mean + shift, e.lower95 + shift, e.upper95 + shift, e.sd_proxy)
                    for e in estimates)
    moved_truth = SimpleNamespace(id="custom", age_fn=lambda depth: FOUR_YEARS_PER_CM.age_fn(depth) + shift)

    base = score_chronology(Chronology(CI_CRS, estimates), FOUR_YEARS_PER_CM)
    moved = score_chronology(Chronology(CI_CRS, shifted), moved_truth)
    for a, b in zip(base, moved):
        assert b.true_age == pytest.approx(a.true_age + shift)
        for name in ('offset', 'signed_offset', 'interval_length', 'sd_proxy', 'normalized_offset'):
            assert getattr(b, name) == pytest.approx(getattr(a, name), abs=1e-9)


def test_score_zero_width_estimate():
    exact = Chronology(PLUM, (AgeEstimate(5.0, 20.0, 20.0, 20.0, 0.0),))
    assert score_chronology(exact, FOUR_YEARS_PER_CM)[0].normalized_offset == 0.0
    off = Chronology(PLUM, (AgeEstimate(5.0, 21.0, 21.0, 21.0, 0.0),))
    assert score_chronology(off, FOUR_YEARS_PER_CM)[0].normalized_offset == math.inf


def test_score_rejects_depths_outside_the_scenario():
    chronology = Chronology(CI_CRS, (AgeEstimate(31.0, 130.0, 120.0, 140.0, 5.0),))
    with pytest.raises(DomainError):
        score_chronology(chronology, FOUR_YEARS_PER_CM)


def test_exact_records_are_always_covered():
    records = [record(0.0, offset=0.0, replicate=r, depth=d) for r in range(3) for d in (1.0, 2.0)]
    summary = aggregate_summary(records)
    row = summary.by_percent.iloc[0]
    assert (row['coverage_1'], row['coverage_2']) == (1.0, 1.0)
    assert row['n_runs'] == 3 and row['n_records'] == 6
    assert row['mean_offset'] == 0.0


def test_coverage_uses_run_means():
    records = [record(0.5, replicate=0, depth=1.0), record(2.5, replicate=0, depth=2.0),
               record(1.0, replicate=1, depth=1.0), record(5.0, replicate=2, depth=1.0)]
    overall = aggregate_summary(records).overall.iloc[0]
    assert overall['coverage_1'] == pytest.approx(1.0 / 3.0)
    assert overall['coverage_2'] == pytest.approx(2.0 / 3.0)
    assert overall['mean_normalized'] == pytest.approx(9.0 / 4.0)


def test_infinite_offsets_are_counted_not_averaged():
    records = [record(1.0, depth=1.0), record(math.inf, depth=2.0), record(math.inf, replicate=1)]
    row = aggregate_summary(records).by_percent.iloc[0]
    assert row['mean_normalized'] == pytest.approx(1.0)
    assert row['n_infinite'] == 2
    # Replicate 1 has no finite offset and is never covered
    assert row['coverage_2'] == pytest.approx(0.5)


def test_summary_ignores_record_order():
    records = [record(n, method=m, percent=p, replicate=r, depth=d, scenario=s)
               for n, (m, p, r, d, s) in enumerate(
                   [(CI_CRS, 20, 0, 1.0, "S1"), (PLUM, 20, 0, 1.0, "S1"), (CI_CRS, 50, 1, 2.0, "S2"),
                    (PLUM, 50, 0, 3.0, "S2"), (CI_CRS, 20, 0, 2.0, "S1")], start=1)]
    shuffled = records[:]
    random.Random(0).shuffle(shuffled)
    first, second = aggregate_summary(records), aggregate_summary(shuffled)
    for name in ('by_percent', 'overall', 'by_scenario'):
        pd.testing.assert_frame_equal(getattr(first, name), getattr(second, name))
    assert set(first.by_scenario['scenario']) == {"S1", "S2"}


def test_empty_records():
    with pytest.raises(DomainError):
        aggregate_summary([])


def test_plan_defaults():
    plan = ExperimentPlan()
    assert plan.attempted_runs == 5403
    assert plan.scenarios == ('S1', 'S2', 'S3')
    assert plan.engines == ('ci-crs', 'plum')
    small = ExperimentPlan(scenarios=[2], percents=[95, 100, 50], replicates=4, engines=['plum', 'r-crs'])
    assert small.percents == (50, 95, 100)
    assert small.engines == ('r-crs', 'plum')
    assert small.job_keys()[-1] == ('S2', 100, 0)
    assert small.attempted_runs == 9


@pytest.mark.parametrize("overrides", [
    {'replicates': 0},
    {'percents': [12]},
    {'engines': ['crs']},
    {'scenarios': [4]},
    {'source': 'lab'},
    {'mcmc': {'iterations': 10}},
])
def test_plan_validation(overrides):
    with pytest.raises(ValidationError):
        ExperimentPlan(**overrides)


def single_run_plan(**overrides):
    settings = {'scenarios': ['S2'], 'percents': [50], 'replicates': 1, 'engines': ['ci-crs']}
    settings.update(overrides)
    return ExperimentPlan(settings)


def test_single_run():
    result = run_experiment(single_run_plan())
    assert len(result.runs) == 1
    outcome = result.runs[0]
    assert (outcome.scenario, outcome.percent, outcome.method) == ('S2', 50, CI_CRS)
    if outcome.status == 'completed':
        assert outcome.n_records == len(result) > 0
        assert all(r.scenario == 'S2' and r.percent == 50 for r in result)
    else:
        assert outcome.status == 'skipped' and len(result) == 0
    counts = result.counts()
    assert counts.loc[0, 'attempted'] == 1


def test_experiment_is_deterministic():
    plan = single_run_plan(scenarios=['S1', 'S3'], percents=[30, 95], replicates=2, engines=['ci-crs', 'r-crs'],
                           r_crs_draws=50)
    first = run_experiment(plan)
    plan.jobs = 2
    second = run_experiment(plan)
    assert first.records == second.records
    assert first.runs == second.runs
    counts = first.counts().set_index('method')
    assert set(counts.index) == {CI_CRS, R_CRS}
    assert (counts['attempted'] == 8).all()
    assert (counts['attempted'] == counts['completed'] + counts['skipped'] + counts['failed']).all()
    assert counts['failed'].sum() == 0
    assert (counts['warned'] == 0).all()


def test_seed_changes_the_subsamples():
    first = run_experiment(single_run_plan(replicates=3, seed=1))
    second = run_experiment(single_run_plan(replicates=3, seed=2))
    assert first.records != second.records


def test_plum_run(quick_mcmc):
    result = run_experiment(single_run_plan(scenarios=['S1'], percents=[100], engines=['plum'], mcmc=quick_mcmc))
    assert [o.status for o in result.runs] == ['completed']
    assert len(result) == 30
    assert {r.method for r in result} == {PLUM}
    assert np.all(np.isfinite([r.age for r in result]))


def test_short_plum_chains_are_counted_as_warned():
    mcmc = McmcSettings(iterations=600, burn_in=200, thinning=4, seed=11)
    result = run_experiment(single_run_plan(scenarios=['S1'], percents=[100], engines=['plum'], mcmc=mcmc))
    assert result.runs[0].status == 'completed'
    assert "effective sample size below 100" in result.runs[0].warning
    assert result.counts().loc[0, 'warned'] == 1


def test_simulated_source():
    result = run_experiment(single_run_plan(scenarios=['S3'], percents=[100], source='simulate', seed=4))
    assert result.runs[0].status == 'completed'
    assert len(result) > 10
    frame = result.records_frame()
    assert list(frame.columns) == list(ComparisonRecord.FIELDS)
    assert len(result.runs_frame()) == 1


def test_records_and_summary_tables(tmp_path):
    records = [record(0.5, replicate=0), record(math.inf, replicate=1, depth=2.0), record(3.0, method=PLUM)]
    path = tmp_path / "records.csv"
    write_frame(records_frame(records), path, "# pb-chrono test")
    frame = load_records(path)
    assert len(frame) == 3
    assert frame['percent'].dtype.kind == 'i'
    assert math.isinf(frame.loc[1, 'normalized_offset'])
    pd.testing.assert_frame_equal(aggregate_summary(frame).overall, aggregate_summary(records).overall)

    counts = pd.DataFrame({'method': [CI_CRS, PLUM], 'attempted': [4, 4], 'completed': [2, 1]})
    table = summary_frame(aggregate_summary(frame), counts)
    assert list(table.columns) == SUMMARY_COLUMNS
    assert set(table['level']) == {'percent', 'overall', 'scenario'}
    overall = table[table['level'] == 'overall'].set_index('method')
    assert overall.loc[CI_CRS, 'completed'] == 2
    assert table[table['level'] == 'percent']['attempted'].isna().all()


def test_load_empty_records(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text(",".join(ComparisonRecord.FIELDS) + "\n")
    with pytest.raises(DomainError):
        load_records(path)


def test_ci_crs_scores_a_noiseless_core(noiseless_s1):
    records = score_chronology(ci_crs_chronology(noiseless_s1), S1)
    assert records
    assert np.isfinite(np.mean([r.normalized_offset for r in records]))


@pytest.mark.slow
def test_plum_covers_a_noiseless_core(noiseless_s1):
    records = score_chronology(summarize_chronology(sample_posterior(noiseless_s1, mcmc=McmcSettings(seed=3))), S1)
    assert np.mean([r.normalized_offset <= 2.0 for r in records]) >= 0.9


@pytest.mark.slow
def test_plum_covers_more_than_ci_crs():
    plan = ExperimentPlan(scenarios=['S1'], percents=[10, 25, 50, 75, 95], replicates=10, engines=['ci-crs', 'plum'],
                          mcmc=McmcSettings(seed=0), jobs=-1)
    summary = aggregate_summary(run_experiment(plan).records)
    overall = summary.overall.set_index('method')
    assert overall.loc[PLUM, 'coverage_2'] > overall.loc[CI_CRS, 'coverage_2']

    by_percent = summary.by_percent.set_index(['method', 'percent'])
    assert by_percent.loc[(PLUM, 95), 'mean_interval'] < by_percent.loc[(PLUM, 25), 'mean_interval']
    crs_intervals = by_percent.loc[CI_CRS, 'mean_interval']
    assert (crs_intervals.max() - crs_intervals.min()) / crs_intervals.min() < 0.3
