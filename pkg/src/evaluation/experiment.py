"""
Subsampling experiment: date random subsets of known cores with each engine and score the results.

Every (scenario, percent, replicate) triple is one job. A job draws its subsample and its
engine seeds from SeedSequence(seed, spawn_key=(scenario number, percent, replicate)), so the
records do not depend on the number of workers or on the order jobs finish in.
"""
import copy
import logging
import warnings

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from algorithms.crs import CrsSettings, ci_crs_chronology
from algorithms.crs_monte_carlo import r_crs_chronology
from algorithms.mcmc import McmcSettings
from algorithms.plum import PlumPriors, sample_posterior, summarize_chronology
from scenarios import get_scenario, scenario_key, supplementary_dataset
from src.common.exceptions import ConvergenceWarning, DomainError, ValidationError
from src.common.settings import Settings
from src.common.utils import child_seeds, derive_rng, derive_seed_sequence
from src.common.validators import (
    validate_boolean,
    validate_choice,
    validate_instance,
    validate_integer,
    validate_subset,
)
from src.core.chronology import CI_CRS, PLUM, R_CRS
from src.evaluation.metrics import ComparisonRecord, records_frame, score_chronology
from src.simulation.noise import NoiseSettings
from src.simulation.simulator import PERCENT_GRID, simulate_core, subsample

logger = logging.getLogger(__name__)

ENGINE_METHODS = {'ci-crs': CI_CRS, 'r-crs': R_CRS, 'plum': PLUM}
SOURCES = ('supplementary', 'simulate')
COMPLETED, SKIPPED, FAILED = 'completed', 'skipped', 'failed'


def _validate_scenarios(value):
    if isinstance(value, (str, int)) or not value:
        raise ValueError("scenarios must be a non-empty collection of scenario ids.")
    for key in value:
        try:
            scenario_key(key)
        except DomainError as e:
            raise ValueError(f"scenarios: {e}")


class ExperimentPlan(Settings):
    """
    What the experiment runs.

    Keys:
        scenarios: Built-in scenario ids (1, 2, 3 or "S1".."S3").
        percents: Information percentages, taken from 10, 15, ..., 95, 100.
        replicates: Subsamples per percentage; 100% always gets a single replicate.
        seed: Master seed.
        engines: Any of "ci-crs", "r-crs", "plum".
        source: "supplementary" dates the published datasets, "simulate" one new core per scenario.
        mcmc, priors, crs, noise: Engine and simulator settings.
        r_crs_draws: Monte Carlo draws per R-CRS run.
        jobs: Worker processes, as understood by joblib.
        show_progress: Progress bar over the jobs.
    """
    default_settings = {
        'scenarios': ('S1', 'S2', 'S3'),
        'percents': PERCENT_GRID,
        'replicates': 100,
        'seed': 0,
        'engines': ('ci-crs', 'plum'),
        'source': 'supplementary',
        'mcmc': McmcSettings(),
        'priors': PlumPriors(),
        'crs': CrsSettings(),
        'noise': NoiseSettings(),
        'r_crs_draws': 1000,
        'jobs': 1,
        'show_progress': False,
    }

    _validators = {
        'scenarios': _validate_scenarios,
        'percents': validate_subset('percents', PERCENT_GRID),
        'replicates': validate_integer('replicates', minimum=1),
        'seed': validate_integer('seed', minimum=0),
        'engines': validate_subset('engines', tuple(ENGINE_METHODS)),
        'source': validate_choice('source', SOURCES),
        'mcmc': validate_instance('mcmc', McmcSettings),
        'priors': validate_instance('priors', PlumPriors),
        'crs': validate_instance('crs', CrsSettings),
        'noise': validate_instance('noise', NoiseSettings),
        'r_crs_draws': validate_integer('r_crs_draws', minimum=2),
        'jobs': validate_integer('jobs'),
        'show_progress': validate_boolean('show_progress'),
    }

    _actuators = {
        'scenarios': lambda value: tuple(sorted({scenario_key(k) for k in value})),
        'percents': lambda value: tuple(sorted({int(p) for p in value})),
        'engines': lambda value: tuple(e for e in ENGINE_METHODS if e in set(value)),
    }

    def __init__(self, settings_dict=None, **kwargs):
        try:
            super().__init__(settings_dict, **kwargs)
        except ValueError as e:
            raise ValidationError(str(e)) from e

    def job_keys(self):
        """(scenario, percent, replicate) of every run, in a fixed order."""
        keys = []
        for scenario in self.scenarios:
            for percent in self.percents:
                replicates = 1 if percent == 100 else self.replicates
                keys.extend((scenario, percent, replicate) for replicate in range(replicates))
        return keys

    @property
    def attempted_runs(self):
        """Runs per engine."""
        return len(self.job_keys())


class RunOutcome:
    """What happened to one engine on one subsample."""

    def __init__(self, scenario, percent, replicate, method, status, reason="", n_records=0, warning=""):
        self.scenario = scenario
        self.percent = percent
        self.replicate = replicate
        self.method = method
        self.status = status
        self.reason = reason
        self.n_records = n_records
        self.warning = warning

    def __eq__(self, other):
        if not isinstance(other, RunOutcome):
            return NotImplemented
        return vars(self) == vars(other)

    def __repr__(self):
        return f"RunOutcome({self.method} on {self.scenario} at {self.percent}% #{self.replicate}: {self.status})"


class ExperimentResult:
    """
    Records of every completed run plus the outcome of every attempted one.

    Iterating over the result yields the records.

    Args:
        records (tuple of ComparisonRecord): Sorted by (scenario, percent, replicate, method, depth).
        runs (tuple of RunOutcome): One per attempted run.
    """

    def __init__(self, records, runs):
        self.records = tuple(records)
        self.runs = tuple(runs)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def runs_frame(self):
        return pd.DataFrame([vars(run) for run in self.runs],
                            columns=['scenario', 'percent', 'replicate', 'method', 'status', 'reason',
                                     'n_records', 'warning'])

    def counts(self):
        """Attempted, completed, skipped and failed runs per method, plus completed runs with a convergence warning."""
        runs = self.runs_frame()
        counts = runs.groupby(['method', 'status']).size().unstack(fill_value=0)
        for status in (COMPLETED, SKIPPED, FAILED):
            if status not in counts.columns:
                counts[status] = 0
        counts['attempted'] = counts[[COMPLETED, SKIPPED, FAILED]].sum(axis=1)
        warned = runs[runs['warning'].fillna("") != ""].groupby('method').size()
        counts['warned'] = warned.reindex(counts.index, fill_value=0)
        return counts[['attempted', COMPLETED, SKIPPED, FAILED, 'warned']].reset_index()

    def records_frame(self):
        return records_frame(self.records)


def _date(engine, dataset, seed, plan):
    if engine == 'ci-crs':
        return ci_crs_chronology(dataset, plan.crs)
    if engine == 'r-crs':
        return r_crs_chronology(dataset, plan.r_crs_draws, seed=seed, settings=plan.crs)
    mcmc = copy.deepcopy(plan.mcmc)
    mcmc.configure({'seed': seed, 'show_progress': False, 'jobs': 1})
    return summarize_chronology(sample_posterior(dataset, plan.priors, mcmc))


def _run_job(scenario_id, dataset, percent, replicate, plan):
    scenario = get_scenario(scenario_id)
    seed_sequence = derive_seed_sequence(plan.seed, scenario.number, percent, replicate)
    subsample_seed, *engine_seeds = child_seeds(seed_sequence, 1 + len(ENGINE_METHODS))
    sample = subsample(dataset, percent, np.random.default_rng(subsample_seed))

    records, outcomes = [], []
    for engine, seed in zip(ENGINE_METHODS, engine_seeds):
        if engine not in plan.engines:
            continue
        method = ENGINE_METHODS[engine]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always', ConvergenceWarning)
            try:
                chronology = _date(engine, sample, seed, plan)
                run_records = score_chronology(chronology, scenario, percent=percent, replicate=replicate)
            except DomainError as e:
                outcomes.append(RunOutcome(scenario_id, percent, replicate, method, SKIPPED, str(e)))
                continue
            except Exception as e:
                logger.warning("%s failed on %s at %d%% (replicate %d): %s", method, scenario_id, percent,
                               replicate, e)
                outcomes.append(RunOutcome(scenario_id, percent, replicate, method, FAILED,
                                           f"{type(e).__name__}: {e}"))
                continue
        warning = "; ".join(str(w.message) for w in caught if issubclass(w.category, ConvergenceWarning))
        records.extend(run_records)
        outcomes.append(RunOutcome(scenario_id, percent, replicate, method, COMPLETED, "", len(run_records), warning))
    return records, outcomes


def _source_datasets(plan):
    datasets = {}
    for scenario_id in plan.scenarios:
        if plan.source == 'supplementary':
            datasets[scenario_id] = supplementary_dataset(scenario_id)
        else:
            scenario = get_scenario(scenario_id)
            datasets[scenario_id] = simulate_core(scenario, plan.noise, rng=derive_rng(plan.seed, scenario.number))
    return datasets


def run_experiment(plan=None):
    """
    Runs every engine of the plan on every subsample and scores the chronologies.

    Engine errors never stop the experiment: a DomainError (e.g. no datable excess, fewer than
    two datable slabs) marks the run skipped, any other exception marks it failed.

    Args:
        plan (ExperimentPlan, optional): Defaults to the full plan.

    Returns:
        ExperimentResult: Records sorted by (scenario, percent, replicate, method, depth), and one
        RunOutcome per attempted run.
    """
    plan = plan or ExperimentPlan()
    datasets = _source_datasets(plan)
    keys = plan.job_keys()
    logger.info("Running %d jobs x %d engines", len(keys), len(plan.engines))

    results = Parallel(n_jobs=plan.jobs)(
        delayed(_run_job)(scenario_id, datasets[scenario_id], percent, replicate, plan)
        for scenario_id, percent, replicate in tqdm(keys, desc="experiment", disable=not plan.show_progress)
    )

    records = sorted((r for job_records, _ in results for r in job_records),
                     key=lambda r: (r.scenario, r.percent, r.replicate, r.method, r.depth))
    runs = sorted((o for _, job_outcomes in results for o in job_outcomes),
                  key=lambda o: (o.scenario, o.percent, o.replicate, o.method))
    for outcome in runs:
        if outcome.status != COMPLETED:
            logger.info("%s %s on %s at %d%% (replicate %d): %s", outcome.method, outcome.status,
                        outcome.scenario, outcome.percent, outcome.replicate, outcome.reason)
    warned = [o for o in runs if o.warning]
    if warned:
        logger.warning("%d completed runs issued a convergence warning, e.g. %s on %s at %d%% (replicate %d): %s",
                       len(warned), warned[0].method, warned[0].scenario, warned[0].percent, warned[0].replicate,
                       warned[0].warning)
    return ExperimentResult(records=tuple(records), runs=tuple(runs))
