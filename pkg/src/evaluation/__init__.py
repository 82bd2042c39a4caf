from .metrics import (
    ComparisonRecord,
    Summary,
    aggregate_summary,
    load_records,
    records_frame,
    score_chronology,
    summary_frame,
)
from .experiment import ExperimentPlan, ExperimentResult, RunOutcome, run_experiment
