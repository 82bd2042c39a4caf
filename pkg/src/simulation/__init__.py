from .scenario import AgeFunction, Scenario
from .noise import NoiseSettings, noiseless_settings, perturb_measurement, reported_sd
from .simulator import (
    PERCENT_GRID,
    density_at,
    expected_concentration,
    simulate_core,
    subsample,
    true_age,
    true_total_concentration,
)
