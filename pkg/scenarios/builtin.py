"""
The three simulated sedimentation histories.

The supply and supported values in use are the ones the published
supplementary tables were generated with; scenarios 1 and 2 have them swapped
relative to the printed scenario table, which is kept in table_phi/table_supported.
"""
import math

from src.common.exceptions import DomainError
from src.simulation.scenario import AgeFunction, Scenario

S1 = Scenario("S1", AgeFunction((0.0, 0.5, 0.25)), phi=50.0, supported=25.0,
              table_phi=100.0, table_supported=10.0)
S2 = Scenario("S2", AgeFunction((0.0, 12.0, -0.2)), phi=100.0, supported=10.0,
              table_phi=50.0, table_supported=25.0)
S3 = Scenario("S3", AgeFunction((0.0, 8.0), sin_amplitude=25.0, sin_period=math.pi), phi=500.0, supported=15.0)

BUILTIN_SCENARIOS = {'S1': S1, 'S2': S2, 'S3': S3}


def scenario_key(key):
    """Normalises 1, "1", "s1" or "S1" to "S1"."""
    text = str(key).strip().upper()
    if not text.startswith('S'):
        text = 'S' + text
    if text not in BUILTIN_SCENARIOS:
        raise DomainError(f"unknown scenario '{key}', expected one of 1, 2, 3")
    return text


def get_scenario(key, use_table_values=False):
    scenario = BUILTIN_SCENARIOS[scenario_key(key)]
    return scenario.with_table_values() if use_table_values else scenario
