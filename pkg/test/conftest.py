import numpy as np
import pytest

from algorithms.mcmc import McmcSettings
from scenarios import S1, S2, S3, supplementary_dataset
from src.core.measurement import Dataset, Measurement
from src.simulation.noise import noiseless_settings
from src.simulation.scenario import Scenario
from src.simulation.simulator import simulate_core


def make_dataset(pb210, ra226=None, depths=None, thickness=1.0, density=0.1, pb210_sd=1.0, ra226_sd=0.5):
    """Small hand-made dataset; depths default to thickness, 2 * thickness, ..."""
    n = len(pb210)
    depths = thickness * np.arange(1, n + 1) if depths is None else depths
    ra226 = [10.0] * n if ra226 is None else ra226
    measurements = tuple(
        Measurement(label=f"t-{i + 1:02d}", depth=float(depths[i]), density=density, pb210=float(pb210[i]),
                    pb210_sd=pb210_sd, thickness=thickness, ra226=float(ra226[i]), ra226_sd=ra226_sd)
        for i in range(n))
    return Dataset(measurements, core_id="test")


@pytest.fixture(scope="session")
def sim01():
    return supplementary_dataset(1)


@pytest.fixture(scope="session")
def sim02():
    return supplementary_dataset(2)


@pytest.fixture(scope="session")
def sim03():
    return supplementary_dataset(3)


@pytest.fixture(scope="session")
def noiseless_s1():
    return simulate_core(S1, noiseless_settings())


@pytest.fixture(scope="session")
def noiseless_s2():
    return simulate_core(S2, noiseless_settings())


@pytest.fixture(scope="session")
def linear_scenario():
    """Constant accumulation of 5 yr/cm: the piecewise linear model holds exactly."""
    return Scenario.custom((0.0, 5.0), phi=80.0, supported=20.0)


@pytest.fixture(scope="session")
def scenarios_by_id():
    return {'S1': S1, 'S2': S2, 'S3': S3}


@pytest.fixture
def quick_mcmc():
    """Short chains: 100 retained draws, enough for a chronology summary."""
    return McmcSettings(iterations=600, burn_in=200, thinning=4, ess_floor=0, seed=11)
