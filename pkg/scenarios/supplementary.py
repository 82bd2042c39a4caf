from functools import lru_cache
from pathlib import Path

from scenarios.builtin import scenario_key
from src.core.io import load_dataset

DATA_DIR = Path(__file__).resolve().parent / "data"


def supplementary_path(key):
    return DATA_DIR / f"sim{int(scenario_key(key)[1:]):02d}.csv"


@lru_cache(maxsize=None)
def supplementary_dataset(key):
    """
    The published 30-slab dataset of a built-in scenario (Sim01, Sim02 or Sim03).

    Args:
        key (int or str): 1, 2, 3 or "S1", "S2", "S3".

    Returns:
        Dataset: Immutable, so the cached instance is shared.
    """
    scenario_id = scenario_key(key)
    return load_dataset(supplementary_path(scenario_id), core_id=f"Sim{int(scenario_id[1:]):02d}")
