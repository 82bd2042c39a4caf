from .builtin import S1, S2, S3, BUILTIN_SCENARIOS, get_scenario, scenario_key
from .supplementary import supplementary_dataset, supplementary_path
