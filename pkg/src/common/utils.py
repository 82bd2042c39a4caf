import numpy as np


def parse_number_list(text, cast=float):
    """
    Parse a comma-separated list such as "10,50,95" or "(1, 2)".

    Args:
        text (str or sequence): The text to parse. Sequences are passed through cast.
        cast (callable): Conversion applied to every element.

    Returns:
        list: The parsed values.

    Raises:
        ValueError: If an element cannot be converted.
    """
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    items = [item.strip() for item in str(text).strip('()[] ').split(',')]
    return [cast(item) for item in items if item]


def derive_rng(master_seed, *key):
    """
    Independent generator for one job, identified by an integer key tuple.

    The same (master_seed, key) always yields the same stream, whatever the
    order or the process in which jobs are executed.
    """
    return np.random.default_rng(derive_seed_sequence(master_seed, *key))


def derive_seed_sequence(master_seed, *key):
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def child_seeds(seed_sequence, n):
    """Spawn n integer seeds from a SeedSequence (or an integer seed)."""
    if not isinstance(seed_sequence, np.random.SeedSequence):
        seed_sequence = np.random.SeedSequence(int(seed_sequence))
    return [int(child.generate_state(1)[0]) for child in seed_sequence.spawn(n)]
