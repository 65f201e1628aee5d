from enum import IntEnum
from typing import Dict

import numpy as np


class SeedStream(IntEnum):
    """Top level branches of the seed hierarchy; every random draw belongs to exactly one."""
    DATA = 0
    PARTITION = 1
    TEST_SPLIT = 2
    MODEL_INIT = 3
    CLIENT_SAMPLING = 4
    EXTRACTION = 5
    CLIENT_BATCHES = 6
    SERVER = 7
    GENERATOR_INIT = 8


# path components appended after the stream id, per stream
SEED_HIERARCHY: Dict[SeedStream, str] = {
    SeedStream.DATA: "(master, DATA, split) split: 0 train, 1 test",
    SeedStream.PARTITION: "(master, PARTITION)",
    SeedStream.TEST_SPLIT: "(master, TEST_SPLIT)",
    SeedStream.MODEL_INIT: "(master, MODEL_INIT, round) round 0 is the initial global model",
    SeedStream.CLIENT_SAMPLING: "(master, CLIENT_SAMPLING, round)",
    SeedStream.EXTRACTION: "(master, EXTRACTION, round, client, layer)",
    SeedStream.CLIENT_BATCHES: "(master, CLIENT_BATCHES, round, client)",
    SeedStream.SERVER: "(master, SERVER, round)",
    SeedStream.GENERATOR_INIT: "(master, GENERATOR_INIT)",
}


def derive_rng(master_seed: int, stream: SeedStream, *path: int) -> np.random.Generator:
    if master_seed < 0 or any(p < 0 for p in path):
        raise ValueError(f"seed components must be non-negative: {(master_seed, *path)}")
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(stream), *map(int, path)]))


def describe_hierarchy() -> Dict[str, str]:
    return {stream.name.lower(): description for stream, description in SEED_HIERARCHY.items()}


def derive_seed(master_seed: int, stream: SeedStream, *path: int) -> int:
    """An integer seed for APIs that take one, drawn from the same hierarchy as derive_rng."""
    sequence = np.random.SeedSequence([int(master_seed), int(stream), *map(int, path)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
