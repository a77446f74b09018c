"""Named, seeded random streams.

Every random draw in fedboost comes from a numpy ``Generator`` over the PCG64
bit generator, seeded by ``SeedSequence(seed mod 2**64, spawn_key=(stream id,
*keys))``. Each purpose gets its own stream so that, for example, changing the
number of clients never shifts the generated data. Per-client streams add the
client id as a key.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "data": 0,
    "partition": 1,
    "latency": 2,
    "dropout": 3,
    "split": 4,
}

_SEED_MASK = (1 << 64) - 1


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Create the generator for a named stream.

    Args:
        seed: 64-bit experiment seed; negative values wrap modulo 2**64.
        name: one of the names in STREAMS.
        keys: extra nonnegative integers, e.g. a client id.

    Returns:
        A freshly seeded numpy Generator.

    Raises:
        KeyError: Unknown stream name.
    """
    spawn_key = (STREAMS[name], *(int(k) for k in keys))
    sequence = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK, spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(sequence))
