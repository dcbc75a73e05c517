"""Deterministic random streams.

Every random draw in the workbench comes from numpy's PCG64 bit generator.
Independent substreams are keyed by ``(master_seed, *keys)`` through
``SeedSequence`` so a block's randomness never depends on which worker
decodes it or in what order.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep data bits, noise and interleavers decorrelated even when
# they share a master seed and block index.
STREAM_DATA = 1
STREAM_NOISE = 2
STREAM_INTERLEAVER = 3


def generator(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def substream_seed(master_seed: int, block_index: int, stream: int) -> int:
    """64-bit seed for one block's stream; recorded in output headers."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(block_index), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
