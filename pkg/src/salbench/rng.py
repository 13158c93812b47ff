"""Counter-based random streams, reproducible regardless of scheduling."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def philox(*key_words: int) -> np.random.Generator:
    """Generator backed by the Philox counter-based PRNG.

    Streams are identified purely by the key words (e.g. ``(seed, mask_index)``),
    so values never depend on draw order across workers.
    """
    key = [int(w) & _MASK64 for w in key_words][:2]
    while len(key) < 2:
        key.append(0)
    return np.random.Generator(np.random.Philox(key=key))
