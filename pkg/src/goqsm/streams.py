"""Counter-based random streams.

Every random draw in the simulator comes from a generator keyed by a master
seed plus a tuple of integer stream ids, so a block of work produces the same
numbers no matter which process runs it or in what order.
"""

from __future__ import annotations

import numpy as np


def make_stream(seed: int, *stream_ids: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *stream_ids)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in stream_ids))
    return np.random.Generator(np.random.PCG64(ss))
