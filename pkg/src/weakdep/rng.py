"""Counter-based random streams.

Every stream is a Philox-4x64 generator keyed by ``(master_seed, stream_id)``.
Replicate chunk ``k`` always draws from stream ``k``, so results do not
depend on how chunks are scheduled.  Stream ids at or above
``RESERVED_BASE`` are kept for auxiliary runs (pre-runs, calibration).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

_MASK64 = (1 << 64) - 1
RESERVED_BASE = 1 << 63


def stream(master_seed: int, stream_id: int) -> np.random.Generator:
    master_seed, stream_id = int(master_seed), int(stream_id)
    if not (0 <= master_seed <= _MASK64 and 0 <= stream_id <= _MASK64):
        raise InvalidParameterError("seed and stream id must be 64-bit unsigned integers")
    return np.random.Generator(np.random.Philox(key=(master_seed << 64) | stream_id))


def reserved_stream(master_seed: int, tag: int) -> np.random.Generator:
    return stream(master_seed, RESERVED_BASE + int(tag))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Fixed partition of ``total`` replicates into chunks of size ``chunk``."""
    if total < 0 or chunk < 1:
        raise InvalidParameterError("invalid replicate partition")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
