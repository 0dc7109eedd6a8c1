"""Deterministic random substreams shared by every Monte Carlo driver.

A master seed plus a path of integer coordinates (stream tag, purpose,
replication index, ...) is mixed by a fixed 64-bit hash into the key of a
counter-based generator. The mapping is a pure function, so results never
depend on call order, worker count, or scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags. Consumers of the same master seed never share a tag.
STREAM_PANEL = 1
STREAM_COPY = 2
STREAM_MULTIPLIER = 3
STREAM_GAUSSIAN = 4

# Purpose coordinates inserted after the stream tag by the verification
# drivers, so that e.g. the lhs and rhs estimates of one report draw
# disjoint panels from a single master seed.
PURPOSE_DEFAULT = 0
PURPOSE_LHS = 1
PURPOSE_MID = 2
PURPOSE_RHS = 3
PURPOSE_TAIL = 4
PURPOSE_NORM = 5
PURPOSE_QUAD = 6
PURPOSE_MODEL = 7
PURPOSE_SPLIT = 8
PURPOSE_MOMENT = 9
PURPOSE_HOEFFDING = 10


def _mix(z: int) -> int:
    # SplitMix64 finalizer, the fixed 64-bit mixing step.
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _key_words(master_seed: int, *path: int) -> tuple[int, int]:
    word = _mix(int(master_seed) & _MASK64)
    for coordinate in path:
        word = _mix(word ^ _mix(int(coordinate) & _MASK64))
    return word, _mix(word ^ 0xA5A5A5A5A5A5A5A5)


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream at ``path`` under ``master_seed``.

    Identical arguments always produce an identically-seeded generator.
    Distinct paths produce streams with independent-quality output (Philox
    keys differ by at least one mixed word).
    """
    key = np.array(_key_words(master_seed, *path), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substream_iter(master_seed: int, stream: int, purpose: int, start: int, stop: int):
    """Yield the per-replication generators for indices start..stop-1.

    Output is identical to substream(master_seed, stream, purpose, r) for
    each r, but all replications share one pooled bit generator whose state
    is rekeyed per index, which is much cheaper than constructing fresh
    generators in hot Monte Carlo loops. Each yielded generator must be
    fully consumed before the next one is requested.
    """
    bitgen = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
    gen = np.random.Generator(bitgen)
    for r in range(start, stop):
        bitgen.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.zeros(4, dtype=np.uint64),
                "key": np.array(_key_words(master_seed, stream, purpose, r),
                                 dtype=np.uint64),
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        yield gen
