"""Seeded random streams.

Every stochastic routine takes a ``seed`` that may be an int, a
``numpy.random.SeedSequence`` or a ready ``Generator``.  Generators are
Philox (counter based), so independent substreams are obtained from the
master seed plus a stable task index, never from the order in which tasks
happen to run.
"""
import numpy as np

# stream tags keep particle, NV-position and trace draws from colliding
STREAM_PARTICLE = 0
STREAM_SWEEP = 1


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.Philox(seed))


def substream_seed(master_seed, *index):
    """Derive a 64-bit sub-seed for task ``index`` of ``master_seed``.

    The derivation depends only on the two arguments, so a task can be
    replayed from the returned integer alone.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in index))
    return int(ss.generate_state(1, np.uint64)[0])


def substream(master_seed, *index):
    return make_rng(substream_seed(master_seed, *index))
