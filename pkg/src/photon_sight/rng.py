"""Reproducible random streams keyed by (seed, stream, block).

Every simulator splits its work into fixed-size blocks and draws the random
numbers for block ``i`` from a generator derived only from the root seed, a
stream label and ``i``. Results therefore do not depend on how many workers
process the blocks or in which order they finish.
"""

from concurrent.futures import ThreadPoolExecutor
import zlib

import numpy as np

PULSE_BLOCK = 1 << 21
TRIAL_BLOCK = 1 << 16


def as_seed_sequence(random_state):
    """Normalize ``random_state`` into a :class:`numpy.random.SeedSequence`.

    Accepts an int, a SeedSequence, a Generator (one 63-bit draw is taken
    from it) or None for fresh OS entropy.
    """
    if isinstance(random_state, np.random.SeedSequence):
        return random_state
    if isinstance(random_state, np.random.Generator):
        return np.random.SeedSequence(int(random_state.integers(0, 2**63)))
    if random_state is None:
        return np.random.SeedSequence()
    if isinstance(random_state, (int, np.integer)) and not isinstance(random_state, bool):
        if random_state < 0:
            raise ValueError(f"seed must be non-negative, got {random_state}")
        return np.random.SeedSequence(int(random_state))
    raise TypeError(f"cannot build a random stream from {type(random_state).__name__}")


def as_generator(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.Generator(np.random.PCG64(as_seed_sequence(random_state)))


def _stream_id(stream):
    if isinstance(stream, str):
        return zlib.crc32(stream.encode("utf-8"))
    return int(stream)


def child_sequence(root, stream, *index):
    """SeedSequence for ``(root, stream, *index)``; pure function of its inputs."""
    root = as_seed_sequence(root)
    key = tuple(root.spawn_key) + (_stream_id(stream),) + tuple(int(i) for i in index)
    return np.random.SeedSequence(root.entropy, spawn_key=key)


def block_generator(root, stream, *index):
    return np.random.Generator(np.random.PCG64(child_sequence(root, stream, *index)))


def block_slices(total, block_size):
    """Yield ``(block_index, start, stop)`` covering ``range(total)``."""
    for b, start in enumerate(range(0, total, block_size)):
        yield b, start, min(start + block_size, total)


def map_blocks(func, tasks, n_jobs=1):
    """Apply ``func`` to each task, preserving task order.

    ``n_jobs`` only changes scheduling; callers must make ``func`` depend on
    the task alone.
    """
    tasks = list(tasks)
    if n_jobs is None or n_jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=int(n_jobs)) as pool:
        return list(pool.map(func, tasks))
