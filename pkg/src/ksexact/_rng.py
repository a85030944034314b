"""Seeded random streams with a fixed block decomposition.

Every Monte Carlo routine splits its replicates into blocks of
``BLOCK_SIZE``. Block ``b`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(b,))``, so the output only depends on the
seed and the replicate count, never on how many workers evaluate blocks.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 8192


def block_rng(seed, block_index, stream=0):
    ss = np.random.SeedSequence(seed, spawn_key=(stream, block_index))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(total, block_size=BLOCK_SIZE):
    full, rest = divmod(total, block_size)
    sizes = [block_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def map_blocks(fn, total, seed, workers=1, stream=0, block_size=BLOCK_SIZE):
    """Evaluate ``fn(rng, size)`` for each block and return results in block order.

    ``seed`` must be an int for reproducible output; ``None`` draws fresh
    OS entropy once so that all blocks still come from one root sequence.
    """
    if seed is None:
        seed = np.random.SeedSequence().entropy
    sizes = block_sizes(total, block_size)
    jobs = [(b, size) for b, size in enumerate(sizes)]

    def run(job):
        b, size = job
        return fn(block_rng(seed, b, stream), size)

    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
