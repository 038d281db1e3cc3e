"""
Seeded random substreams and the block-parallel path runner.

Paths are grouped into fixed-size blocks. Block ``k`` of a simulation draws
from a Philox generator keyed by ``(seed, tag, k)``, so a path's draws
depend only on the seed and the path index. The worker count changes
scheduling, never the sample.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InvalidParameter

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 4096
MAX_SEED = 2**64 - 1

# One tag per simulator keeps their streams disjoint under a shared seed.
TAG_TREE = 1
TAG_JOINT = 2
TAG_FEYNMAN_KAC = 3
TAG_PAIR = 4
TAG_HEDGE = 5
TAG_ALLOCATION = 6

BlockFn = Callable[[np.random.Generator, int, int], np.ndarray]


def check_seed(seed: int) -> int:
    """Validate a 64-bit seed."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidParameter(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) <= MAX_SEED:
        raise InvalidParameter(f"seed must lie in [0, 2**64), got {seed}")
    return int(seed)


def block_generator(seed: int, tag: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of paths."""
    sequence = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(tag, block))
    return np.random.Generator(np.random.Philox(sequence))


def block_layout(n_paths: int, block_size: int = DEFAULT_BLOCK_SIZE) -> List[Tuple[int, int]]:
    """(first path, path count) for every block."""
    if n_paths < 1:
        raise InvalidParameter(f"n_paths must be >= 1, got {n_paths}")
    if block_size < 1:
        raise InvalidParameter(f"block_size must be >= 1, got {block_size}")
    return [
        (start, min(block_size, n_paths - start))
        for start in range(0, n_paths, block_size)
    ]


def run_blocks(
    fn: BlockFn,
    n_paths: int,
    seed: int,
    tag: int,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Evaluate ``fn(rng, first_path, count)`` on every block and stack in path order.

    Args:
        fn: Block kernel returning an array whose first axis has ``count`` rows
            (or any fixed per-block length, e.g. antithetic pair means)
        n_paths: Total number of paths
        seed: 64-bit simulation seed
        tag: Simulator tag from this module
        block_size: Paths per block; part of the reproducibility contract
        workers: Thread cap; ``None`` or 1 runs serially

    Returns:
        Concatenation of the block results in block order
    """
    check_seed(seed)
    layout = block_layout(n_paths, block_size)

    def _run(index: int) -> np.ndarray:
        start, count = layout[index]
        return fn(block_generator(seed, tag, index), start, count)

    n_workers = max(1, int(workers or 1))
    logger.debug(
        f"Running {len(layout)} blocks of up to {block_size} paths "
        f"(tag={tag}, workers={n_workers})"
    )
    if n_workers == 1 or len(layout) == 1:
        parts = [_run(i) for i in range(len(layout))]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_run, range(len(layout))))
    return np.concatenate(parts, axis=0)
