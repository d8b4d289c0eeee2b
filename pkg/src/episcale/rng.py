"""Seed handling and per-replicate random streams.

Every replicate draws from its own Philox stream whose key is derived from
``SeedSequence(master_seed, spawn_key=(stream, index))``. A replicate's
randomness therefore depends only on the master seed, a stream tag naming
the simulator, and the replicate index; it does not depend on how
replicates are scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Union

import numpy as np

RngSeed = Union[int, np.random.SeedSequence, np.random.Generator]

# Stream tags keep the chain and diffusion sides of a comparison independent
# even when they share a master seed.
STREAMS = {
    "sis": 1,
    "envelope": 2,
    "coupled": 3,
    "sir": 4,
    "envelope_exact": 5,
    "diffusion": 11,
    "diffusion_ref": 12,
    "ou_reference": 13,
}


def make_generator(seed: RngSeed) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed``.

    A Generator is passed through unchanged so callers can thread one
    stream through several draws.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def replicate_seed(master_seed: int, stream: str | int, index: int) -> np.random.SeedSequence:
    tag = STREAMS[stream] if isinstance(stream, str) else int(stream)
    return np.random.SeedSequence(int(master_seed), spawn_key=(tag, int(index)))


def replicate_generator(master_seed: int, stream: str | int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(replicate_seed(master_seed, stream, index)))


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_replicates(
    batch: Callable[[int, int], dict[str, np.ndarray]],
    n: int,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Run ``batch(start, stop)`` over ``range(n)`` and concatenate in index order.

    ``batch`` must be picklable when ``workers > 1`` and must return a dict of
    arrays whose first axis indexes replicates. Because each replicate owns
    its stream, the result is identical for any worker count.
    """
    if n <= 0:
        raise ValueError("need at least one replicate")
    chunks = _chunks(n, workers)
    if workers <= 1 or len(chunks) == 1:
        parts = [batch(a, b) for a, b in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(batch, a, b) for a, b in chunks]
            parts = [f.result() for f in futures]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
