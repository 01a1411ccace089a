"""Seeded randomness: permutations, dimension groups, and block partitions.

All randomness in the toolkit flows through :class:`RngStream`, a
counter-based generator keyed by ``(seed, stream, path)``.  The same key
always replays the same draws, so an experiment is reproducible from the
seeds in its config alone, and derived child streams are independent of
the parent and of each other.

Indexing convention: dimensions are numbered 1..d in every index set,
permutation image, and block label handed out by this module.  Arrays
are stored 0-based as usual; position ``p`` corresponds to dimension
``p + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngStream",
    "random_permutation",
    "partition_groups",
    "DependentPartition",
    "dependent_partition",
]


class RngStream:
    """Deterministic stream of randomness keyed by ``(seed, stream, path)``.

    Backed by Philox, which is counter-based: the key alone fixes the
    entire sequence, with no global state shared between streams.  Use
    :meth:`derive` to key independent sub-streams for subcomputations
    (one per optimization step, per run, per worker, ...).
    """

    def __init__(self, seed: int, stream: int = 0, path: tuple[int, ...] = ()):
        path = tuple(int(k) for k in path)
        if seed < 0 or stream < 0 or any(k < 0 for k in path):
            raise ValueError("seed, stream, and path keys must be nonnegative")
        self.seed = int(seed)
        self.stream = int(stream)
        self.path = path
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *path))
        self.gen = np.random.Generator(np.random.Philox(seq))

    def derive(self, *keys: int) -> "RngStream":
        """Child stream for a subcomputation; distinct key paths never collide."""
        return RngStream(self.seed, self.stream, self.path + keys)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream}, path={self.path})"


def random_permutation(n: int, rng: RngStream) -> np.ndarray:
    """Uniform random permutation of {1..n} in image form.

    ``images[p]`` is the image of ``p + 1``.  Built by sequential swaps
    with one uniform integer draw per position, so the amount of
    generator state consumed depends only on ``n``.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got n={n}")
    images = np.arange(1, n + 1, dtype=np.int64)
    if n == 1:
        return images
    # One vectorized call keeps the draw-per-position semantics cheap:
    # entry i is uniform on {i, ..., n-1}.
    targets = rng.gen.integers(np.arange(n - 1), n)
    for i in range(n - 1):
        j = targets[i]
        images[i], images[j] = images[j], images[i]
    return images


def partition_groups(d: int, n: int, omega: np.ndarray) -> list[np.ndarray]:
    """Split {1..d} into ceil(d/n) groups of size n via the permutation omega.

    Dimension i joins group ceil(omega(i)/n), so every group has exactly
    n members except the last one, which takes the remainder.  Groups
    come back as sorted 1-based index arrays.
    """
    if not 1 <= n <= d:
        raise ValueError(f"need 1 <= n <= d, got n={n}, d={d}")
    omega = np.asarray(omega, dtype=np.int64)
    if omega.shape != (d,) or not np.array_equal(np.sort(omega), np.arange(1, d + 1)):
        raise ValueError("omega must be a permutation of {1..d} in image form")
    labels = (omega + n - 1) // n
    num_groups = -(-d // n)
    return [np.flatnonzero(labels == k) + 1 for k in range(1, num_groups + 1)]


@dataclass
class DependentPartition:
    """Random blocks plus signs over one index set.

    ``indices`` is sorted ascending; ``labels`` and ``signs`` align with
    it positionally.  Labels run 1..num_blocks, and every label class
    has exactly ``block_size`` members except possibly the last one.
    The blocks all come from a single permutation, so class sizes are
    worst-case bounded (unlike independent per-index label draws).
    """

    indices: np.ndarray
    block_size: int
    labels: np.ndarray
    signs: np.ndarray

    @property
    def num_blocks(self) -> int:
        return -(-len(self.indices) // self.block_size)


def dependent_partition(members, divisor: int, rng: RngStream) -> DependentPartition:
    """Cut an index set into blocks of size ceil(|S|/divisor), with fresh signs.

    Draw order is fixed: the permutation defining the blocks first, then
    one uniform sign per index.
    """
    if divisor < 2:
        raise ValueError(f"need divisor >= 2, got {divisor}")
    indices = np.sort(np.asarray(members, dtype=np.int64).ravel())
    if indices.size == 0:
        raise ValueError("empty index set")
    if indices[0] < 1 or (indices.size > 1 and np.any(np.diff(indices) == 0)):
        raise ValueError("index set must hold distinct indices >= 1")
    size = int(indices.size)
    block_size = -(-size // divisor)
    ranks = random_permutation(size, rng)
    labels = (ranks + block_size - 1) // block_size
    signs = 2 * rng.gen.integers(0, 2, size=size).astype(np.int64) - 1
    return DependentPartition(indices, block_size, labels, signs)
