"""Deterministic chunked random streams for Monte Carlo.

A run of ``samples`` draws is cut into fixed-size chunks. Chunk ``i`` of
stream ``s`` gets its own Philox generator keyed by ``(seed, s, i)``, so
results depend only on ``(samples, seed, stream)`` and never on how many
workers evaluate the chunks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np

CHUNK_SIZE = 1 << 16
U64_MAX = (1 << 64) - 1

T = TypeVar("T")


@dataclass(frozen=True)
class McSpec:
    samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.samples, bool) or not isinstance(self.samples, int):
            raise TypeError("samples must be an int")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if not 0 <= int(self.seed) <= U64_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def fingerprint(self, stream: int = 0) -> str:
        return f"mc:philox:n={self.samples}:seed={self.seed}:stream={stream}:chunk={CHUNK_SIZE}"

    def to_dict(self) -> dict:
        return {"samples": self.samples, "seed": int(self.seed)}


def chunk_sizes(samples: int, chunk: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(samples, chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunk_generator(seed: int, stream: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def map_chunks(
    fn: Callable[[np.random.Generator, int], T],
    mc: McSpec,
    stream: int,
    workers: int = 1,
) -> list[T]:
    """Apply ``fn(rng, n)`` to every chunk; results come back in chunk order."""
    sizes = chunk_sizes(mc.samples)
    jobs = [(chunk_generator(mc.seed, stream, i), n) for i, n in enumerate(sizes)]
    if workers <= 1 or len(jobs) == 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def uniform_angles(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """``(k, n)`` array of angles uniform on [0, pi)."""
    return math.pi * rng.random((k, n))


def fsum_arrays(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise exactly-rounded sum of equally shaped arrays, in order."""
    stacked = np.stack([np.asarray(p, dtype=float) for p in parts])
    flat = stacked.reshape(len(parts), -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(stacked.shape[1:])


def iter_hidden_chunks(mc: McSpec, stream: int) -> Iterator[np.ndarray]:
    """Yield ``(3, n)`` arrays of (theta, gamma_x, gamma_y) chunk by chunk."""
    for i, n in enumerate(chunk_sizes(mc.samples)):
        yield uniform_angles(chunk_generator(mc.seed, stream, i), n, 3)
