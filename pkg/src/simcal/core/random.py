from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MAX_SEED = 2**64 - 1


def _stream_key(stream_id: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[index : index + 4], "little") for index in range(0, 16, 4))


@dataclass(frozen=True)
class RandomStream:
    """Named, reproducible source of randomness.

    A stream is a (seed, stream_id) pair. Every call to ``generator()`` returns a
    fresh counter-based generator positioned at the start of the same sequence, so
    the stream itself never carries mutable state and can be shared across threads.
    """

    seed: int
    stream_id: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError(f"Seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"Seed must fit in 64 unsigned bits, got {self.seed}")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=_stream_key(self.stream_id))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, label: str) -> "RandomStream":
        cleaned = label.strip("/")
        if not cleaned:
            raise ValueError("Child stream label must be non-empty.")
        stream_id = f"{self.stream_id}/{cleaned}" if self.stream_id else cleaned
        return RandomStream(seed=self.seed, stream_id=stream_id)
