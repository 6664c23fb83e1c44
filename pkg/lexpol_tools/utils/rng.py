"""Named random streams.

Every consumer of randomness in a run draws from its own generator, derived
from ``(seed, stream name)``.  Draws from one stream never shift another, so
components that are absent in one agent mode leave the others untouched.
"""

import zlib
from typing import Dict

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


class RandomStreams:
    """Lazily created generators keyed by stream name, with state export."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = stream(self.seed, name)
        return self._streams[name]

    def get_state(self) -> Dict[str, dict]:
        return {
            name: gen.bit_generator.state for name, gen in self._streams.items()
        }

    def set_state(self, state: Dict[str, dict]) -> None:
        for name, bg_state in state.items():
            self[name].bit_generator.state = bg_state
