"""Seeded Bernoulli packet-dropout links."""
import zlib

import numpy as np

from .errors import ConfigError

STREAM_NAMES = ("sensor", "actuator", "identifier", "actor")


def substream(seed, name):
    """Independent generator for the named sub-stream of a master seed.

    The stream depends only on ``(seed, name)``, so drawing from one stream
    never shifts another, whatever the call interleaving.
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ConfigError("master seed must be a 64-bit unsigned integer", "seed")
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))


class DropoutChannel:
    """Pass/drop gate: 1 with probability ``p_pass``, else 0."""

    def __init__(self, p_pass, rng):
        p_pass = float(p_pass)
        if not 0.0 <= p_pass <= 1.0:
            raise ConfigError(f"pass probability {p_pass} outside [0, 1]", "p_pass")
        self.p_pass = p_pass
        self.rng = rng

    @classmethod
    def from_seed(cls, p_pass, seed, name):
        return cls(p_pass, substream(seed, name))

    def sample(self):
        # uniform draw in [0, 1): p=1 always passes, p=0 always drops
        return 1 if self.rng.random() < self.p_pass else 0

    def sample_many(self, n):
        """``n`` gates at once; same stream as ``n`` calls to ``sample``."""
        return (self.rng.random(int(n)) < self.p_pass).astype(np.int8)

    def apply(self, signal):
        gate = self.sample()
        signal = np.asarray(signal, dtype=float)
        return (signal.copy() if gate else np.zeros_like(signal)), gate
