"""Counter-based random streams.

Every random draw in the simulator is addressed by ``(seed, tag, index...)``
so results never depend on call order or on how work is split across
threads.  Two flavours are provided:

* :func:`stream` returns a full :class:`numpy.random.Generator` seeded from
  the key, for bulk draws during scene construction.
* :class:`KeyedStream` hashes integer counters straight to uniforms with a
  SplitMix64 finaliser, which is cheap enough to call per ray.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def tag_id(tag):
    """Stable 64-bit identifier for a purpose tag."""
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed, tag, *index):
    """Independent generator for ``(seed, tag, *index)``."""
    entropy = [int(seed) & _MASK64, tag_id(tag)] + [int(i) for i in index]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed, tag):
    """Child 64-bit seed, used to fan a master seed out to modules."""
    return int(stream(seed, tag).integers(0, 2**63, dtype=np.int64))


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class KeyedStream:
    """Stateless uniform source keyed by integer counters.

    ``uniform((frame, column, beam), draw)`` always returns the same values
    for the same key, whatever order or batch size it is evaluated with.
    """

    def __init__(self, seed, tag):
        self.seed = int(seed) & _MASK64
        self.tag = tag
        base = np.array([self.seed ^ tag_id(tag)], dtype=np.uint64)
        self._base = _mix(base)[0]

    def _hash(self, counters, draw):
        arrays = list(np.broadcast_arrays(*[np.asarray(c, dtype=np.int64) for c in counters]))
        h = np.full(arrays[0].shape, self._base, dtype=np.uint64)
        for c in arrays + [np.full(arrays[0].shape, draw, dtype=np.int64)]:
            h = _mix(h + c.astype(np.uint64) * _GOLDEN + _GOLDEN)
        return h

    def uniform(self, counters, draw=0):
        """Uniform floats in [0, 1) with 53 bits of resolution."""
        h = self._hash(counters, draw)
        return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def symmetric(self, counters, draw=0):
        """Uniform floats in [-1, 1)."""
        return 2.0 * self.uniform(counters, draw) - 1.0

