"""Counter-based random streams keyed by (seed, stream tag, trial index).

Each Monte Carlo trial owns a disjoint Philox counter range, so a trial's
draws depend only on ``(seed, tag, trial)``: splitting trials across workers
or evaluating them out of order reproduces the serial output bit for bit.
"""

import zlib

import numpy as np

__all__ = ["TrialStream", "complex_normal", "tag_id"]

_MASK64 = (1 << 64) - 1


def tag_id(tag):
    """Stable integer id for a stream tag (``int`` passes through)."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf-8"))


class TrialStream:
    """Factory for per-trial generators of one (seed, tag) stream.

    The Philox key is derived from ``(seed, tag)`` and trial ``t`` starts at
    counter ``[0, 0, t, 0]``; one trial would need more than 2**128 blocks to
    reach the next trial's range.

    The returned generator is reused between calls; it is only valid until
    the next call to :meth:`generator`.
    """

    def __init__(self, seed, tag="default"):
        self.seed = int(seed) & _MASK64
        self.tag = tag
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(tag_id(tag),))
        self._key = ss.generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def generator(self, trial):
        trial = int(trial)
        if trial < 0:
            raise ValueError(f"trial index must be non-negative, got {trial}")
        st = self._state
        st["state"]["counter"] = np.array([0, 0, trial & _MASK64, trial >> 64], dtype=np.uint64)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bitgen.state = st
        return self._gen

    def __getstate__(self):
        return {"seed": self.seed, "tag": self.tag}

    def __setstate__(self, state):
        self.__init__(state["seed"], state["tag"])


def complex_normal(gen, shape):
    """Circular-symmetric complex Gaussians with ``E|g|^2 = 1``.

    Real and imaginary parts are independent ``N(0, 1/2)``; both come from a
    single ``standard_normal`` call so the draw order is fixed.
    """
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    x = gen.standard_normal(shape + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * np.sqrt(0.5)
