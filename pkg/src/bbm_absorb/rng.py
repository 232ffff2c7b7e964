"""Counter-based random streams (Philox4x32-10), vectorized over numpy arrays.

Every draw is a pure function of ``(key, counter)``.  The simulator keys a
stream by the replica seed and builds counters out of a particle's
genealogical key, a per-particle event counter and a purpose tag, so the
numbers a particle sees do not depend on how many other particles exist or
in which order they are processed.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# 2**-53, for mapping 53 random bits onto (0, 1)
_TWO_M53 = 1.0 / 9007199254740992.0


def philox4x32(c0, c1, c2, c3, k0: int, k1: int, rounds: int = 10):
    """Philox4x32 block function.

    Counter words are arrays (or scalars) of 32-bit values held in uint64;
    the key is a pair of python ints.  Returns four uint64 arrays holding
    32-bit output words.
    """
    c0 = np.asarray(c0, dtype=np.uint64) & _MASK32
    c1 = np.asarray(c1, dtype=np.uint64) & _MASK32
    c2 = np.asarray(c2, dtype=np.uint64) & _MASK32
    c3 = np.asarray(c3, dtype=np.uint64) & _MASK32
    k0 &= 0xFFFFFFFF
    k1 &= 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint64(k0),
            lo1,
            hi0 ^ c3 ^ np.uint64(k1),
            lo0,
        )
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def split64(x):
    x = np.asarray(x, dtype=np.uint64)
    return x & _MASK32, x >> _SHIFT32


class CounterStream:
    """Keyed counter-based generator.

    ``CounterStream(seed)`` gives a stateless source: each method takes a
    64-bit ``subject`` array (e.g. particle keys), an integer ``counter``
    array and a small integer ``tag`` and returns one value per element.
    """

    def __init__(self, seed: int):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.seed = seed
        self._k0 = seed & 0xFFFFFFFF
        self._k1 = seed >> 32

    def bits(self, subject, counter, tag: int):
        lo, hi = split64(subject)
        ctr = np.asarray(counter, dtype=np.uint64)
        # high counter bits are folded into the tag word so counters up to 2**48 stay distinct
        word3 = (np.uint64(tag & 0xFFFF) << np.uint64(16)) ^ (ctr >> _SHIFT32)
        return philox4x32(lo, hi, ctr, word3, self._k0, self._k1)

    def uniform_pair(self, subject, counter, tag: int):
        """Two independent uniforms in the open interval (0, 1)."""
        r0, r1, r2, r3 = self.bits(subject, counter, tag)
        a = ((r0 << _SHIFT32) | r1) >> np.uint64(11)
        b = ((r2 << _SHIFT32) | r3) >> np.uint64(11)
        u = (a.astype(np.float64) + 0.5) * _TWO_M53
        v = (b.astype(np.float64) + 0.5) * _TWO_M53
        return u, v

    def uniform(self, subject, counter, tag: int):
        return self.uniform_pair(subject, counter, tag)[0]

    def normal(self, subject, counter, tag: int):
        """Standard normal draws by Box-Muller (one per counter)."""
        u, v = self.uniform_pair(subject, counter, tag)
        return np.sqrt(-2.0 * np.log(u)) * np.cos(2.0 * np.pi * v)

    def exponential(self, subject, counter, tag: int):
        return -np.log(self.uniform(subject, counter, tag))

    def key64(self, subject, counter, tag: int):
        """A fresh 64-bit key derived from ``subject``; used for child particles."""
        r0, r1, _, _ = self.bits(subject, counter, tag)
        return (r0 << _SHIFT32) | r1
