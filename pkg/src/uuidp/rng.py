"""Deterministic 64-bit PRNG and seed derivation.

The generator is SplitMix64 (Steele, Lea & Flood 2014): the state advances by
the golden-ratio increment ``0x9E3779B97F4A7C15`` and each output is the
state passed through the ``fmix``-style finalizer below.  The algorithm is
fixed here so that every emitted ID sequence is bit-exact across platforms
and Python versions.

Bounded integers use bitmask rejection: draw ``ceil(log2(n))`` high bits,
reject values ``>= n``.  ``below(1)`` returns 0 without consuming output.

Seed derivation::

    mix64(seed, index) = fmix(fmix(seed ^ 0xD1B54A32D192ED03) + (index + 1) * GOLDEN)

Trial ``t`` of an experiment uses ``mix64(master_seed, t)``; instance ``j``
within a game uses ``mix64(trial_seed, j)``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_SEED_SALT = 0xD1B54A32D192ED03


def fmix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(seed: int, index: int) -> int:
    """Derive the child seed of stream ``index`` from ``seed``."""
    return fmix(fmix(seed ^ _SEED_SALT) + ((index + 1) * GOLDEN & MASK64))


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return fmix(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 1:
            if n == 1:
                return 0
            raise ValueError("below() needs n >= 1")
        bits = (n - 1).bit_length()
        if bits > 64:
            # Concatenate words; only reachable for universes beyond 2**64.
            while True:
                r, got = 0, 0
                while got < bits:
                    r = (r << 64) | self.next_u64()
                    got += 64
                r >>= got - bits
                if r < n:
                    return r
        shift = 64 - bits
        while True:
            r = self.next_u64() >> shift
            if r < n:
                return r

    def random(self) -> float:
        """Uniform float in ``[0, 1)`` with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
