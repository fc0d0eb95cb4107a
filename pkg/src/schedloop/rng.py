"""Portable 64-bit PRNG: splitmix64 seeding a xoshiro256++ stream.

Every draw used by the workload generator goes through this class so that a
trace is fully determined by (params, seed) on any platform.
"""

import math

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """Return (new_state, output) for one splitmix64 step."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        s = seed
        words = []
        for _ in range(4):
            s, out = splitmix64(s)
            words.append(out)
        self.s = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] as lo + floor(u * (hi - lo + 1))."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def exponential_ticks(self, rate: float) -> int:
        """Inverse-CDF exponential gap, rounded up, at least 1 tick."""
        u = self.uniform()
        return max(1, math.ceil(-math.log1p(-u) / rate))

    def lognormal(self, mu: float, sigma: float) -> float:
        """Box-Muller on two consecutive uniforms (cosine branch only)."""
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return math.exp(mu + sigma * z)
