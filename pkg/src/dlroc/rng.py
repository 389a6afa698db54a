"""Counter-based seeded generator.

Every random draw in the package goes through :class:`SeededGenerator`, so
results are reproducible from the seed alone and can be regenerated in any
language that has 64-bit unsigned arithmetic. The generator is defined by
algorithm, not by a library:

``mix64(z)``
    SplitMix64 finaliser::

        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        z = z ^ (z >> 31)

    all arithmetic modulo 2**64.

key derivation
    ``key = seed mod 2**64``; for every element ``p`` of the stream path,
    ``key = mix64(mix64(key + G) ^ (p mod 2**64))`` with
    ``G = 0x9E3779B97F4A7C15``.

raw words
    the i-th word (i = 0, 1, ...) of a stream is ``mix64(key + G * (i + 1))``.

derived draws
    uniform: ``(word >> 11) * 2**-53`` in [0, 1).
    normal: Box-Muller on two consecutive uniforms ``u1, u2``,
    ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)`` (one normal per pair).
    sampling ``k`` of ``n`` without replacement: partial Fisher-Yates over
    ``0..n-1`` using ``k`` uniforms, ``j = i + floor(u_i * (n - i))``, swap
    positions ``i`` and ``j``; the first ``k`` positions are the sample.
"""

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z):
    """SplitMix64 finaliser on a Python int."""
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def derive_key(seed, *path):
    key = int(seed) & MASK
    for p in path:
        key = mix64(mix64(key + GOLDEN) ^ (int(p) & MASK))
    return key


def _mix64_array(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class SeededGenerator:
    """Stream of draws keyed by ``(seed, *path)``.

    Sub-streams for independent tasks are obtained with :meth:`spawn`,
    which never advances the parent stream.
    """

    def __init__(self, seed, *path):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self.key = derive_key(self.seed, *self.path)
        self.counter = 0

    def spawn(self, *path):
        return SeededGenerator(self.seed, *self.path, *path)

    def words(self, n):
        n = int(n)
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.key) + np.uint64(GOLDEN) * idx
        return _mix64_array(z)

    def uniform(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = (self.words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = self.uniform(2 * n)
        u1, u2 = u[0::2], u[1::2]
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def integers(self, high, size=None):
        """Integers uniform on ``0..high-1`` as ``floor(u * high)``."""
        u = self.uniform(1 if size is None else size)
        out = np.minimum(np.floor(u * high).astype(np.int64), high - 1)
        if size is None:
            return int(out[0])
        return out

    def sample_without_replacement(self, n, k):
        n, k = int(n), int(k)
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} items from {n}")
        perm = np.arange(n, dtype=np.int64)
        u = self.uniform(k) if k else np.empty(0)
        for i in range(k):
            j = i + min(int(u[i] * (n - i)), n - i - 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()

    def permutation(self, n):
        return self.sample_without_replacement(n, n)
