"""Prime tables."""

from functools import lru_cache
import math

import numpy as np


@lru_cache(maxsize=8)
def _primes_cached(n):
    if n < 2:
        return np.empty(0, dtype=np.int64)
    sieve = np.ones(n // 2 + 1, dtype=bool)  # index i <-> odd 2i+1
    sieve[0] = False
    for i in range(1, (math.isqrt(n) - 1) // 2 + 1):
        if sieve[i]:
            p = 2 * i + 1
            sieve[p * p // 2::p] = False
    odd = 2 * np.flatnonzero(sieve[: (n - 1) // 2 + 1]) + 1
    out = np.concatenate(([2], odd)).astype(np.int64)
    out.setflags(write=False)
    return out


def primes_up_to(n):
    """Sorted read-only int64 array of the primes p <= n."""
    return _primes_cached(int(n))


def primes_between(lo, hi):
    """Primes in ``(lo, hi]``."""
    ps = primes_up_to(hi)
    return ps[np.searchsorted(ps, lo, side="right"):]
