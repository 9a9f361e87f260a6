"""Small shared numeric helpers."""

import numpy as np


def round_half_even(x):
    """Round a real to the nearest integer, ties to even (banker's rounding)."""
    return int(np.rint(x))


def largest_remainder_quotas(m, counts):
    """Apportion ``m`` items across groups proportionally to ``counts``.

    Uses the largest-remainder method: every group gets the floor of its
    exact share, then the leftover items go to the groups with the largest
    fractional remainders (ties broken by lower group id). Quotas sum to
    exactly ``m`` and never exceed the group counts when ``m <= sum(counts)``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if m < 0 or m > total:
        raise ValueError(f"cannot apportion {m} items across {total}")
    shares = m * counts / total
    quotas = np.floor(shares).astype(np.int64)
    remainder = m - int(quotas.sum())
    if remainder > 0:
        frac = shares - quotas
        order = np.lexsort((np.arange(len(counts)), -frac))
        quotas[order[:remainder]] += 1
    return quotas
