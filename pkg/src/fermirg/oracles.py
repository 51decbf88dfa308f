"""Slow reference values used by the verification runner.

These deliberately avoid the Pfaffian routines of :mod:`fermirg.grassmann`.
"""

from __future__ import annotations

import numpy as np


def pairing_sum(C, idx) -> complex:
    """Sum over perfect matchings of ``idx`` (in order) of signed products of ``C`` entries."""
    idx = list(idx)
    if not idx:
        return 1.0
    if len(idx) % 2:
        return 0.0
    first, rest = idx[0], idx[1:]
    total = 0.0
    for k, other in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        # moving ``other`` next to ``first`` passes k generators
        total += (-1) ** k * C[first, other] * pairing_sum(C, remaining)
    return total


def berezin_moment(C, mask: int) -> complex:
    """``int prod_{i in mask, increasing} psi_i dmu_C`` by direct expansion over pairings."""
    C = np.asarray(C)
    idx = [i for i in range(C.shape[0]) if (mask >> i) & 1]
    return complex(pairing_sum(C, idx))
