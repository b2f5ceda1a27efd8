"""Trial-count planning for exact one-sided binomial tests."""

import numpy as np
from scipy import stats

from .._validation import check_probability

_CHUNK = 4096


def critical_successes(n, p0, alpha):
    """Smallest ``k`` with ``P(X >= k | n, p0) <= alpha`` (vectorized over ``n``)."""
    n = np.asarray(n, dtype=np.int64)
    k = stats.binom.ppf(1.0 - alpha, n, p0).astype(np.int64) + 1
    # ppf works on the cdf scale; settle the boundary on the exact tail
    for _ in range(8):
        high = stats.binom.sf(k - 1, n, p0) > alpha
        low = (k > 0) & (stats.binom.sf(k - 2, n, p0) <= alpha)
        if not (high.any() or low.any()):
            break
        k = k + high - low
    return k


def exact_power(n, p0, p1, alpha):
    """Rejection probability of the exact test when the true rate is ``p1``."""
    k = critical_successes(n, p0, alpha)
    return stats.binom.sf(k - 1, n, p1)


def required_trials(p0, p1, alpha=0.05, power=0.9, max_trials=10**8):
    """Smallest number of trials whose exact one-sided test against ``p0``
    reaches ``power`` when the true success rate is ``p1``.

    Exact power is saw-toothed in ``n``; this returns the first ``n`` that
    reaches the target, scanning upward.
    """
    p0 = check_probability(p0, "p0", open_low=True, open_high=True)
    p1 = check_probability(p1, "p1", open_low=True, open_high=True)
    alpha = check_probability(alpha, "alpha", open_low=True, open_high=True)
    power = check_probability(power, "power", open_low=True, open_high=True)
    if not p0 < p1:
        raise ValueError(f"need p0 < p1, got p0={p0}, p1={p1}")
    start = 1
    while start <= max_trials:
        n = np.arange(start, min(start + _CHUNK, max_trials + 1))
        hit = np.flatnonzero(exact_power(n, p0, p1, alpha) >= power)
        if hit.size:
            return int(n[hit[0]])
        start += _CHUNK
    raise ValueError(f"power {power} not reached within {max_trials} trials")
