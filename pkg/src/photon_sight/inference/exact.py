"""Exact tests and interval estimates for counted outcomes."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .._validation import check_count, check_probability
from ..rng import as_generator

_TAILS = {"greater": "greater", "less": "less", "two": "two-sided", "two-sided": "two-sided"}

# relative slack when comparing pmf values in two-sided exact tests
_PMF_RTOL = 1e-7


@dataclass(frozen=True)
class BinomialTestResult:
    successes: int
    trials: int
    null_p: float
    tail: str
    p_value: float
    wilson_interval: tuple

    @property
    def estimate(self):
        return self.successes / self.trials

    def to_dict(self):
        return {
            "successes": self.successes,
            "trials": self.trials,
            "null_p": self.null_p,
            "tail": self.tail,
            "p_value": self.p_value,
            "estimate": self.estimate,
            "wilson_interval": list(self.wilson_interval),
        }


def wilson_interval(successes, trials, level=0.95):
    """Wilson score interval; vectorizes over ``successes`` and ``trials``."""
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    z = stats.norm.ppf(0.5 + level / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    # the bounds at k = 0 and k = n are exactly 0 and 1; avoid rounding residue
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def exact_binomial_test(successes, trials, null_p, tail="greater", level=0.95):
    """Exact binomial test of ``successes`` out of ``trials`` against ``null_p``.

    ``tail`` is ``"greater"``, ``"less"`` or ``"two"``; the two-sided p-value
    sums every outcome no more likely than the observed one.
    """
    trials = check_count(trials, "trials", minimum=1)
    successes = check_count(successes, "successes")
    if successes > trials:
        raise ValueError(f"successes ({successes}) exceed trials ({trials})")
    null_p = check_probability(null_p, "null_p")
    try:
        alternative = _TAILS[tail]
    except KeyError:
        raise ValueError(f"tail must be one of {sorted(_TAILS)}, got {tail!r}") from None
    p = stats.binomtest(successes, trials, null_p, alternative=alternative).pvalue
    return BinomialTestResult(
        successes=successes,
        trials=trials,
        null_p=null_p,
        tail=alternative,
        p_value=float(min(1.0, max(0.0, p))),
        wilson_interval=wilson_interval(successes, trials, level),
    )


def two_proportion_test(k1, n1, k2, n2):
    """Two-sided Fisher exact test that two binomial proportions are equal.

    Sums the hypergeometric probabilities of every table, with the observed
    margins, that is no more likely than the observed table.
    """
    n1 = check_count(n1, "n1")
    n2 = check_count(n2, "n2")
    k1 = check_count(k1, "k1")
    k2 = check_count(k2, "k2")
    if k1 > n1 or k2 > n2:
        raise ValueError("successes exceed trials")
    total = n1 + n2
    successes = k1 + k2
    if n1 == 0 or n2 == 0 or successes == 0 or successes == total:
        return 1.0
    lo = max(0, successes - n2)
    hi = min(successes, n1)
    support = np.arange(lo, hi + 1)
    logpmf = stats.hypergeom.logpmf(support, total, successes, n1)
    obs = stats.hypergeom.logpmf(k1, total, successes, n1)
    mask = logpmf <= obs + np.log1p(_PMF_RTOL)
    p = np.exp(logpmf[mask]).sum()
    return float(min(1.0, p))


def mcnemar_exact(b, c):
    """One-sided exact McNemar test that discordant count ``b`` exceeds ``c``."""
    b = check_count(b, "b")
    c = check_count(c, "c")
    if b + c == 0:
        return 1.0
    return float(stats.binom.sf(b - 1, b + c, 0.5))


def bootstrap_ci(data, statistic=np.mean, resamples=1000, level=0.95, rng=None):
    """Percentile bootstrap interval for ``statistic(data)``."""
    data = np.asarray(data)
    if data.size == 0:
        raise ValueError("bootstrap_ci needs at least one observation")
    resamples = check_count(resamples, "resamples", minimum=100)
    check_probability(level, "level", open_low=True, open_high=True)
    rng = as_generator(rng)
    n = data.shape[0]
    values = np.empty(resamples)
    for i in range(resamples):
        values[i] = statistic(data[rng.integers(0, n, n)])
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return float(lo), float(hi)


def ch_violation_test(result, threshold, alpha=0.05):
    """One-sided exact test that the observer-detection rate exceeds ``threshold``.

    Returns ``(p_value, violated)``.
    """
    check_probability(threshold, "threshold", open_low=True, open_high=True)
    check_probability(alpha, "alpha", open_low=True, open_high=True)
    if result.heralded_trials <= 0:
        raise ValueError("CH violation test needs at least one heralded trial")
    test = exact_binomial_test(result.entangled_side_seen, result.heralded_trials,
                               threshold, "greater")
    return test.p_value, test.p_value < alpha
