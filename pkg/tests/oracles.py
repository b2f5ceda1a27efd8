"""Independent reference computations used to check the package.

Nothing here imports photon_sight: each oracle takes a different route
(exact rational sums, brute-force enumeration, explicit state vectors).
"""

from fractions import Fraction
import itertools
import math

import numpy as np


def binom_tail_exact(k, n, p, tail):
    """Exact binomial tail by rational pmf summation."""
    p = Fraction(p).limit_denominator(10**12)
    pmf = [math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(n + 1)]
    if tail == "greater":
        return float(sum(pmf[k:]))
    if tail == "less":
        return float(sum(pmf[: k + 1]))
    obs = pmf[k]
    # two-sided: same 1e-7 relative slack convention as the exact tests
    return float(min(1, sum(q for q in pmf if q <= obs * Fraction(10**7 + 1, 10**7))))


def fisher_enumeration(k1, n1, k2, n2):
    K, N = k1 + k2, n1 + n2
    total = math.comb(N, n1)

    def pmf(x):
        return Fraction(math.comb(K, x) * math.comb(N - K, n1 - x), total)

    obs = pmf(k1)
    support = range(max(0, K - n2), min(K, n1) + 1)
    return float(sum(pmf(x) for x in support if pmf(x) <= obs))


def poisson_tail_sum(n, lam):
    """P(Poisson(lam) >= n) by direct CDF summation."""
    return 1.0 - sum(math.exp(-lam) * lam**k / math.factorial(k) for k in range(n))


def _log_binom_pmf(k, n, p):
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))


def _log_sf(k, n, p):
    """log P(X >= k), summed in log space."""
    if k <= 0:
        return 0.0
    if k > n:
        return -math.inf
    terms = [_log_binom_pmf(j, n, p) for j in range(k, n + 1)]
    m = max(terms)
    return m + math.log(sum(math.exp(t - m) for t in terms))


def exact_power_oracle(n, p0, p1, alpha):
    """Power of the exact one-sided test, critical value found by scanning k."""
    k = n + 1
    for cand in range(n + 1):
        if math.exp(_log_sf(cand, n, p0)) <= alpha:
            k = cand
            break
    return math.exp(_log_sf(k, n, p1)) if k <= n else 0.0


def required_trials_oracle(p0, p1, alpha, power, n_max=100_000):
    for n in range(1, n_max):
        if exact_power_oracle(n, p0, p1, alpha) >= power:
            return n
    raise AssertionError("not found")


def jones(angle_deg):
    t = math.radians(angle_deg)
    return np.array([math.cos(t), math.sin(t)])


def coincidence_by_contraction(psi, theta_a, theta_b):
    """|<theta_a, theta_b | psi>|^2 for a two-photon state vector."""
    amp = np.kron(jones(theta_a), jones(theta_b)).conj() @ psi
    return float(abs(amp) ** 2)


def bell_vector():
    return np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0)


def local_deterministic_strategies():
    """All 16 assignments (A passes at a, A passes at a', B passes at b, B passes at b')."""
    return list(itertools.product((0, 1), repeat=4))


def ch_terms_of_strategy(strategy):
    a, ap, b, bp = strategy
    return {
        "c_ab": a * b,
        "c_apb": ap * b,
        "c_apbp": ap * bp,
        "c_abp": a * bp,
        "s1_ap": ap,
        "s2_b": b,
    }
