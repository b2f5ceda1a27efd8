"""Maximum-likelihood fit of the Poisson threshold (Hecht) model.

The probability of reporting a flash of mean photon number ``I`` as seen is
``P(K >= n)`` with ``K ~ Poisson(alpha * I)``. The threshold ``n`` is an
integer and is profiled over a grid; for each ``n`` the log-likelihood is
concave in ``alpha`` (the Poisson tail is a gamma CDF in ``alpha * I``), so a
golden-section search followed by bisection on the score finds the optimum.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np
from scipy import optimize, special, stats
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .._validation import check_count

ALPHA_FLOOR = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CHI2_95 = stats.chi2.ppf(0.95, 1)


class UnidentifiableError(ValueError):
    pass


class FoSPoint(NamedTuple):
    """One frequency-of-seeing data point."""

    mean_photons: float
    trials: int
    seen: int


@dataclass(frozen=True)
class PsychometricFit:
    n_hat: int
    alpha_hat: float
    log_likelihood: float
    alpha_ci: tuple
    n_profile: list

    def predict(self, mean_photons):
        lam = self.alpha_hat * np.asarray(mean_photons, dtype=float)
        return stats.poisson.sf(self.n_hat - 1, lam)

    def to_dict(self):
        return {
            "n_hat": self.n_hat,
            "alpha_hat": self.alpha_hat,
            "log_likelihood": self.log_likelihood,
            "alpha_ci": list(self.alpha_ci),
            "n_profile": [[n, ll] for n, ll in self.n_profile],
        }


class _Data:
    def __init__(self, points):
        arr = np.asarray([tuple(p) for p in points], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("points must be a sequence of (mean_photons, trials, seen)")
        self.intensity, self.trials, self.seen = arr.T
        self.miss = self.trials - self.seen
        self.const = float(np.sum(
            special.gammaln(self.trials + 1)
            - special.gammaln(self.seen + 1)
            - special.gammaln(self.miss + 1)
        ))

    def loglik(self, n, alpha):
        lam = alpha * self.intensity
        log_p = stats.poisson.logsf(n - 1, lam)
        log_q = stats.poisson.logcdf(n - 1, lam)
        ll = np.where(self.seen > 0, self.seen * log_p, 0.0)
        ll = ll + np.where(self.miss > 0, self.miss * log_q, 0.0)
        return float(ll.sum()) + self.const

    def score(self, n, alpha):
        """d loglik / d alpha."""
        lam = alpha * self.intensity
        log_pmf = stats.poisson.logpmf(n - 1, lam)
        log_p = stats.poisson.logsf(n - 1, lam)
        log_q = stats.poisson.logcdf(n - 1, lam)
        with np.errstate(invalid="ignore", over="ignore"):
            up = np.where(self.seen > 0, self.seen * np.exp(log_pmf - log_p), 0.0)
            down = np.where(self.miss > 0, self.miss * np.exp(log_pmf - log_q), 0.0)
        return float(np.sum(self.intensity * (up - down)))


def _golden_max(f, lo, hi, width):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return a, b


def _best_alpha(data, n, tol):
    """Maximize the log-likelihood over alpha in (0, 1] for a fixed threshold."""
    if data.score(n, 1.0) >= 0:
        return 1.0
    a, b = _golden_max(lambda x: data.loglik(n, x), ALPHA_FLOOR, 1.0, 1e-6)
    # widen until the score changes sign, then bisect on it
    lo, hi = max(ALPHA_FLOOR, a - 1e-6), min(1.0, b + 1e-6)
    while data.score(n, lo) < 0 and lo > ALPHA_FLOOR:
        lo = max(ALPHA_FLOOR, lo - 10 * (hi - lo))
    while data.score(n, hi) > 0 and hi < 1.0:
        hi = min(1.0, hi + 10 * (hi - lo))
    if data.score(n, lo) < 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if data.score(n, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _profile_ci(data, n, alpha_hat, ll_max):
    cut = ll_max - _CHI2_95 / 2.0

    def g(x):
        return data.loglik(n, x) - cut

    lo = ALPHA_FLOOR if g(ALPHA_FLOOR) >= 0 else optimize.brentq(g, ALPHA_FLOOR, alpha_hat, xtol=1e-12)
    hi = 1.0 if alpha_hat >= 1.0 or g(1.0) >= 0 else optimize.brentq(g, alpha_hat, 1.0, xtol=1e-12)
    return (float(lo), float(hi))


def _validate_points(points):
    points = [FoSPoint(float(m), check_count(t, "trials", minimum=1), check_count(s, "seen"))
              for m, t, s in points]
    if len({p.mean_photons for p in points}) < 3:
        raise ValueError("fit_hecht needs at least 3 points with distinct intensities")
    for p in points:
        if p.mean_photons < 0:
            raise ValueError(f"mean_photons must be >= 0, got {p.mean_photons}")
        if p.seen > p.trials:
            raise ValueError(f"seen ({p.seen}) exceeds trials ({p.trials})")
    if all(p.seen == p.trials for p in points):
        raise UnidentifiableError(
            "unidentifiable: every flash was seen at every intensity; the likelihood "
            "keeps increasing toward the alpha=1, n=1 boundary"
        )
    if all(p.seen == 0 for p in points):
        raise UnidentifiableError(
            "unidentifiable: no flash was seen at any intensity; the likelihood "
            "keeps increasing toward the alpha=0 boundary"
        )
    return points


def fit_hecht(points, n_range=(1, 20), alpha_tol=1e-8):
    """Fit ``(n, alpha)`` to ``(mean_photons, trials, seen)`` points."""
    points = _validate_points(points)
    n_lo, n_hi = n_range
    check_count(n_lo, "n_range[0]", minimum=1)
    check_count(n_hi, "n_range[1]", minimum=n_lo)
    data = _Data(points)
    best = None
    profile = []
    for n in range(n_lo, n_hi + 1):
        alpha = _best_alpha(data, n, alpha_tol)
        ll = data.loglik(n, alpha)
        profile.append((n, ll))
        if best is None or ll > best[2]:
            best = (n, alpha, ll)
    n_hat, alpha_hat, ll_max = best
    return PsychometricFit(
        n_hat=n_hat,
        alpha_hat=float(alpha_hat),
        log_likelihood=ll_max,
        alpha_ci=_profile_ci(data, n_hat, alpha_hat, ll_max),
        n_profile=profile,
    )


def hecht_log_likelihood(points, n, alpha):
    """Binomial log-likelihood of ``points`` at fixed ``(n, alpha)``."""
    return _Data(points).loglik(n, alpha)


class HechtEstimator(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`fit_hecht`.

    ``X`` holds one column of flash mean photon numbers and ``y`` the binary
    seen/not-seen responses; ``sample_weight`` can carry trial counts so
    aggregated data fits without expansion.

    Parameters
    ----------
    n_min, n_max : int
        Threshold grid searched by the profile likelihood.
    alpha_tol : float
        Bisection tolerance on the efficiency.
    """

    def __init__(self, n_min=1, n_max=20, alpha_tol=1e-8):
        self.n_min = n_min
        self.n_max = n_max
        self.alpha_tol = alpha_tol

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 1:
            raise ValueError(f"X must have exactly one column (mean photons), got {X.shape[1]}")
        y = np.asarray(y)
        check_consistent_length(X, y)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("y must contain only 0 (not seen) and 1 (seen)")
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        check_consistent_length(y, w)
        if np.any(w < 0) or np.any(w != np.round(w)):
            raise ValueError("sample_weight must hold non-negative integer trial counts")
        intensity = X[:, 0]
        levels, inverse = np.unique(intensity, return_inverse=True)
        trials = np.bincount(inverse, weights=w).astype(int)
        seen = np.bincount(inverse, weights=w * y).astype(int)
        points = [FoSPoint(float(m), int(t), int(s))
                  for m, t, s in zip(levels, trials, seen) if t > 0]
        fit = fit_hecht(points, (self.n_min, self.n_max), self.alpha_tol)
        self.classes_ = np.array([0, 1])
        self.n_ = fit.n_hat
        self.alpha_ = fit.alpha_hat
        self.log_likelihood_ = fit.log_likelihood
        self.alpha_ci_ = fit.alpha_ci
        self.n_profile_ = fit.n_profile
        self.fit_ = fit
        return self

    def fit_points(self, points):
        points = list(points)
        X = np.array([[p[0]] for p in points] * 2, dtype=float)
        y = np.repeat([1, 0], len(points))
        w = np.array([p[2] for p in points] + [p[1] - p[2] for p in points], dtype=float)
        return self.fit(X, y, sample_weight=w)

    def predict_proba(self, X):
        check_is_fitted(self)
        X = check_array(X)
        p = self.fit_.predict(X[:, 0])
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
