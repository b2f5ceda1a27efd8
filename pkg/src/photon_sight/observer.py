"""Observer detection chain: ocular loss, rod absorption, dark events, and
the response rules (yes/no threshold, 0-6 rating ladder, forced choice).

Every sampling function accepts scalars or numpy arrays, so protocols can
run whole blocks of trials at once with the same code.
"""

from dataclasses import asdict, dataclass
import enum

import numpy as np
from scipy import stats

from ._validation import check_count, check_nonnegative, check_positive, check_probability
from .rng import as_generator

ROD_QUANTUM_EFFICIENCY = 0.33


class Side(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class EyeParams:
    """Detection chain parameters.

    ``left_gain`` / ``right_gain`` scale the pre-retinal transmission on each
    retinal spot; both default to 1 (symmetric geometry).
    """

    pre_retinal_transmission: float = 0.10
    rod_quantum_efficiency: float = ROD_QUANTUM_EFFICIENCY
    dark_event_rate: float = 0.0
    integration_window: float = 0.1
    threshold_n: int = 1
    guess_bias_right: float = 0.5
    left_gain: float = 1.0
    right_gain: float = 1.0

    def __post_init__(self):
        check_probability(self.pre_retinal_transmission, "eye.pre_retinal_transmission")
        check_probability(self.rod_quantum_efficiency, "eye.rod_quantum_efficiency")
        check_nonnegative(self.dark_event_rate, "eye.dark_event_rate")
        check_positive(self.integration_window, "eye.integration_window")
        check_count(self.threshold_n, "eye.threshold_n", minimum=1)
        check_probability(self.guess_bias_right, "eye.guess_bias_right")
        for side in ("left", "right"):
            gain = check_nonnegative(getattr(self, f"{side}_gain"), f"eye.{side}_gain")
            if gain * self.pre_retinal_transmission > 1.0:
                raise ValueError(f"eye.{side}_gain * eye.pre_retinal_transmission must be <= 1")

    @property
    def detection_efficiency(self):
        """Probability that one corneal photon is absorbed by a rod."""
        return self.pre_retinal_transmission * self.rod_quantum_efficiency

    @property
    def mean_dark_events(self):
        return self.dark_event_rate * self.integration_window

    def side_efficiency(self, side):
        gain = self.left_gain if Side(side) is Side.LEFT else self.right_gain
        return self.detection_efficiency * gain

    def to_dict(self):
        return asdict(self)


def absorb(photons_at_cornea, eye, rng, *, efficiency=None):
    """Draw ``(absorbed, dark)`` for the photons reaching one retinal spot.

    ``efficiency`` overrides ``eye.detection_efficiency`` (per-side gains or
    an externally fixed end-to-end probability).
    """
    rng = as_generator(rng)
    p = eye.detection_efficiency if efficiency is None else efficiency
    photons = np.asarray(photons_at_cornea)
    absorbed = rng.binomial(photons, p)
    dark = rng.poisson(eye.mean_dark_events, size=photons.shape)
    if np.ndim(absorbed) == 0:
        return int(absorbed), int(dark)
    return absorbed, dark


def see_flash(absorbed, dark, eye):
    seen = np.asarray(absorbed) + np.asarray(dark) >= eye.threshold_n
    return bool(seen) if seen.ndim == 0 else seen


def frequency_of_seeing(n, alpha, mean_photons):
    """P(K >= n) for K ~ Poisson(alpha * mean_photons)."""
    check_count(n, "n", minimum=1)
    check_probability(alpha, "alpha")
    lam = alpha * np.asarray(mean_photons, dtype=float)
    if np.any(lam < 0):
        raise ValueError("mean_photons must be >= 0")
    out = stats.poisson.sf(n - 1, lam)
    return float(out) if np.ndim(out) == 0 else out


def _choose(left_seen, right_seen, bias, u):
    left_seen = np.asarray(left_seen, dtype=bool)
    right_seen = np.asarray(right_seen, dtype=bool)
    guess_right = np.asarray(u) < bias
    return np.where(left_seen ^ right_seen, right_seen, guess_right)


def respond_2afc(left_seen, right_seen, eye, rng):
    """Forced left/right choice: a uniquely seen side wins, otherwise guess."""
    rng = as_generator(rng)
    u = rng.random(np.shape(left_seen))
    chose_right = _choose(left_seen, right_seen, eye.guess_bias_right, u)
    if chose_right.ndim == 0:
        return Side.RIGHT if chose_right else Side.LEFT
    return chose_right


def check_rating_criteria(criteria):
    criteria = tuple(int(c) for c in criteria)
    if len(criteria) != 6:
        raise ValueError(f"rating criteria must have 6 cutoffs, got {len(criteria)}")
    if any(b <= a for a, b in zip(criteria, criteria[1:])):
        raise ValueError(f"rating criteria must be strictly ascending, got {criteria}")
    return criteria


def respond_rating(absorbed, dark, criteria):
    """Rating 0-6: how many cutoffs the total event count reaches."""
    criteria = np.asarray(check_rating_criteria(criteria))
    total = np.asarray(absorbed) + np.asarray(dark)
    rating = np.searchsorted(criteria, total, side="right")
    return int(rating) if rating.ndim == 0 else rating
