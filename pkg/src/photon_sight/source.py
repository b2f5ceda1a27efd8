"""Pulse-level model of a heralded downconversion photon source.

Each pump pulse makes ``k ~ Poisson(mu)`` signal/idler pairs. The herald
fires if at least one idler is detected (each with the herald efficiency) or
a background count occurs. Signal photons survive the delay/gating chain with
one lumped transmission; unheralded photons leak through the gate with the
Pockels extinction probability.

The heralded g2(0) is measured on a virtual 50/50 split of the signal photons
leaving the crystal, read out by two ideal threshold counters. Binomial loss
leaves g2 unchanged, so tapping before the lossy chain gives the same
expectation with more coincidences per pulse.
"""

from dataclasses import asdict, dataclass, fields, replace
import logging
import math

import numpy as np
from scipy import optimize, stats

from ._validation import check_count, check_nonnegative, check_positive, check_probability
from .rng import PULSE_BLOCK, as_generator, as_seed_sequence, block_generator, map_blocks

logger = logging.getLogger(__name__)

PUBLISHED_G2 = 0.0023
PUBLISHED_HERALD_RATE = 52.0
PUBLISHED_HERALDING_EFFICIENCY = 0.385
PUBLISHED_REP_RATE = 80_000.0

MU_BRACKET = (0.0, 0.1)


class InsufficientCountsError(ValueError):
    """Raised when a ratio estimator would divide by zero."""


class StopConditionUnreachable(RuntimeError):
    def __init__(self, message, diagnostic):
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class SourceParams:
    rep_rate: float = PUBLISHED_REP_RATE
    mean_pairs_per_pulse: float = 0.0015
    herald_detection_efficiency: float = 0.44
    signal_path_transmission: float = PUBLISHED_HERALDING_EFFICIENCY
    background_prob_per_pulse: float = 0.0
    pockels_extinction: float = 0.0
    single_pair: bool = False

    def __post_init__(self):
        check_positive(self.rep_rate, "source.rep_rate")
        check_nonnegative(self.mean_pairs_per_pulse, "source.mean_pairs_per_pulse")
        for name in (
            "herald_detection_efficiency",
            "signal_path_transmission",
            "background_prob_per_pulse",
            "pockels_extinction",
        ):
            check_probability(getattr(self, name), f"source.{name}")
        if not isinstance(self.single_pair, (bool, np.bool_)):
            raise TypeError("source.single_pair must be a bool")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PulseOutcome:
    pair_count: int
    herald_fired: bool
    signal_photons_delivered: int


STATS_COLUMNS = (
    "pulses",
    "heralds",
    "delivered_given_herald",
    "triple_coincidences",
    "split_singles_1",
    "split_singles_2",
    "unheralded_deliveries",
    "signal_singles_1",
    "signal_singles_2",
    "signal_coincidences",
    "estimated_heralding_efficiency",
    "estimated_g2",
    "herald_rate",
)


@dataclass(frozen=True)
class SourceStats:
    """Counters from a source run.

    ``split_*`` and ``triple_coincidences`` are conditioned on a herald;
    ``signal_*`` count the same split over every pulse, herald ignored.
    """

    pulses: int
    heralds: int
    delivered_given_herald: int
    triple_coincidences: int
    split_singles_1: int
    split_singles_2: int
    unheralded_deliveries: int
    signal_singles_1: int
    signal_singles_2: int
    signal_coincidences: int
    rep_rate: float

    @property
    def estimated_heralding_efficiency(self):
        if self.heralds == 0:
            return float("nan")
        return self.delivered_given_herald / self.heralds

    @property
    def estimated_g2(self):
        try:
            return estimate_g2(self)
        except InsufficientCountsError:
            return float("nan")

    @property
    def herald_rate(self):
        return self.heralds / (self.pulses / self.rep_rate)

    def to_dict(self):
        """Flat mapping in :data:`STATS_COLUMNS` order."""
        return {name: getattr(self, name) for name in STATS_COLUMNS}

    def merge(self, other):
        if self.rep_rate != other.rep_rate:
            raise ValueError("cannot merge stats from different repetition rates")
        counts = {f.name: getattr(self, f.name) + getattr(other, f.name)
                  for f in fields(self) if f.name != "rep_rate"}
        return SourceStats(rep_rate=self.rep_rate, **counts)


def estimate_g2(stats):
    """Heralded g2(0) = triples * heralds / (singles_1 * singles_2)."""
    if stats.heralds <= 0 or stats.split_singles_1 <= 0 or stats.split_singles_2 <= 0:
        raise InsufficientCountsError(
            "insufficient counts for g2: need heralds, split_singles_1 and "
            f"split_singles_2 > 0 (got {stats.heralds}, {stats.split_singles_1}, "
            f"{stats.split_singles_2})"
        )
    return (stats.triple_coincidences * stats.heralds) / (
        stats.split_singles_1 * stats.split_singles_2
    )


def estimate_g2_unheralded(stats):
    """g2(0) of the raw signal arm, every pulse counted as a trigger."""
    if stats.pulses <= 0 or stats.signal_singles_1 <= 0 or stats.signal_singles_2 <= 0:
        raise InsufficientCountsError("insufficient counts for unheralded g2")
    return (stats.signal_coincidences * stats.pulses) / (
        stats.signal_singles_1 * stats.signal_singles_2
    )


# -- analytic model ----------------------------------------------------------

def _kmax(mu):
    k = 12
    while mu > 0 and stats.poisson.sf(k, mu) > 1e-17:
        k += 4
    return k


def _pair_pmf(params, kmax=None):
    mu = params.mean_pairs_per_pulse
    if params.single_pair:
        p0 = math.exp(-mu)
        return np.array([p0, 1.0 - p0])
    kmax = _kmax(mu) if kmax is None else kmax
    return stats.poisson.pmf(np.arange(kmax + 1), mu)


def _herald_given_k(params, k):
    miss = (1.0 - params.herald_detection_efficiency) ** k
    return 1.0 - (1.0 - params.background_prob_per_pulse) * miss


def herald_probability(params):
    """Probability that a single pulse produces a herald."""
    pk = _pair_pmf(params)
    k = np.arange(pk.size)
    return float(np.sum(pk * _herald_given_k(params, k)))


def heralded_pair_distribution(params):
    """``P(k pairs | herald)`` for ``k = 0 .. kmax``."""
    pk = _pair_pmf(params)
    w = pk * _herald_given_k(params, np.arange(pk.size))
    total = w.sum()
    if total <= 0:
        raise StopConditionUnreachable(
            "herald probability is zero", {"herald_probability": 0.0}
        )
    return w / total


def predicted_g2(params, kmax=None):
    """Heralded g2 of the pulse model by enumeration over the pair number."""
    pk = _pair_pmf(params, kmax)
    k = np.arange(pk.size)
    w = pk * _herald_given_k(params, k)
    half = 0.5 ** k
    single = 1.0 - half
    both = 1.0 - 2.0 * half + (k == 0)
    den = np.sum(w * single) ** 2
    if den == 0:
        return 0.0
    return float(np.sum(w * both) * np.sum(w) / den)


def predicted_heralding_efficiency(params):
    pk = heralded_pair_distribution(params)
    k = np.arange(pk.size)
    return float(np.sum(pk * (1.0 - (1.0 - params.signal_path_transmission) ** k)))


def calibrate_mu(target_g2, params=None, tol=1e-6):
    """Mean pairs per pulse at which :func:`predicted_g2` equals ``target_g2``.

    Bisection on ``mu`` in ``(0, 0.1]``; ``tol`` is absolute in g2.
    """
    target_g2 = check_probability(target_g2, "target_g2", open_low=True, open_high=True)
    params = SourceParams() if params is None else params

    def excess(mu):
        return predicted_g2(replace(params, mean_pairs_per_pulse=mu)) - target_g2

    lo, hi = 1e-12, MU_BRACKET[1]
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0 or f_hi < 0:
        raise ValueError(
            f"target g2 {target_g2} not reachable for mu in (0, {hi}]: "
            f"g2 spans [{f_lo + target_g2:.3g}, {f_hi + target_g2:.3g}]"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if abs(f_mid) < tol * 1e-3 or hi - lo < 1e-15:
            break
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    if abs(excess(mu)) >= tol:
        raise ValueError(f"bisection did not converge for target g2 {target_g2}")
    return mu


def calibrate_source(target_g2=PUBLISHED_G2, target_herald_rate=PUBLISHED_HERALD_RATE,
                     params=None, max_iter=100):
    """Jointly set ``mu`` and the herald efficiency to hit a g2 and herald rate.

    Alternates :func:`calibrate_mu` with a root solve of the herald
    probability for the herald detection efficiency.
    """
    params = SourceParams() if params is None else params
    target_p = target_herald_rate / params.rep_rate
    check_probability(target_p, "herald probability per pulse", open_low=True, open_high=True)
    mu = calibrate_mu(target_g2, params)
    for _ in range(max_iter):
        trial = replace(params, mean_pairs_per_pulse=mu)

        def gap(eta, trial=trial):
            return herald_probability(replace(trial, herald_detection_efficiency=eta)) - target_p

        if gap(1.0) < 0:
            raise ValueError(
                f"herald rate {target_herald_rate} Hz unreachable at mu={mu:.4g} "
                "even with unit herald efficiency"
            )
        eta = optimize.brentq(gap, 0.0, 1.0, xtol=1e-15) if gap(0.0) < 0 else 0.0
        params = replace(trial, herald_detection_efficiency=eta)
        new_mu = calibrate_mu(target_g2, params)
        if abs(new_mu - mu) < 1e-13:
            mu = new_mu
            break
        mu = new_mu
    else:
        logger.warning("calibrate_source stopped after %d iterations", max_iter)
    return replace(params, mean_pairs_per_pulse=mu)


def published_source_params(**overrides):
    """Source tuned to 38.5% heralding, 52 Hz heralds at 80 kHz and g2 = 0.0023."""
    base = replace(SourceParams(), **overrides)
    return calibrate_source(PUBLISHED_G2, PUBLISHED_HERALD_RATE, base)


# -- Monte Carlo -------------------------------------------------------------

def simulate_pulse(params, rng):
    rng = as_generator(rng)
    k = int(rng.poisson(params.mean_pairs_per_pulse))
    if params.single_pair:
        k = min(k, 1)
    background = rng.random() < params.background_prob_per_pulse
    idler = int(rng.binomial(k, params.herald_detection_efficiency))
    herald = bool(idler > 0 or background)
    delivered = int(rng.binomial(k, params.signal_path_transmission))
    if not herald:
        delivered = int(rng.binomial(delivered, params.pockels_extinction))
    return PulseOutcome(k, herald, delivered)


def _simulate_block(params, root, block, size):
    """Return per-pulse event arrays for pulses where anything happened."""
    rng = block_generator(root, "source", block)
    k = rng.poisson(params.mean_pairs_per_pulse, size)
    if params.single_pair:
        np.minimum(k, 1, out=k)
    if params.background_prob_per_pulse > 0:
        bg = rng.random(size) < params.background_prob_per_pulse
        idx = np.flatnonzero((k > 0) | bg)
        bg = bg[idx]
    else:
        idx = np.flatnonzero(k)
        bg = np.zeros(idx.size, dtype=bool)
    kk = k[idx]
    herald = (rng.binomial(kk, params.herald_detection_efficiency) > 0) | bg
    survived = rng.binomial(kk, params.signal_path_transmission)
    leaked = rng.binomial(survived, params.pockels_extinction)
    delivered = np.where(herald, survived, leaked)
    n1 = rng.binomial(kk, 0.5)
    n2 = kk - n1
    return {
        "index": idx.astype(np.int64),
        "herald": herald,
        "delivered": delivered,
        "d1": n1 > 0,
        "d2": n2 > 0,
    }


def _tally(events, pulses, rep_rate):
    h = events["herald"]
    d1, d2 = events["d1"], events["d2"]
    return SourceStats(
        pulses=int(pulses),
        heralds=int(h.sum()),
        delivered_given_herald=int((h & (events["delivered"] > 0)).sum()),
        triple_coincidences=int((h & d1 & d2).sum()),
        split_singles_1=int((h & d1).sum()),
        split_singles_2=int((h & d2).sum()),
        unheralded_deliveries=int((~h & (events["delivered"] > 0)).sum()),
        signal_singles_1=int(d1.sum()),
        signal_singles_2=int(d2.sum()),
        signal_coincidences=int((d1 & d2).sum()),
        rep_rate=float(rep_rate),
    )


def _empty_stats(rep_rate):
    return SourceStats(0, 0, 0, 0, 0, 0, 0, 0, 0, 0, float(rep_rate))


def run_source(params, stop, count, rng=None, *, max_pulses=10**9, n_jobs=1):
    """Simulate pulses until ``count`` pulses (``stop="pulses"``) or heralds
    (``stop="heralds"``) have accumulated.

    Pulses are processed in fixed blocks whose random streams depend only on
    the root seed and block index, so ``n_jobs`` never changes the result.
    """
    if stop not in ("pulses", "heralds"):
        raise ValueError(f"stop must be 'pulses' or 'heralds', got {stop!r}")
    count = check_count(count, "count", minimum=1)
    max_pulses = check_count(max_pulses, "max_pulses", minimum=1)
    root = as_seed_sequence(rng)

    def work(task):
        b, size = task
        return _simulate_block(params, root, b, size)

    if stop == "pulses":
        tasks = [(b, min(PULSE_BLOCK, count - s)) for b, s in enumerate(range(0, count, PULSE_BLOCK))]
        total = _empty_stats(params.rep_rate)
        batch = max(1, int(n_jobs or 1)) * 4
        for i in range(0, len(tasks), batch):
            for (b, size), ev in zip(tasks[i:i + batch], map_blocks(work, tasks[i:i + batch], n_jobs)):
                total = total.merge(_tally(ev, size, params.rep_rate))
        return total

    p_herald = herald_probability(params)
    if p_herald <= 0.0:
        raise StopConditionUnreachable(
            f"herald target {count} unreachable: herald probability per pulse is 0",
            {"pulses": 0, "heralds": 0, "target_heralds": count, "herald_probability": 0.0},
        )
    total = _empty_stats(params.rep_rate)
    start, block = 0, 0
    batch = max(1, int(n_jobs or 1))
    while start < max_pulses:
        tasks = []
        s = start
        for j in range(batch):
            if s >= max_pulses:
                break
            size = min(PULSE_BLOCK, max_pulses - s)
            tasks.append((block + j, size))
            s += size
        for (b, size), ev in zip(tasks, map_blocks(work, tasks, n_jobs)):
            need = count - total.heralds
            hidx = ev["index"][ev["herald"]]
            if hidx.size >= need:
                cut = int(hidx[need - 1])
                keep = ev["index"] <= cut
                ev = {key: val[keep] for key, val in ev.items()}
                return total.merge(_tally(ev, cut + 1, params.rep_rate))
            total = total.merge(_tally(ev, size, params.rep_rate))
            start += size
        block += len(tasks)
    raise StopConditionUnreachable(
        f"herald target {count} not reached within max_pulses={max_pulses}",
        {"pulses": total.pulses, "heralds": total.heralds, "target_heralds": count,
         "herald_probability": p_herald},
    )


def sample_heralded_delivery(params, size, rng):
    """Signal photons delivered on ``size`` independently heralded pulses."""
    rng = as_generator(rng)
    pk = heralded_pair_distribution(params)
    k = rng.choice(pk.size, size=size, p=pk)
    return rng.binomial(k, params.signal_path_transmission)
