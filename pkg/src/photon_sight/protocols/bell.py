"""Clauser-Horne test with a human observer replacing one detector.

Side B uses photon counters. Whenever B registers a photon at setting
``b'``, the partner photon is analyzed at ``a'``; if it passes it is sent to
a random side of the observer's visual field, while a control photon goes to
the other side with probability ``control_prob``. The observer judges each
side independently.
"""

from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np

from .._validation import check_count, check_probability
from ..inference import exact_binomial_test, mcnemar_exact, two_proportion_test
from ..observer import EyeParams, Side, absorb, see_flash
from ..polarization import coincidence_prob, make_bell_state, singles_prob
from ..records import CONDITIONS, TrialTable
from ..rng import TRIAL_BLOCK, as_seed_sequence, block_generator, block_slices, map_blocks

logger = logging.getLogger(__name__)

_BELL = CONDITIONS.index("bell_entangled")


@dataclass(frozen=True)
class CHSettings:
    """Analyzer angles in degrees; defaults are the optimal CH choices."""

    a: float = 0.0
    a_prime: float = 45.0
    b: float = 22.5
    b_prime: float = 67.5


@dataclass(frozen=True)
class CHTerms:
    c_ab: float
    c_apb: float
    c_apbp: float
    c_abp: float
    s1_ap: float
    s2_b: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            check_probability(value, name)


@dataclass
class CHResult:
    terms: CHTerms
    lhs_minus_rhs: float
    p_obs_estimate: float
    p_obs_interval: tuple
    heralded_trials: int
    entangled_side_seen: int
    control_side_seen: int
    control_delivered: int
    threshold: float
    violation_p_value: float
    comparison_p_value: float
    mcnemar_p_value: float
    pairs_emitted: int
    trials: TrialTable = field(default=None, repr=False)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "trials"}
        out["terms"] = asdict(self.terms)
        out["p_obs_interval"] = list(self.p_obs_interval)
        return out


def ch_lhs(terms):
    """CH left side minus right side; positive means the inequality is violated."""
    return (terms.c_ab + terms.c_apb + terms.c_apbp - terms.c_abp) - (terms.s1_ap + terms.s2_b)


def detector_terms(state=None, settings=CHSettings(), detector_efficiency=1.0):
    """Quantum predictions for the counter-measured CH terms.

    Returns ``(c_ab, c_apb, c_abp, s1_ap, s2_b, s2_bp)``; every detection is
    scaled by ``detector_efficiency``.
    """
    state = make_bell_state() if state is None else state
    eta = check_probability(detector_efficiency, "detector_efficiency")
    s = settings
    return (
        eta * eta * coincidence_prob(state, s.a, s.b),
        eta * eta * coincidence_prob(state, s.a_prime, s.b),
        eta * eta * coincidence_prob(state, s.a, s.b_prime),
        eta * singles_prob(state, "A", s.a_prime),
        eta * singles_prob(state, "B", s.b),
        eta * singles_prob(state, "B", s.b_prime),
    )


def terms_with_observer(p_obs, state=None, settings=CHSettings(), detector_efficiency=1.0):
    """CH terms with the observer coincidence ``c(a', b') = p_obs * s2(b')``."""
    c_ab, c_apb, c_abp, s1_ap, s2_b, s2_bp = detector_terms(state, settings, detector_efficiency)
    return CHTerms(c_ab=c_ab, c_apb=c_apb, c_apbp=p_obs * s2_bp, c_abp=c_abp,
                   s1_ap=s1_ap, s2_b=s2_b)


def p_obs_threshold(mode="paper", state=None, settings=CHSettings(), detector_efficiency=1.0):
    """Observer detection probability above which the CH inequality fails.

    ``"paper"`` is the published constant ``3 cos^2(22.5 deg) / 2 - 1``.
    ``"derived"`` solves ``ch_lhs = 0`` for the observer term, which enters
    as ``c(a', b') = p_obs * s2(b')``; the CH expression is affine in
    ``p_obs``, so two evaluations fix the root.
    """
    if mode == "paper":
        return 1.5 * math.cos(math.radians(22.5)) ** 2 - 1.0
    if mode != "derived":
        raise ValueError(f"mode must be 'paper' or 'derived', got {mode!r}")
    lhs0 = ch_lhs(terms_with_observer(0.0, state, settings, detector_efficiency))
    lhs1 = ch_lhs(terms_with_observer(1.0, state, settings, detector_efficiency))
    slope = lhs1 - lhs0
    root = -lhs0 / slope if slope > 0 else math.inf
    logger.info(
        "derived p_obs threshold: ch_lhs(p) = %.12f + %.12f * p, root p = %.12f "
        "(published constant %.12f)", lhs0, slope, root, p_obs_threshold("paper"),
    )
    if not 0.0 < root < 1.0:
        raise ValueError(f"no observer probability in (0,1) violates CH here (root {root})")
    return root


def run_bell(trials, state=None, detector_efficiency=1.0, eye=None, observer_end_to_end=None,
             control_prob=None, rng=None, *, settings=CHSettings(), threshold=None, n_jobs=1):
    """Simulate ``trials`` heralded observer trials and summarize them as a :class:`CHResult`.

    ``observer_end_to_end`` (probability that one photon at the cornea is
    perceived) overrides the eye's transmission x quantum efficiency; dark
    events and the threshold still come from ``eye``. ``control_prob`` and
    ``threshold`` default to the published 0.28 constant.
    """
    trials = check_count(trials, "trials", minimum=1)
    state = make_bell_state() if state is None else state
    eye = EyeParams() if eye is None else eye
    published = p_obs_threshold("paper")
    control_prob = published if control_prob is None else check_probability(control_prob, "control_prob")
    threshold = published if threshold is None else check_probability(threshold, "threshold")
    if observer_end_to_end is None:
        eff_l, eff_r = eye.side_efficiency(Side.LEFT), eye.side_efficiency(Side.RIGHT)
    else:
        eff_l = eff_r = check_probability(observer_end_to_end, "observer_end_to_end")
    p_b = singles_prob(state, "B", settings.b_prime)
    if p_b <= 0:
        raise ValueError("side B never registers a photon at b'; no trials can be heralded")
    pass_given_herald = coincidence_prob(state, settings.a_prime, settings.b_prime) / p_b
    root = as_seed_sequence(rng)

    def work(task):
        b, start, stop = task
        gen = block_generator(root, "bell", b)
        n = stop - start
        passed = (gen.random(n) < pass_given_herald).astype(np.int64)
        ent_right = gen.random(n) < 0.5
        control = (gen.random(n) < control_prob).astype(np.int64)
        photons_left = np.where(ent_right, control, passed)
        photons_right = np.where(ent_right, passed, control)
        a_l, d_l = absorb(photons_left, eye, gen, efficiency=eff_l)
        a_r, d_r = absorb(photons_right, eye, gen, efficiency=eff_r)
        return TrialTable(
            condition=np.full(n, _BELL),
            photons_left=photons_left,
            photons_right=photons_right,
            truth_side=ent_right,
            seen_left=see_flash(a_l, d_l, eye),
            seen_right=see_flash(a_r, d_r, eye),
        )

    table = TrialTable.concat(map_blocks(work, block_slices(trials, TRIAL_BLOCK), n_jobs))
    right = table.truth_side == 1
    ent_seen = np.where(right, table.seen_right, table.seen_left) == 1
    ctl_seen = np.where(right, table.seen_left, table.seen_right) == 1
    k_ent, k_ctl = int(ent_seen.sum()), int(ctl_seen.sum())
    control_delivered = int(np.where(right, table.photons_left, table.photons_right).sum())

    herald_per_pair = p_b * check_probability(detector_efficiency, "detector_efficiency")
    if herald_per_pair > 0:
        misses = block_generator(root, "bell-pairs").negative_binomial(trials, herald_per_pair)
        pairs = trials + int(misses)
    else:
        pairs = 0

    p_obs = k_ent / trials
    terms = terms_with_observer(p_obs, state, settings, detector_efficiency)
    test = exact_binomial_test(k_ent, trials, threshold, "greater")
    return CHResult(
        terms=terms,
        lhs_minus_rhs=ch_lhs(terms),
        p_obs_estimate=p_obs,
        p_obs_interval=test.wilson_interval,
        heralded_trials=trials,
        entangled_side_seen=k_ent,
        control_side_seen=k_ctl,
        control_delivered=control_delivered,
        threshold=threshold,
        violation_p_value=test.p_value,
        comparison_p_value=two_proportion_test(k_ent, trials, k_ctl, trials),
        mcnemar_p_value=mcnemar_exact(int((ent_seen & ~ctl_seen).sum()),
                                      int((ctl_seen & ~ent_seen).sum())),
        pairs_emitted=pairs,
        trials=table,
    )
