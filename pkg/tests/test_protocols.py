import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
from scipy import stats

from photon_sight.observer import EyeParams, frequency_of_seeing
from photon_sight.polarization import H, TwoPhotonState, coincidence_prob, make_bell_state
from photon_sight.protocols import (
    CHTerms,
    ch_lhs,
    p_obs_threshold,
    required_trials,
    run_2afc,
    run_bell,
    run_hecht,
    run_superposition_vs_mixture,
    simulate_hecht,
)
from photon_sight.protocols.bell import detector_terms, terms_with_observer
from photon_sight.protocols.power import critical_successes, exact_power

from helpers import IDEAL_SOURCE, eye_for, within_sigma
import oracles

CH_QUANTUM = 0.20710678118654746   # 0.5 (3 cos^2 22.5 - sin^2 22.5) - 1
OBSERVER_AT_THRESHOLD = 0.3284271247461899  # published threshold / cos^2(22.5 deg) = 2 sqrt2 - 2.5
PUBLISHED_THRESHOLD = 0.2803300858899106
DERIVED_THRESHOLD = 0.4393398282201788


# -- Hecht -------------------------------------------------------------------

def test_hecht_fractions_follow_poisson_model():
    eye = EyeParams(pre_retinal_transmission=0.06 / 0.33, threshold_n=6)
    pts = run_hecht([50, 100, 200], 4000, eye, 1)
    assert [p.mean_photons for p in pts] == [50.0, 100.0, 200.0]
    for m, t, s in pts:
        p = frequency_of_seeing(6, eye.detection_efficiency, m)
        assert within_sigma(s / t, p, math.sqrt(p * (1 - p) / t) + 1e-12, k=4)


def test_hecht_ratings_and_table():
    eye = EyeParams(threshold_n=2)
    table = simulate_hecht([0, 100], 500, eye, 3, rating_criteria=(1, 2, 3, 4, 5, 6))
    assert len(table) == 1000
    assert set(np.unique(table.rating)) <= set(range(7))
    zero = table.mean_photons == 0
    assert table.photons_left[zero].sum() == 0 and table.rating[zero].max() == 0
    assert table.rating[~zero].mean() > 0


def test_hecht_validation():
    with pytest.raises(ValueError):
        simulate_hecht([], 10, EyeParams(), 0)
    with pytest.raises(ValueError):
        simulate_hecht([-1.0], 10, EyeParams(), 0)
    with pytest.raises(ValueError):
        simulate_hecht([1.0], 10, EyeParams(), 0, rating_criteria=(1, 2))


def test_hecht_deterministic_across_workers():
    eye = EyeParams(threshold_n=3)
    a = run_hecht([10, 50, 90], 70_000, eye, 5, n_jobs=1)
    b = run_hecht([10, 50, 90], 70_000, eye, 5, n_jobs=3)
    assert a == b


# -- forced choice -----------------------------------------------------------

def test_2afc_exact_control_count_and_accuracy():
    session = run_2afc(IDEAL_SOURCE, eye_for(0.2), 20_000, 0.25, 4)
    counts = session.condition_counts
    assert sum(counts["control_blank"].values()) == 5000
    acc = session.accuracy
    assert acc["trials"] == 15_000
    se = math.sqrt(0.6 * 0.4 / acc["trials"])
    assert within_sigma(acc["estimate"], 0.6, se)
    assert session.extra["control"]["trials"] == 5000


def test_2afc_perfect_eye_is_always_right():
    eye = EyeParams(pre_retinal_transmission=1.0, rod_quantum_efficiency=1.0)
    session = run_2afc(IDEAL_SOURCE, eye, 1000, 0.0, 0)
    assert session.accuracy["estimate"] == 1.0
    assert session.extra["control"] is None


def test_2afc_all_controls():
    session = run_2afc(IDEAL_SOURCE, eye_for(0.1), 100, 1.0, 0)
    assert session.accuracy is None
    assert session.trials.photons_left.sum() + session.trials.photons_right.sum() == 0


def test_2afc_temporal_labels():
    session = run_2afc(IDEAL_SOURCE, eye_for(0.1), 100, 0.5, 0, alternatives=("Early", "Late"))
    assert "chose_late" in session.extra["control"]


def test_2afc_worker_invariance():
    a = run_2afc(IDEAL_SOURCE, eye_for(0.1), 150_000, 0.5, 8, n_jobs=1)
    b = run_2afc(IDEAL_SOURCE, eye_for(0.1), 150_000, 0.5, 8, n_jobs=4)
    assert a.to_dict() == b.to_dict()


def test_superposition_matches_mixture_under_quantum_mechanics():
    cmp = run_superposition_vs_mixture(IDEAL_SOURCE, eye_for(0.5), 5000, 0.0, 12)
    assert cmp.p_value > 1e-4
    assert cmp.superposition.accuracy is None
    assert cmp.mixture.accuracy["trials"] == 5000
    assert cmp.seen["n1"] > 2000


def test_superposition_anomaly_is_visible():
    cmp = run_superposition_vs_mixture(IDEAL_SOURCE, eye_for(0.5), 5000, 0.3, 12)
    assert cmp.p_value < 1e-6
    assert cmp.seen["k1"] / cmp.seen["n1"] > 0.7


def test_superposition_rejects_large_epsilon():
    with pytest.raises(ValueError, match="epsilon"):
        run_superposition_vs_mixture(IDEAL_SOURCE, eye_for(0.1), 10, 0.6, 0)


# -- Clauser-Horne -----------------------------------------------------------

def test_ch_quantum_value():
    ideal = detector_terms()
    terms = CHTerms(c_ab=ideal[0], c_apb=ideal[1], c_apbp=coincidence_prob(make_bell_state(), 45, 67.5),
                    c_abp=ideal[2], s1_ap=ideal[3], s2_b=ideal[4])
    assert ch_lhs(terms) == pytest.approx(CH_QUANTUM, abs=1e-12)


def test_ch_local_strategies_never_violate():
    for strategy in oracles.local_deterministic_strategies():
        assert ch_lhs(CHTerms(**oracles.ch_terms_of_strategy(strategy))) <= 0


@given(st.lists(st.floats(0, 1), min_size=16, max_size=16))
@settings(max_examples=50)
def test_ch_local_mixtures_never_violate(weights):
    w = np.asarray(weights) + 1e-9
    w = w / w.sum()
    strategies = [oracles.ch_terms_of_strategy(s) for s in oracles.local_deterministic_strategies()]
    mixed = {k: float(sum(wi * s[k] for wi, s in zip(w, strategies))) for k in strategies[0]}
    mixed = {k: min(max(v, 0.0), 1.0) for k, v in mixed.items()}
    assert ch_lhs(CHTerms(**mixed)) <= 1e-12


def test_ch_terms_validated():
    with pytest.raises(ValueError):
        CHTerms(1.2, 0, 0, 0, 0, 0)


def test_thresholds():
    assert p_obs_threshold("paper") == pytest.approx(PUBLISHED_THRESHOLD, abs=1e-12)
    derived = p_obs_threshold("derived")
    assert derived == pytest.approx(DERIVED_THRESHOLD, abs=1e-12)
    assert ch_lhs(terms_with_observer(derived)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="mode"):
        p_obs_threshold("other")


def test_derived_threshold_rises_with_detector_loss():
    values = [p_obs_threshold("derived", detector_efficiency=e) for e in (1.0, 0.9, 0.8)]
    assert values == sorted(values)
    with pytest.raises(ValueError, match="no observer probability"):
        p_obs_threshold("derived", detector_efficiency=0.5)


def test_observer_efficiency_at_published_threshold():
    cos2 = math.cos(math.radians(22.5)) ** 2
    assert p_obs_threshold("paper") / cos2 == pytest.approx(OBSERVER_AT_THRESHOLD, abs=1e-12)
    assert OBSERVER_AT_THRESHOLD == pytest.approx(2 * math.sqrt(2) - 2.5, abs=1e-12)


def test_ch_lhs_monotone_in_p_obs():
    values = [ch_lhs(terms_with_observer(p)) for p in np.linspace(0, 1, 11)]
    assert np.all(np.diff(values) > 0)


def test_product_state_cannot_violate():
    prod = TwoPhotonState.product(H, H)
    with pytest.raises(ValueError):
        p_obs_threshold("derived", state=prod)


def test_run_bell_estimates_observer_probability():
    res = run_bell(200_000, observer_end_to_end=0.5, eye=EyeParams(), control_prob=0.3, rng=3)
    p_true = 0.5 * math.cos(math.radians(22.5)) ** 2
    assert within_sigma(res.p_obs_estimate, p_true, math.sqrt(p_true * (1 - p_true) / 2e5))
    assert within_sigma(res.control_side_seen / 2e5, 0.15, math.sqrt(0.15 * 0.85 / 2e5))
    assert res.heralded_trials == 200_000
    # side B registers half the pairs at b': negative-binomial pair count, mean 2 * trials
    assert within_sigma(res.pairs_emitted, 400_000, math.sqrt(200_000 * 0.5 / 0.25), k=4)
    assert res.lhs_minus_rhs == pytest.approx(ch_lhs(terms_with_observer(res.p_obs_estimate)))


def test_run_bell_balanced_control_is_indistinguishable():
    """When the control arrives as often as the entangled photon, the two sides match."""
    pass_prob = math.cos(math.radians(22.5)) ** 2
    res = run_bell(200_000, observer_end_to_end=0.3, control_prob=pass_prob, rng=5)
    assert res.comparison_p_value > 1e-3


def test_run_bell_perfect_observer_violates():
    res = run_bell(20_000, observer_end_to_end=1.0, rng=0)
    assert res.violation_p_value < 1e-10
    assert res.lhs_minus_rhs > 0


def test_run_bell_worker_invariance():
    a = run_bell(150_000, observer_end_to_end=0.3, rng=1, n_jobs=1)
    b = run_bell(150_000, observer_end_to_end=0.3, rng=1, n_jobs=4)
    assert a.to_dict() == b.to_dict()


# -- power -------------------------------------------------------------------

def test_required_trials_known_values():
    assert required_trials(0.5, 0.53, 0.05, 0.9) == 2394
    assert required_trials(0.5, 0.99, 0.05, 0.9) == 5


@pytest.mark.parametrize("p0, p1, alpha, power", [
    (0.5, 0.6, 0.05, 0.8),
    (0.5, 0.7, 0.01, 0.9),
    (0.28, 0.4, 0.05, 0.9),
    (0.1, 0.2, 0.05, 0.8),
])
def test_required_trials_matches_oracle(p0, p1, alpha, power):
    assert required_trials(p0, p1, alpha, power) == oracles.required_trials_oracle(p0, p1, alpha, power)


def test_critical_successes_boundary():
    for n in (10, 57, 400, 2394):
        k = int(critical_successes(n, 0.5, 0.05))
        assert stats.binom.sf(k - 1, n, 0.5) <= 0.05 < stats.binom.sf(k - 2, n, 0.5)


@given(st.integers(5, 400), st.floats(0.05, 0.6), st.floats(0.01, 0.3))
@settings(max_examples=40, deadline=None)
def test_exact_power_matches_oracle(n, p0, delta):
    p1 = min(p0 + delta, 0.99)
    assert float(exact_power(n, p0, p1, 0.05)) == pytest.approx(
        oracles.exact_power_oracle(n, p0, p1, 0.05), abs=1e-9)


def test_required_trials_validation():
    with pytest.raises(ValueError, match="p0 < p1"):
        required_trials(0.5, 0.4)
    with pytest.raises(ValueError, match="not reached"):
        required_trials(0.5, 0.5001, max_trials=100)
