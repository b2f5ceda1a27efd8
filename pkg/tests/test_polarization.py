import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from photon_sight.polarization import (
    A,
    D,
    H,
    V,
    AnalyzerSetting,
    PolarizationState,
    Provenance,
    TwoPhotonState,
    apply_hwp,
    coincidence_prob,
    make_bell_state,
    make_mixture_left_right,
    make_superposition_left_right,
    path_probabilities,
    pbs_route,
    singles_prob,
)

import oracles

angles = st.floats(min_value=-720.0, max_value=720.0, allow_nan=False)


def assert_valid(rho):
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() >= -1e-12


@given(angles, angles)
def test_hwp_keeps_state_valid_and_is_involution(phi, theta):
    s = PolarizationState.linear(phi)
    once = apply_hwp(s, theta)
    assert_valid(once.rho)
    assert np.allclose(apply_hwp(once, theta).rho, s.rho, atol=1e-10)


@given(angles, angles)
def test_malus_law(phi, analyzer):
    p = PolarizationState.linear(phi).pass_probability(analyzer)
    assert p == pytest.approx(math.cos(math.radians(phi - analyzer)) ** 2, abs=1e-12)


@given(angles, angles)
def test_hwp_reflects_linear_polarization(phi, theta):
    out = apply_hwp(PolarizationState.linear(phi), theta)
    assert out.allclose(PolarizationState.linear(2 * theta - phi))


def test_hwp_examples():
    assert apply_hwp(H, 0.0).allclose(H)
    assert apply_hwp(H, 45.0).allclose(V)
    assert apply_hwp(apply_hwp(H, 45.0), 45.0).allclose(H)
    # reflection about the fast axis: H -> D at 22.5 deg, V -> A
    assert apply_hwp(H, 22.5).allclose(D)
    assert apply_hwp(V, 22.5).allclose(A)
    assert apply_hwp(V, 67.5).allclose(D)


def test_global_phase_is_invisible():
    assert PolarizationState.from_vector([0, -1]).allclose(V)
    assert PolarizationState.from_vector([1j, 1j]).allclose(D)


def test_invalid_density_rejected():
    with pytest.raises(ValueError, match="trace"):
        PolarizationState(np.eye(2))
    with pytest.raises(ValueError, match="Hermitian"):
        PolarizationState(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError, match="negative"):
        PolarizationState(np.diag([1.5, -0.5]))


def test_states_are_immutable():
    with pytest.raises(ValueError):
        H.rho[0, 0] = 0.0


@pytest.mark.parametrize("raw, expected", [(0, 0), (180, 0), (-22.5, 157.5), (202.5, 22.5), (359.999, 179.999)])
def test_analyzer_normalization(raw, expected):
    assert AnalyzerSetting(raw).angle == pytest.approx(expected)


def test_pbs_route_superposition_is_pure_and_balanced():
    s = pbs_route(D)
    psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(s.rho, np.outer(psi, psi), atol=1e-12)
    assert s.purity == pytest.approx(1.0, abs=1e-12)
    assert path_probabilities(s) == pytest.approx((0.5, 0.5), abs=1e-12)
    assert make_superposition_left_right().rho == pytest.approx(s.rho)


@pytest.mark.parametrize("phi, p_right", [(0.0, 1.0), (90.0, 0.0), (30.0, 0.75), (45.0, 0.5)])
def test_pbs_route_path_marginals(phi, p_right):
    r, l = path_probabilities(pbs_route(PolarizationState.linear(phi)))
    assert r == pytest.approx(p_right, abs=1e-12)
    assert r + l == pytest.approx(1.0, abs=1e-12)


@given(angles)
def test_pbs_preserves_purity(phi):
    s = pbs_route(PolarizationState.linear(phi))
    assert_valid(s.rho)
    assert s.purity == pytest.approx(1.0, abs=1e-12)


def test_mixture():
    m = make_mixture_left_right()
    assert m.provenance is Provenance.MIXTURE
    assert sorted(np.linalg.eigvalsh(m.rho)) == pytest.approx([0, 0, 0.5, 0.5], abs=1e-12)
    assert m.purity == pytest.approx(0.5)
    assert path_probabilities(m) == (0.5, 0.5)


def test_superposition_and_mixture_share_path_marginals():
    assert path_probabilities(make_superposition_left_right()) == path_probabilities(make_mixture_left_right())


def test_bell_state():
    bell = make_bell_state()
    assert_valid(bell.rho)
    assert bell.purity == pytest.approx(1.0, abs=1e-12)
    for side in "AB":
        assert np.linalg.eigvalsh(bell.reduced(side).rho) == pytest.approx([0.5, 0.5], abs=1e-12)
    assert bell.entanglement_entropy() == pytest.approx(math.log(2), abs=1e-9)


def test_product_state_has_no_entanglement():
    assert TwoPhotonState.product(H, D).entanglement_entropy() == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("ta, tb, expected", [
    (0.0, 0.0, 0.5),
    (22.5, 0.0, 0.42677669529663687),  # 0.5 cos^2(22.5 deg), contraction oracle
    (0.0, 90.0, 0.0),
    (45.0, 45.0, 0.5),
])
def test_coincidence_examples(ta, tb, expected):
    assert coincidence_prob(make_bell_state(), ta, tb) == pytest.approx(expected, abs=1e-12)
    assert oracles.coincidence_by_contraction(oracles.bell_vector(), ta, tb) == pytest.approx(expected, abs=1e-12)


@given(angles, angles)
def test_coincidence_matches_contraction_oracle(ta, tb):
    got = coincidence_prob(make_bell_state(), ta, tb)
    assert got == pytest.approx(oracles.coincidence_by_contraction(oracles.bell_vector(), ta, tb), abs=1e-12)
    assert got == pytest.approx(0.5 * math.cos(math.radians(ta - tb)) ** 2, abs=1e-12)


@given(angles, angles, st.floats(min_value=-360, max_value=360))
def test_coincidence_depends_only_on_difference(ta, tb, shift):
    bell = make_bell_state()
    assert coincidence_prob(bell, ta, tb) == pytest.approx(
        coincidence_prob(bell, ta + shift, tb + shift), abs=1e-12)


@given(angles)
def test_bell_singles_are_half(theta):
    bell = make_bell_state()
    assert singles_prob(bell, "A", theta) == pytest.approx(0.5, abs=1e-12)
    assert singles_prob(bell, "B", theta) == pytest.approx(0.5, abs=1e-12)


def test_singles_product_state():
    hh = TwoPhotonState.product(H, H)
    assert singles_prob(hh, "A", 0.0) == pytest.approx(1.0)
    assert singles_prob(hh, "B", 90.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        singles_prob(hh, "C", 0.0)
