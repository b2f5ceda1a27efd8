"""Polarization and polarization-path states as density operators.

Single-photon polarization lives in the basis ``{H, V}``. Routing through a
polarizing beam splitter adds a path qubit, giving the ordered basis
``{H.right, H.left, V.right, V.left}``. Two-photon states use
``{HH, HV, VH, VV}`` with the first factor on side A.

Angles are in degrees at every public entry point. A linear polarization at
angle ``phi`` is the Jones vector ``(cos phi, sin phi)``; H is 0 deg, V is
90 deg, D is 45 deg and A is 135 deg.
"""

from dataclasses import dataclass, field
import enum
import math

import numpy as np

TOL = 1e-12

# columns: H, V ; rows: H.right, H.left, V.right, V.left
_PBS = np.zeros((4, 2), dtype=complex)
_PBS[0, 0] = 1.0
_PBS[3, 1] = 1.0

_RIGHT = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
_LEFT = np.diag([0.0, 1.0, 0.0, 1.0]).astype(complex)


def _check_density(rho, dim):
    rho = np.array(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density operator must be {dim}x{dim}, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0.0, atol=TOL):
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1.0) >= TOL:
        raise ValueError(f"density operator trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -TOL:
        raise ValueError("density operator has a negative eigenvalue")
    rho.setflags(write=False)
    return rho


def _purity(rho):
    return float(np.real(np.trace(rho @ rho)))


def _ket(angle):
    t = math.radians(angle)
    return np.array([math.cos(t), math.sin(t)], dtype=complex)


def _projector(angle):
    k = _ket(angle)
    return np.outer(k, k.conj())


def _angle(setting):
    if isinstance(setting, AnalyzerSetting):
        return setting.angle
    return AnalyzerSetting(setting).angle


@dataclass(frozen=True)
class AnalyzerSetting:
    """Linear analyzer axis in degrees, kept in ``[0, 180)``."""

    angle: float

    def __post_init__(self):
        a = math.fmod(float(self.angle), 180.0)
        if a < 0:
            a += 180.0
        if a >= 180.0:
            a = 0.0
        object.__setattr__(self, "angle", a)


@dataclass(frozen=True, eq=False)
class PolarizationState:
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_density(self.rho, 2))

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def linear(cls, angle):
        return cls.from_vector(_ket(angle))

    @property
    def purity(self):
        return _purity(self.rho)

    @property
    def is_pure(self):
        return abs(self.purity - 1.0) < 1e-9

    def pass_probability(self, analyzer):
        """Malus-law probability of transmission through a linear analyzer."""
        return float(np.real(np.trace(self.rho @ _projector(_angle(analyzer)))))

    def allclose(self, other, atol=1e-10):
        return np.allclose(self.rho, other.rho, rtol=0.0, atol=atol)


# exact entries: superposition and mixture path marginals then agree bit for bit
H = PolarizationState(np.array([[1.0, 0.0], [0.0, 0.0]]))
V = PolarizationState(np.array([[0.0, 0.0], [0.0, 1.0]]))
D = PolarizationState(np.array([[0.5, 0.5], [0.5, 0.5]]))
A = PolarizationState(np.array([[0.5, -0.5], [-0.5, 0.5]]))


class Provenance(str, enum.Enum):
    SUPERPOSITION = "superposition"
    MIXTURE = "mixture"


@dataclass(frozen=True, eq=False)
class PathPolarizationState:
    rho: np.ndarray
    provenance: Provenance = Provenance.SUPERPOSITION

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_density(self.rho, 4))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def purity(self):
        return _purity(self.rho)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    rho: np.ndarray = field()

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_density(self.rho, 4))

    @classmethod
    def product(cls, a, b):
        return cls(np.kron(a.rho, b.rho))

    @property
    def purity(self):
        return _purity(self.rho)

    def reduced(self, side):
        """Partial trace keeping side ``"A"`` (first factor) or ``"B"``."""
        r = self.rho.reshape(2, 2, 2, 2)
        if str(side).upper() == "A":
            out = np.einsum("ijkj->ik", r)
        elif str(side).upper() == "B":
            out = np.einsum("ijil->jl", r)
        else:
            raise ValueError(f"side must be 'A' or 'B', got {side!r}")
        return PolarizationState(out)

    def entanglement_entropy(self):
        """Von Neumann entropy (nats) of the side-A reduced state."""
        w = np.linalg.eigvalsh(self.reduced("A").rho)
        w = w[w > 1e-15]
        return float(-np.sum(w * np.log(w)))


def apply_hwp(state, hwp_angle):
    """Ideal half-wave plate with its fast axis at ``hwp_angle`` degrees.

    Linear polarization at ``phi`` leaves at ``2*hwp_angle - phi``.
    """
    t = math.radians(2.0 * _angle(hwp_angle))
    m = np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)
    return PolarizationState(m @ state.rho @ m.conj().T)


def pbs_route(state):
    """Send H to the right path and V to the left path, coherently."""
    return PathPolarizationState(_PBS @ state.rho @ _PBS.conj().T, Provenance.SUPERPOSITION)


def make_superposition_left_right():
    """``(|H,right> + |V,left>)/sqrt 2``: diagonal light through the PBS."""
    return pbs_route(D)


def make_mixture_left_right():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 0.5
    rho[3, 3] = 0.5
    return PathPolarizationState(rho, Provenance.MIXTURE)


def path_probabilities(state):
    """Return ``(p_right, p_left)``."""
    p_right = float(np.real(np.trace(state.rho @ _RIGHT)))
    p_left = float(np.real(np.trace(state.rho @ _LEFT)))
    return p_right, p_left


def make_bell_state():
    """``(|HH> + |VV>)/sqrt 2``."""
    psi = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / math.sqrt(2.0)
    return TwoPhotonState(np.outer(psi, psi.conj()))


def coincidence_prob(state, theta_a, theta_b):
    """Probability that both photons pass analyzers at ``theta_a`` and ``theta_b``."""
    op = np.kron(_projector(_angle(theta_a)), _projector(_angle(theta_b)))
    return float(np.real(np.trace(state.rho @ op)))


def singles_prob(state, side, theta):
    proj = _projector(_angle(theta))
    eye = np.eye(2, dtype=complex)
    side = str(getattr(side, "value", side)).upper()
    if side == "A":
        op = np.kron(proj, eye)
    elif side == "B":
        op = np.kron(eye, proj)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return float(np.real(np.trace(state.rho @ op)))
