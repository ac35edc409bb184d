"""Two-qubit pure-state simulator.

Only what the authorization protocol needs: Schmidt-form states, binary
projective measurements in the x-z Bloch plane, Born-rule joint outcome
distributions and the two-phase (marginal, then conditional) sampling used
by the entanglement source.

Outcome convention: bit ``a`` selects the projector (1 + (-1)^a n.sigma)/2,
so outcome 0 is the +1 eigenvalue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NORM_TOL = 1e-12
EIG_TOL = 1e-9
SQRT_FLOOR = 1e-14

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_YY = np.kron(_Y, _Y)

# fixed sampling order of (a, b)
OUTCOMES = ((0, 0), (0, 1), (1, 0), (1, 1))


class QuantumDomainError(ValueError):
    """Input outside the domain of a simulator operation."""


class ZeroProbabilityError(RuntimeError):
    """Conditioning on an outcome that cannot occur."""


@dataclass(frozen=True)
class TwoQubitPureState:
    """Normalized amplitudes over |00>, |01>, |10>, |11>."""

    amplitudes: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        if len(self.amplitudes) != 4:
            raise QuantumDomainError("a two-qubit state has exactly 4 amplitudes")
        norm = sum(abs(x) ** 2 for x in self.amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumDomainError(f"state is not normalized (norm^2 = {norm!r})")

    @classmethod
    def from_vector(cls, vec) -> "TwoQubitPureState":
        return cls(tuple(complex(x) for x in np.asarray(vec).ravel()))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    def density_matrix(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())


def _normalize_angle(angle: float) -> float:
    # map into (-pi, pi]
    a = math.remainder(float(angle), 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    return a


@dataclass(frozen=True)
class MeasurementSetting:
    """Binary projective measurement along (sin angle, 0, cos angle)."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", _normalize_angle(self.angle))

    def observable(self) -> np.ndarray:
        return math.sin(self.angle) * _X + math.cos(self.angle) * _Z

    def projector(self, outcome: int) -> np.ndarray:
        sign = 1 - 2 * outcome
        return (_I2 + sign * self.observable()) / 2


@dataclass(frozen=True)
class JointDistribution:
    """p(a, b) in the order (0,0), (0,1), (1,0), (1,1)."""

    p: tuple[float, float, float, float]

    def __getitem__(self, ab: tuple[int, int]) -> float:
        a, b = ab
        return self.p[2 * a + b]

    def marginal_a(self) -> tuple[float, float]:
        return (self.p[0] + self.p[1], self.p[2] + self.p[3])

    def marginal_b(self) -> tuple[float, float]:
        return (self.p[0] + self.p[2], self.p[1] + self.p[3])

    def correlator(self) -> float:
        return self.p[0] - self.p[1] - self.p[2] + self.p[3]


def bell_state(kind: str = "phi+") -> TwoQubitPureState:
    r = 1 / math.sqrt(2)
    vectors = {
        "phi+": (r, 0, 0, r),
        "phi-": (r, 0, 0, -r),
        "psi+": (0, r, r, 0),
        "psi-": (0, r, -r, 0),
    }
    try:
        return TwoQubitPureState(tuple(complex(x) for x in vectors[kind]))
    except KeyError:
        raise QuantumDomainError(f"unknown Bell state {kind!r}") from None


def make_partially_entangled(theta: float) -> TwoQubitPureState:
    """Return cos(theta)|00> + sin(theta)|11> for theta in [0, pi/4]."""
    if not (0.0 <= theta <= math.pi / 4 + 1e-15):
        raise QuantumDomainError(f"theta must lie in [0, pi/4], got {theta!r}")
    return TwoQubitPureState((complex(math.cos(theta)), 0j, 0j, complex(math.sin(theta))))


def _check_normalized(state: TwoQubitPureState) -> None:
    norm = sum(abs(x) ** 2 for x in state.amplitudes)
    if abs(norm - 1.0) > NORM_TOL:
        raise QuantumDomainError(f"state is not normalized (norm^2 = {norm!r})")


def concurrence_pure(state: TwoQubitPureState) -> float:
    """Closed form 2|c00 c11 - c01 c10| for a pure state."""
    _check_normalized(state)
    c00, c01, c10, c11 = state.amplitudes
    return min(1.0, 2 * abs(c00 * c11 - c01 * c10))


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    # eigenvalues at rounding level are zero; sqrt would blow 1e-17 up to 3e-9
    w = np.where(w > SQRT_FLOOR, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence_density(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    The eigenvalues of rho (Y x Y) rho* (Y x Y) coincide with those of the
    Hermitian matrix sqrt(rho) (Y x Y) rho* (Y x Y) sqrt(rho) = A A^dagger with
    A = sqrt(rho) (Y x Y) sqrt(rho)*, so their square roots are the singular
    values of A.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise QuantumDomainError("density matrix must be 4x4")
    if not np.allclose(rho, rho.conj().T, atol=EIG_TOL, rtol=0):
        raise QuantumDomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > EIG_TOL:
        raise QuantumDomainError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -EIG_TOL:
        raise QuantumDomainError("density matrix is not positive semidefinite")

    rho = (rho + rho.conj().T) / 2
    root = _psd_sqrt(rho)
    roots = np.linalg.svd(root @ _YY @ root.conj(), compute_uv=False)
    c = roots[0] - roots[1] - roots[2] - roots[3]
    return float(min(1.0, max(0.0, c)))


def joint_distribution(
    state: TwoQubitPureState,
    setting_a: MeasurementSetting,
    setting_b: MeasurementSetting,
) -> JointDistribution:
    """Born-rule p(a, b) = <psi| P_a (x) P_b |psi>."""
    _check_normalized(state)
    return JointDistribution(_joint_cached(state.amplitudes, setting_a.angle, setting_b.angle))


@lru_cache(maxsize=4096)
def _joint_cached(amplitudes, alpha: float, beta: float) -> tuple[float, float, float, float]:
    psi = np.array(amplitudes, dtype=complex)
    sa, sb = MeasurementSetting(alpha), MeasurementSetting(beta)
    probs = []
    for a, b in OUTCOMES:
        op = np.kron(sa.projector(a), sb.projector(b))
        probs.append(max(0.0, float(np.vdot(psi, op @ psi).real)))
    total = sum(probs)
    return tuple(x / total for x in probs)


def marginal_distribution(state: TwoQubitPureState, setting: MeasurementSetting, party: str) -> tuple[float, float]:
    """Outcome law of one party's measurement alone, P (x) 1 or 1 (x) P."""
    _check_normalized(state)
    return _marginal_cached(state.amplitudes, setting.angle, party)


@lru_cache(maxsize=4096)
def _marginal_cached(amplitudes, angle: float, party: str) -> tuple[float, float]:
    psi = np.array(amplitudes, dtype=complex)
    s = MeasurementSetting(angle)
    out = []
    for x in (0, 1):
        if party == "A":
            op = np.kron(s.projector(x), _I2)
        elif party == "B":
            op = np.kron(_I2, s.projector(x))
        else:
            raise QuantumDomainError(f"party must be 'A' or 'B', got {party!r}")
        out.append(max(0.0, float(np.vdot(psi, op @ psi).real)))
    total = out[0] + out[1]
    return (out[0] / total, out[1] / total)


def sample_pair_outcomes(dist: JointDistribution, randomness: float) -> tuple[int, int]:
    """Inverse-CDF sample over (0,0), (0,1), (1,0), (1,1)."""
    acc = 0.0
    for (ab, p) in zip(OUTCOMES, dist.p):
        acc += p
        if randomness < acc:
            return ab
    # randomness within rounding of 1: last outcome with nonzero mass
    for ab, p in zip(reversed(OUTCOMES), reversed(dist.p)):
        if p > 0:
            return ab
    raise QuantumDomainError("empty distribution")


def sample_bit(p0: float, randomness: float) -> int:
    return 0 if randomness < p0 else 1


def conditional_law(dist: JointDistribution, fixed_party: str, fixed_outcome: int) -> tuple[float, float]:
    """Law of the other party's bit given one party's outcome."""
    if fixed_party == "A":
        pair = (dist[fixed_outcome, 0], dist[fixed_outcome, 1])
    elif fixed_party == "B":
        pair = (dist[0, fixed_outcome], dist[1, fixed_outcome])
    else:
        raise QuantumDomainError(f"party must be 'A' or 'B', got {fixed_party!r}")
    total = pair[0] + pair[1]
    if total <= 0.0:
        raise ZeroProbabilityError(f"party {fixed_party} cannot obtain outcome {fixed_outcome}")
    return (pair[0] / total, pair[1] / total)


def conditional_outcome(
    state: TwoQubitPureState,
    setting_a: MeasurementSetting,
    setting_b: MeasurementSetting,
    fixed_party: str,
    fixed_outcome: int,
    randomness: float,
) -> int:
    """Sample the other party's outcome given ``fixed_party`` saw ``fixed_outcome``."""
    law = conditional_law(joint_distribution(state, setting_a, setting_b), fixed_party, fixed_outcome)
    return sample_bit(law[0], randomness)
