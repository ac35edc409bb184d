import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chshauth.qsim import (
    JointDistribution,
    MeasurementSetting,
    QuantumDomainError,
    TwoQubitPureState,
    ZeroProbabilityError,
    bell_state,
    concurrence_density,
    concurrence_pure,
    conditional_outcome,
    joint_distribution,
    make_partially_entangled,
    marginal_distribution,
    sample_pair_outcomes,
)

from conftest import born_oracle

PHI_PLUS = bell_state("phi+")
ZERO = make_partially_entangled(0.0)
Z, X = MeasurementSetting(0.0), MeasurementSetting(math.pi / 2)


def random_state(rng):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return TwoQubitPureState.from_vector(v / np.linalg.norm(v))


def test_make_partially_entangled_examples():
    assert np.allclose(make_partially_entangled(math.pi / 4).vector, PHI_PLUS.vector, atol=1e-15)
    assert make_partially_entangled(0.0).amplitudes == (1, 0, 0, 0)
    s = make_partially_entangled(math.pi / 8)
    assert s.amplitudes[0] == pytest.approx(math.cos(math.pi / 8), abs=1e-15)
    assert s.amplitudes[3] == pytest.approx(math.sin(math.pi / 8), abs=1e-15)
    assert s.amplitudes[1] == s.amplitudes[2] == 0
    assert abs(np.linalg.norm(s.vector) - 1) < 1e-12


@pytest.mark.parametrize("theta", [-0.01, math.pi / 4 + 0.01, 2.0])
def test_make_partially_entangled_rejects_out_of_range(theta):
    with pytest.raises(QuantumDomainError):
        make_partially_entangled(theta)


def test_unnormalized_state_rejected():
    with pytest.raises(QuantumDomainError):
        TwoQubitPureState((1, 1, 0, 0))


def test_measurement_setting_normalizes_angle():
    assert MeasurementSetting(3 * math.pi).angle == pytest.approx(math.pi)
    assert MeasurementSetting(-math.pi).angle == pytest.approx(math.pi)
    assert MeasurementSetting(2 * math.pi + 0.5).angle == pytest.approx(0.5)
    for x in np.linspace(-10, 10, 101):
        a = MeasurementSetting(x).angle
        assert -math.pi < a <= math.pi


def test_concurrence_examples():
    assert concurrence_pure(PHI_PLUS) == pytest.approx(1.0, abs=1e-12)
    assert concurrence_pure(ZERO) == 0.0
    s = make_partially_entangled(math.pi / 8)
    # eigenvalue route on the density matrix agrees with sin(2 theta)
    assert concurrence_pure(s) == pytest.approx(math.sin(math.pi / 4), abs=1e-12)
    assert concurrence_density(s.density_matrix()) == pytest.approx(math.sin(math.pi / 4), abs=1e-9)


def test_concurrence_density_examples():
    assert concurrence_density(PHI_PLUS.density_matrix()) == pytest.approx(1.0, abs=1e-9)
    assert concurrence_density(np.eye(4) / 4) == 0.0
    rho = make_partially_entangled(math.pi / 12).density_matrix()
    assert concurrence_density(rho) == pytest.approx(0.5, abs=1e-9)


def test_concurrence_density_mixed_werner():
    # Werner state p|phi+><phi+| + (1-p) 1/4 has C = max(0, (3p-1)/2)
    for p in (0.2, 1 / 3, 0.5, 0.8, 1.0):
        rho = p * PHI_PLUS.density_matrix() + (1 - p) * np.eye(4) / 4
        assert concurrence_density(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-9)


@pytest.mark.parametrize(
    "rho",
    [
        np.diag([1.0, 0, 0, 0]) + np.triu(np.ones((4, 4)), 1) * 0.1,  # not Hermitian
        np.diag([1.2, -0.2, 0, 0]),  # negative eigenvalue
        np.eye(4) / 2,  # trace 2
    ],
)
def test_concurrence_density_rejects_invalid(rho):
    with pytest.raises(QuantumDomainError):
        concurrence_density(rho)


def test_concurrence_grid_matches_sin_two_theta():
    for theta in np.linspace(0, math.pi / 4, 50):
        assert abs(concurrence_pure(make_partially_entangled(theta)) - math.sin(2 * theta)) < 1e-12


def test_concurrence_pure_vs_density_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        s = random_state(rng)
        c = concurrence_pure(s)
        assert 0 <= c <= 1
        assert abs(c - concurrence_density(s.density_matrix())) < 1e-9


def test_joint_distribution_examples():
    assert joint_distribution(PHI_PLUS, Z, Z).p == pytest.approx((0.5, 0, 0, 0.5), abs=1e-12)
    assert joint_distribution(PHI_PLUS, Z, X).p == pytest.approx((0.25,) * 4, abs=1e-12)
    assert joint_distribution(ZERO, Z, Z).p == pytest.approx((1, 0, 0, 0), abs=1e-12)


def test_joint_distribution_matches_eigenvector_oracle_and_correlator():
    rng = np.random.default_rng(3)
    for _ in range(200):
        theta = rng.uniform(0, math.pi / 4)
        alpha, beta = rng.uniform(-math.pi, math.pi, 2)
        s = make_partially_entangled(theta)
        dist = joint_distribution(s, MeasurementSetting(alpha), MeasurementSetting(beta))
        assert np.allclose(dist.p, born_oracle(s.vector, alpha, beta), atol=1e-12)
        corr = math.cos(alpha) * math.cos(beta) + math.sin(2 * theta) * math.sin(alpha) * math.sin(beta)
        assert dist.correlator() == pytest.approx(corr, abs=1e-12)
        assert min(dist.p) >= 0 and abs(sum(dist.p) - 1) < 1e-12


def test_no_signaling_grid():
    grid = [(th, al, be) for th in np.linspace(0, math.pi / 4, 5)
            for al in np.linspace(-math.pi, math.pi, 5) for be in np.linspace(-math.pi, math.pi, 5)]
    assert len(grid) >= 100
    other = MeasurementSetting(0.731)
    for th, al, be in grid:
        s = make_partially_entangled(th)
        A, B = MeasurementSetting(al), MeasurementSetting(be)
        d1, d2 = joint_distribution(s, A, B), joint_distribution(s, A, other)
        assert np.allclose(d1.marginal_a(), d2.marginal_a(), atol=1e-12)
        d3 = joint_distribution(s, other, B)
        assert np.allclose(d1.marginal_b(), d3.marginal_b(), atol=1e-12)
        assert np.allclose(d1.marginal_a(), marginal_distribution(s, A, "A"), atol=1e-12)
        assert np.allclose(d1.marginal_b(), marginal_distribution(s, B, "B"), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=8, max_size=8).filter(lambda v: sum(x * x for x in v) > 1e-3),
    st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4),
)
def test_no_signaling_random_states(v, alpha, beta, beta2):
    vec = np.array(v[:4]) + 1j * np.array(v[4:])
    s = TwoQubitPureState.from_vector(vec / np.linalg.norm(vec))
    A = MeasurementSetting(alpha)
    m1 = joint_distribution(s, A, MeasurementSetting(beta)).marginal_a()
    m2 = joint_distribution(s, A, MeasurementSetting(beta2)).marginal_a()
    assert np.allclose(m1, m2, atol=1e-12)


def test_sample_pair_outcomes_examples():
    assert sample_pair_outcomes(JointDistribution((1, 0, 0, 0)), 0.999) == (0, 0)
    half = JointDistribution((0.5, 0, 0, 0.5))
    assert sample_pair_outcomes(half, 0.25) == (0, 0)
    assert sample_pair_outcomes(half, 0.75) == (1, 1)
    assert sample_pair_outcomes(half, 0.5) == (1, 1)


def test_conditional_outcome_examples():
    rng = np.random.default_rng(0)
    us = rng.random(2000)
    assert all(conditional_outcome(PHI_PLUS, Z, Z, "A", 0, u) == 0 for u in us)
    assert all(conditional_outcome(PHI_PLUS, Z, Z, "A", 1, u) == 1 for u in us)
    assert all(conditional_outcome(ZERO, Z, Z, "A", 0, u) == 0 for u in us)
    bits = [conditional_outcome(PHI_PLUS, Z, X, "A", 0, u) for u in us]
    # uniform: within 4 sigma of 1000
    assert abs(sum(bits) - 1000) < 4 * math.sqrt(2000 * 0.25)


def test_conditional_on_impossible_outcome_raises():
    with pytest.raises(ZeroProbabilityError):
        conditional_outcome(ZERO, Z, Z, "A", 1, 0.3)
    with pytest.raises(ZeroProbabilityError):
        conditional_outcome(ZERO, Z, Z, "B", 1, 0.3)


def test_two_phase_sampling_matches_joint_law():
    rng = np.random.default_rng(5)
    n = 100_000
    s = make_partially_entangled(0.4)
    A, B = MeasurementSetting(0.3), MeasurementSetting(-1.1)
    dist = joint_distribution(s, A, B)
    pa0 = marginal_distribution(s, A, "A")[0]
    u1, u2 = rng.random(n), rng.random(n)
    counts = np.zeros(4)
    for x, y in zip(u1, u2):
        a = 0 if x < pa0 else 1
        b = conditional_outcome(s, A, B, "A", a, y)
        counts[2 * a + b] += 1
    for k in range(4):
        p = dist.p[k]
        assert abs(counts[k] - n * p) <= 4 * math.sqrt(n * p * (1 - p)) + 1e-9
