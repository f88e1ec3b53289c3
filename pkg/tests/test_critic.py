import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aictrack.channels import DropoutChannel
from aictrack.critic import CostWeights, CriticNet, QuadraticBasis, running_cost
from aictrack.errors import ConfigError, CriticDiverged

BASIS = QuadraticBasis(2)
SIMO_COST = CostWeights(np.diag([0.5, 1.0]), np.array([[5e-4]]))


def critic(w, eta=0.5):
    return CriticNet(np.array(w, dtype=float), BASIS, eta)


def test_basis_layout():
    np.testing.assert_array_equal(BASIS.psi([2.0, 5.0]), [4, 10, 25])
    assert QuadraticBasis(3).m == 6
    np.testing.assert_array_equal(BASIS.coefficients_of(np.diag([0.5, 1.0])), [0.5, 0, 1.0])


def test_value_examples():
    assert critic([3, -2, 7]).value([0, 0]) == 0
    assert critic([1, 0, 0]).value([2, 5]) == 4
    assert critic([1, 1, 1]).value([1, 2]) == 7


def test_running_cost_examples():
    assert running_cost(SIMO_COST, [0, 0], [0], 0.1) == 0
    assert running_cost(SIMO_COST, [1, 1], [2], 1.0) == pytest.approx(1.502)
    assert running_cost(SIMO_COST, [1, 1], [2], 2.0) == pytest.approx(2 * 1.502)


def test_cost_weight_validation():
    with pytest.raises(ConfigError, match="Q"):
        CostWeights(np.diag([0.5, -1.0]), np.eye(1))
    with pytest.raises(ConfigError, match="R"):
        CostWeights(np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_td_error_degenerate_cases():
    c = critic([0.3, -0.1, 0.8])
    e, eu, e0 = np.array([0.2, -0.1]), np.array([0.1, 0.05]), np.array([0.3, -0.2])
    assert c.td_error(0.01, e, eu, e0, 1.0) == pytest.approx(0.01 + c.value(eu) - c.value(e), abs=1e-15)
    assert c.td_error(0.01, e, eu, e0, 0.0) == pytest.approx(0.01 + c.value(e0) - c.value(e), abs=1e-15)
    assert critic([0, 0, 0]).td_error(0.42, e, eu, e0, 0.7) == 0.42


def test_td_error_matches_monte_carlo():
    c = critic([0.3, -0.1, 0.8])
    e, eu, e0 = np.array([0.2, -0.1]), np.array([0.1, 0.05]), np.array([0.3, -0.2])
    gates = DropoutChannel.from_seed(0.7, 9, "actuator").sample_many(10_000)
    draws = np.array([0.01 + c.value(eu if g else e0) - c.value(e) for g in gates])
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - c.td_error(0.01, e, eu, e0, 0.7)) <= 3 * se


def test_update_examples():
    c = critic([0.3, -0.1, 0.8])
    w = c.W.copy()
    c.update(5.0, [0, 0], 1e-3)
    np.testing.assert_array_equal(c.W, w)
    c.update(0.0, [1, 2], 1e-3)
    np.testing.assert_array_equal(c.W, w)
    c.update(2.0, [1, 2], 0.5)
    np.testing.assert_allclose(c.W, w + 0.5 * 0.5 * 2.0 * np.array([1, 2, 4]))
    with pytest.raises(CriticDiverged):
        c.update(np.inf, [1, 2], 1.0)


def test_lms_converges_to_known_target():
    """Exact targets V*(e) = e1^2 fed through the td/update pair."""
    rng = np.random.default_rng(0)
    c = critic([0, 0, 0], eta=0.5)
    for _ in range(20_000):
        e = rng.uniform(-1, 1, 2)
        td = c.td_error(e[0] ** 2, e, np.zeros(2), np.zeros(2), 0.7)
        c.update(td, e, 1.0)
    np.testing.assert_allclose(c.W, [1, 0, 0], atol=1e-3)


def test_value_gradient_examples():
    np.testing.assert_array_equal(critic([1, 2, 3]).value_gradient([0, 0]), [0, 0])
    np.testing.assert_array_equal(critic([1, 0, 0]).value_gradient([2, 5]), [4, 0])


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_value_gradient_finite_difference(e, w):
    c = critic(w)
    e = np.array(e)
    fd = np.array([(c.value(e + d) - c.value(e - d)) / 2e-6 for d in np.eye(2) * 1e-6])
    g = c.value_gradient(e)
    assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1.0)


def test_basis_jacobian_exact_for_general_n():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        b = QuadraticBasis(n)
        for _ in range(25):
            e = rng.normal(size=n)
            fd = np.column_stack([(b.psi(e + d) - b.psi(e - d)) / 2e-6 for d in np.eye(n) * 1e-6])
            assert np.linalg.norm(b.psi_jacobian(e) - fd) <= 1e-6 * max(np.linalg.norm(fd), 1)


def test_shape_check():
    with pytest.raises(ConfigError):
        CriticNet(np.zeros(4), BASIS, 0.1)
