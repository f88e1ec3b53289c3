import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aictrack import PRESETS, run_episode
from aictrack.channels import DropoutChannel
from aictrack.dynamics import PlantModel, SimState, step_euler
from aictrack.errors import IdentifierDiverged
from aictrack.identifier import IdentifierNet, bipolar_sigmoid
from aictrack.metrics import settle_time


def make_net(rng, n_x=2, n_u=1, hidden=6, scale=0.8, rho=0.0, eta=1.0):
    return IdentifierNet.initialize(n_x, n_u, hidden, -np.ones(n_x), eta, eta, rho, rng=rng, scale=scale)


def test_bipolar_sigmoid_values():
    assert bipolar_sigmoid(np.array([0.0]))[0] == 0.0
    assert bipolar_sigmoid(np.array([2.0]))[0] == pytest.approx(2 / (1 + math.exp(-2)) - 1, abs=1e-15)
    assert bipolar_sigmoid(np.array([2.0]))[0] == pytest.approx(0.761594, abs=1e-6)
    np.testing.assert_array_equal(bipolar_sigmoid(np.array([1e4, -1e4])), [1.0, -1.0])


@given(st.floats(-50, 50))
def test_sigmoid_range_and_pi_bounds(z):
    s = bipolar_sigmoid(np.array([z]))[0]
    assert -1 <= s <= 1
    assert 0 <= s * s < 1 or abs(z) > 30  # saturates to exactly +-1 only far out
    assert s == pytest.approx(2 / (1 + math.exp(-z)) - 1, abs=1e-12)


def test_forward_examples(rng):
    net = make_net(rng)
    zero_w = IdentifierNet(np.zeros_like(net.W), net.V, net.a_c, 1, 1)
    np.testing.assert_array_equal(zero_w.forward([0.3, -2], [1.5]), [0, 0])
    np.testing.assert_array_equal(net.forward([0, 0], [0]), [0, 0])
    x, u = np.array([0.4, -0.7]), np.array([1.1])
    xb = [0.4, -0.7, 1.1]
    hidden = [2 / (1 + math.exp(-sum(net.V[j, k] * xb[k] for k in range(3)))) - 1 for j in range(net.hidden)]
    expect = [sum(net.W[i, j] * hidden[j] for j in range(net.hidden)) for i in range(2)]
    np.testing.assert_allclose(net.forward(x, u), expect, rtol=1e-12)


def test_prediction_examples(rng):
    net = make_net(rng)
    net.W[:] = 0
    np.testing.assert_allclose(net.predict_state([1, 0], [5.0], 0.1), [0.9, 0])
    np.testing.assert_array_equal(net.predict_state([0, 0], [5.0], 0.1), [0, 0])
    np.testing.assert_allclose(net.predict_tracking_error([0, 0], [0.0], [0.1, 0], 0.1), [-0.1, 0])


def test_prediction_exact_when_net_is_the_plant(rng):
    net = make_net(rng)
    # a plant whose residual dynamics are exactly this network
    f = lambda x: net.a_c * x + net.forward(x, [0.0])
    plant = PlantModel("exact", 2, 1, f, lambda x: np.zeros((2, 1)))
    x = np.array([0.3, -0.2])
    x_next = step_euler(plant, SimState(0, x), np.zeros(1), 0.01).x
    np.testing.assert_allclose(net.predict_tracking_error(x, [0.0], x_next, 0.01), [0, 0], atol=1e-15)


def test_mixture_prediction(rng):
    net = make_net(rng, scale=1.0)
    x, u, dt = np.array([0.5, -1.0]), np.array([2.0]), 0.05
    np.testing.assert_array_equal(net.mixture_prediction(x, u, 1.0, dt), net.predict_state(x, u, dt))
    np.testing.assert_array_equal(net.mixture_prediction(x, u, 0.0, dt), net.predict_state(x, [0.0], dt))
    # affine in gamma: three points on one line
    p0, p5, p1 = (net.mixture_prediction(x, u, g, dt) for g in (0.0, 0.5, 1.0))
    np.testing.assert_allclose(p5, 0.5 * (p0 + p1), rtol=1e-14)


def test_mixture_matches_monte_carlo(rng):
    net = make_net(rng, scale=1.0)
    x, u, dt = np.array([0.5, -1.0]), np.array([2.0]), 0.05
    gates = DropoutChannel.from_seed(0.7, 3, "actuator").sample_many(10_000)
    samples = np.array([net.predict_state(x, u * g, dt) for g in gates])
    se = samples.std(axis=0) / np.sqrt(len(samples))
    assert np.all(np.abs(samples.mean(axis=0) - net.mixture_prediction(x, u, 0.7, dt)) <= 3 * se)


def test_zero_error_update_is_identity(rng):
    net = make_net(rng, rho=0.3)
    W, V = net.W.copy(), net.V.copy()
    net.update(np.zeros(2), np.array([0.2, 0.1, -0.5]), 1e-3)
    np.testing.assert_array_equal(net.W, W)
    np.testing.assert_array_equal(net.V, V)


def test_output_update_is_rank_one(rng):
    net = make_net(rng, eta=2.0)
    W0, V0 = net.W.copy(), net.V.copy()
    x_tilde, x_bar, dt = np.array([0.3, -0.1]), np.array([0.2, 0.4, -1.0]), 1e-2
    net.update(x_tilde, x_bar, dt)
    dW = net.W - W0
    assert np.linalg.matrix_rank(dW, tol=1e-12) == 1
    # direction (-A_c^-1 x~) sigma(V x_bar)^T, and A_c = -I here
    expect = dt * 2.0 * np.outer(x_tilde, bipolar_sigmoid(V0 @ x_bar))
    np.testing.assert_allclose(dW, expect, rtol=1e-9, atol=1e-15)


def test_rho_shrinks_weights(rng):
    net = make_net(rng, rho=5.0, eta=1e-12)
    before = np.linalg.norm(net.W)
    net.update(np.array([1.0, 1.0]), np.array([0.2, 0.4, -1.0]), 1e-2)
    assert np.linalg.norm(net.W) < before


def test_repeated_updates_reduce_error_on_frozen_sample(rng):
    net = make_net(rng, eta=0.5)
    x, u, dt = np.array([0.4, -0.3]), np.array([0.8]), 0.1
    target = np.array([0.45, -0.2])
    x_bar = np.concatenate((x, u))
    errors = []
    for _ in range(100):
        x_tilde = target - net.predict_state(x, u, dt)
        errors.append(np.linalg.norm(x_tilde))
        net.update(x_tilde, x_bar, dt)
    assert np.all(np.diff(errors) < 0)


def test_jacobian_examples(rng):
    net = make_net(rng)
    zero = IdentifierNet(np.zeros_like(net.W), net.V, net.a_c, 1, 1)
    np.testing.assert_array_equal(zero.input_jacobian([1, 2], [3]), np.zeros((2, 3)))
    J = net.input_jacobian([0.1, 0.2], [0.3])
    np.testing.assert_array_equal(net.control_jacobian([0.1, 0.2], [0.3]), J[:, 2:])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        n_u = int(rng.integers(1, 3))
        net = make_net(rng, n_u=n_u, hidden=int(rng.integers(2, 12)), scale=rng.uniform(0.1, 2.0))
        xb = rng.normal(size=2 + n_u)
        J = net.input_jacobian(xb[:2], xb[2:])
        fd = np.empty_like(J)
        for k in range(xb.size):
            d = np.zeros_like(xb)
            d[k] = 1e-6
            fd[:, k] = (net.forward((xb + d)[:2], (xb + d)[2:]) - net.forward((xb - d)[:2], (xb - d)[2:])) / 2e-6
        worst = max(worst, np.linalg.norm(J - fd) / np.linalg.norm(fd))
    assert worst < 1e-5


def test_nonfinite_update_raises(rng):
    net = make_net(rng)
    W = net.W.copy()
    with pytest.raises(IdentifierDiverged):
        net.update(np.array([np.inf, 0.0]), np.array([0.1, 0.1, 0.1]), 1e-3)
    np.testing.assert_array_equal(net.W, W)


def test_trained_prediction_error_small_on_simo():
    log = run_episode("simo", PRESETS["simo-tuned"].replace(gamma_bar_s=1.0, gamma_bar_c=1.0))
    after = log.t >= settle_time(log)
    assert np.nanmax(log.x_tilde_norm[after]) < 10 * log.dt


@pytest.mark.parametrize("gamma_c", [0.7, 0.8, 0.9, 1.0])
def test_prediction_error_bounded_under_dropout(gamma_c):
    log = run_episode("simo", PRESETS["simo-tuned"].replace(gamma_bar_c=gamma_c, horizon=10.0))
    late = log.t >= 5.0
    # one-step prediction error ceiling: dt * (1 - gamma) * |g| * |u| plus learning slack
    assert np.nanmax(log.x_tilde_norm[late]) < 0.05
