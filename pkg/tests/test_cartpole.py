import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dspl import CartpoleDiscretizer, CartpoleEnv, CartpoleParams, cartpole_step, discretize_cartpole
from d2dspl.cartpole import THETA_EDGES, THETA_DOT_EDGES, X_DOT_EDGES, X_EDGES

TWELVE_DEG = 12 * math.pi / 180


def euler_step_oracle(state, force, p=CartpoleParams()):
    # Independent scalar integration of the classic equations.
    x, x_dot, theta, theta_dot = state
    m_total = p.cart_mass + p.pole_mass
    pm_l = p.pole_mass * p.pole_half_length
    temp = (force + pm_l * theta_dot**2 * math.sin(theta)) / m_total
    theta_acc = (p.gravity * math.sin(theta) - math.cos(theta) * temp) / (
        p.pole_half_length * (4.0 / 3.0 - p.pole_mass * math.cos(theta) ** 2 / m_total)
    )
    x_acc = temp - pm_l * theta_acc * math.cos(theta) / m_total
    return (
        x + p.tau * x_dot,
        x_dot + p.tau * x_acc,
        theta + p.tau * theta_dot,
        theta_dot + p.tau * theta_acc,
    )


def test_push_right_from_rest_matches_hand_integration():
    out = cartpole_step((0.0, 0.0, 0.0, 0.0), 1)
    expected = euler_step_oracle((0.0, 0.0, 0.0, 0.0), 10.0)
    assert np.allclose(out.next_state, expected, atol=1e-15)
    # frozen values from the oracle
    assert out.next_state[1] == pytest.approx(0.19512195121951220, abs=1e-12)
    assert out.next_state[3] == pytest.approx(-0.29268292682926828, abs=1e-12)
    assert out.next_state[0] == 0.0 and out.next_state[2] == 0.0


def test_push_left_mirrors_push_right():
    right = cartpole_step((0.0, 0.0, 0.0, 0.0), 1).next_state
    left = cartpole_step((0.0, 0.0, 0.0, 0.0), 0).next_state
    assert np.array_equal(left, -right)


def test_mirror_trajectories_from_symmetric_start():
    s_r = np.zeros(4)
    s_l = np.zeros(4)
    for step in range(40):
        s_r = cartpole_step(s_r, (step % 2)).next_state
        s_l = cartpole_step(s_l, 1 - (step % 2)).next_state
        assert np.allclose(s_l, -s_r, atol=1e-12)


@given(st.integers(0, 1),
       st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
       st.floats(-0.2, 0.2), st.floats(-2.0, 2.0))
def test_random_states_match_oracle(action, x, x_dot, theta, theta_dot):
    state = (x, x_dot, theta, theta_dot)
    out = cartpole_step(state, action)
    force = 10.0 if action == 1 else -10.0
    assert np.allclose(out.next_state, euler_step_oracle(state, force), rtol=1e-14)


def test_reward_is_one_per_step():
    env = CartpoleEnv()
    env.reset(np.random.default_rng(0))
    rng = np.random.default_rng(1)
    while not env.terminal:
        assert env.step(int(rng.integers(2))).reward == 1.0


def test_failure_termination_bounds():
    out = cartpole_step((2.39, 5.0, 0.0, 0.0), 1)  # cart exits +2.4
    assert out.next_state[0] > 2.4 and out.terminal
    out = cartpole_step((0.0, 0.0, 0.209, 0.3), 1)  # pole passes 12 degrees
    assert out.next_state[2] > TWELVE_DEG and out.terminal


def test_success_termination_at_target_steps():
    env = CartpoleEnv(CartpoleParams(target_steps=25))
    env.reset(np.random.default_rng(2))
    total = 0.0
    rng = np.random.default_rng(3)
    while not env.terminal:
        # alternate pushes keep the pole up long enough for a 25-step target
        total += env.step(int(rng.integers(2))).reward
        if env.steps >= 25:
            break
    if env.steps == 25:
        assert env.terminal and total == 25.0
        assert env.is_success(env.episode_score(total, env.steps))


def test_reset_within_init_band():
    env = CartpoleEnv()
    for seed in range(30):
        state = env.reset(np.random.default_rng(seed))
        assert np.all(np.abs(state) <= 0.05)


# --- discretizer -----------------------------------------------------------


def oracle_box_index(state):
    # Enumerate the declared boundaries directly: a value belongs to the
    # bin counting how many edges it has reached.
    def bin_of(v, edges):
        return sum(1 for e in edges if v >= e)

    x, x_dot, theta, theta_dot = state
    i = bin_of(x, X_EDGES)
    i = i * 3 + bin_of(x_dot, X_DOT_EDGES)
    i = i * 6 + bin_of(theta, THETA_EDGES)
    return i * 3 + bin_of(theta_dot, THETA_DOT_EDGES)


def test_central_state_box_matches_enumeration():
    assert discretize_cartpole((0.0, 0.0, 0.0, 0.0)) == oracle_box_index((0.0, 0.0, 0.0, 0.0))
    assert discretize_cartpole((0.0, 0.0, 0.0, 0.0)) == 82  # frozen from the oracle


def test_discretizer_deterministic():
    state = (0.5, -0.3, 0.02, -0.5)
    assert discretize_cartpole(state) == discretize_cartpole(state)


def test_theta_sweep_visits_six_bins_in_order():
    indices = [
        discretize_cartpole((0.0, 0.0, theta, 0.0))
        for theta in np.linspace(-TWELVE_DEG, TWELVE_DEG, 2001)
    ]
    assert len(set(indices)) == 6
    assert all(b >= a for a, b in zip(indices, indices[1:]))


@given(st.floats(-2.4, 2.4), st.floats(-10.0, 10.0),
       st.floats(-TWELVE_DEG, TWELVE_DEG), st.floats(-10.0, 10.0))
def test_every_in_bounds_state_maps_into_162(x, x_dot, theta, theta_dot):
    idx = discretize_cartpole((x, x_dot, theta, theta_dot))
    assert 0 <= idx < 162
    assert idx == oracle_box_index((x, x_dot, theta, theta_dot))


def test_out_of_bounds_clamps_to_outermost_bins():
    assert discretize_cartpole((1e6, 0, 0, 0)) == discretize_cartpole((2.0, 0, 0, 0))
    assert discretize_cartpole((-1e6, 0, 0, 0)) == discretize_cartpole((-2.0, 0, 0, 0))


def test_adjacent_states_within_a_box_share_the_index():
    rng = np.random.default_rng(4)
    for _ in range(200):
        state = rng.uniform([-2.4, -3, -TWELVE_DEG, -3], [2.4, 3, TWELVE_DEG, 3])
        nudge = state + rng.uniform(-1e-9, 1e-9, size=4)
        assert discretize_cartpole(state) == discretize_cartpole(nudge)


def test_batch_indices_match_scalar():
    rng = np.random.default_rng(5)
    states = rng.uniform([-3, -4, -0.3, -4], [3, 4, 0.3, 4], size=(500, 4))
    disc = CartpoleDiscretizer()
    batch = disc.indices_batch(states)
    assert np.array_equal(batch, [disc(s) for s in states])


def test_all_162_boxes_reachable():
    disc = CartpoleDiscretizer()
    rng = np.random.default_rng(6)
    seen = {disc(s) for s in rng.uniform([-2.4, -3, -TWELVE_DEG, -3],
                                         [2.4, 3, TWELVE_DEG, 3], size=(20000, 4))}
    assert seen == set(range(162))
