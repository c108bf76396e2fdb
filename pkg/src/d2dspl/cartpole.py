"""Cart-pole dynamics and the 162-box state discretizer.

The dynamics follow the classic forced-inverted-pendulum equations with
explicit Euler integration and the widely used constants (gravity 9.8,
cart mass 1.0, pole mass 0.1, half-length 0.5, force +-10 N, tau 0.02 s).
Reward is +1 per step; an episode ends when the cart leaves +-2.4 m, the
pole passes +-12 degrees, or the step target is reached (success).
"""

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .envcore import Environment, EnvironmentSpec, StepOutcome

TWELVE_DEGREES = 12.0 * math.pi / 180.0

PUSH_LEFT = 0
PUSH_RIGHT = 1


@dataclass(frozen=True, slots=True)
class CartpoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    force_mag: float = 10.0
    tau: float = 0.02
    x_threshold: float = 2.4
    theta_threshold: float = TWELVE_DEGREES
    target_steps: int = 100_000
    init_band: float = 0.05  # |initial value| bound for each state variable

    def __post_init__(self):
        for field in ("gravity", "cart_mass", "pole_mass", "pole_half_length",
                      "force_mag", "tau", "x_threshold", "theta_threshold"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be strictly positive")
        if self.target_steps <= 0:
            raise ValueError("target_steps must be strictly positive")


def cartpole_step(state, action: int, params: CartpoleParams = CartpoleParams()):
    """One Euler step of the cart-pole equations.

    ``state`` is (x, x_dot, theta, theta_dot); ``action`` 0 pushes left,
    1 pushes right.  Returns a StepOutcome with reward 1 and terminal set
    when the next state leaves the position or angle bounds.  The step
    target is tracked by CartpoleEnv, not here.
    """
    x, x_dot, theta, theta_dot = (float(v) for v in state)
    force = params.force_mag if action == PUSH_RIGHT else -params.force_mag
    x, x_dot, theta, theta_dot = _advance(x, x_dot, theta, theta_dot, force, params)
    terminal = abs(x) > params.x_threshold or abs(theta) > params.theta_threshold
    return StepOutcome(np.array([x, x_dot, theta, theta_dot]), 1.0, terminal)


def _advance(x, x_dot, theta, theta_dot, force, params):
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    total_mass = params.cart_mass + params.pole_mass
    polemass_length = params.pole_mass * params.pole_half_length
    temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.pole_half_length * (4.0 / 3.0 - params.pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
    return (
        x + params.tau * x_dot,
        x_dot + params.tau * x_acc,
        theta + params.tau * theta_dot,
        theta_dot + params.tau * theta_acc,
    )


class CartpoleEnv(Environment):
    """Episodic cart-pole with randomized starts and a success target.

    Initial states draw each variable uniformly from the init band.
    Reaching ``target_steps`` terminates the episode as a success with
    cumulative reward equal to the target.
    """

    def __init__(self, params: CartpoleParams = CartpoleParams(), n_discrete_states: int = 162):
        super().__init__()
        self.params = params
        self.spec = EnvironmentSpec(
            name="cartpole",
            n_state_vars=4,
            n_actions=2,
            n_discrete_states=n_discrete_states,
            max_steps=params.target_steps,
        )
        self._x = self._x_dot = self._theta = self._theta_dot = 0.0

    def _do_reset(self, rng: np.random.Generator) -> np.ndarray:
        band = self.params.init_band
        self._x, self._x_dot, self._theta, self._theta_dot = rng.uniform(-band, band, size=4)
        return self.state

    @property
    def state(self) -> np.ndarray:
        return np.array([self._x, self._x_dot, self._theta, self._theta_dot])

    def _do_step(self, action: int) -> StepOutcome:
        p = self.params
        force = p.force_mag if action == PUSH_RIGHT else -p.force_mag
        self._x, self._x_dot, self._theta, self._theta_dot = _advance(
            self._x, self._x_dot, self._theta, self._theta_dot, force, p
        )
        failed = abs(self._x) > p.x_threshold or abs(self._theta) > p.theta_threshold
        succeeded = not failed and self._steps + 1 >= p.target_steps
        return StepOutcome(self.state, 1.0, failed or succeeded)

    def episode_score(self, total_reward: float, steps: int) -> float:
        return total_reward

    def is_success(self, score: float) -> bool:
        return score >= self.params.target_steps

    def rollout_batch(self, act_batch, seeds) -> tuple[np.ndarray, np.ndarray]:
        """Run one episode per seed in lockstep with a batch controller.

        Semantically identical to stepping episodes one by one through
        reset/step; vectorizing across runs is what makes 100k-step
        evaluation episodes affordable.  Returns (total_rewards, steps).
        """
        p = self.params
        n = len(seeds)
        states = np.stack(
            [np.random.default_rng(s).uniform(-p.init_band, p.init_band, size=4) for s in seeds]
        )
        steps = np.zeros(n, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        total_mass = p.cart_mass + p.pole_mass
        polemass_length = p.pole_mass * p.pole_half_length
        for _ in range(p.target_steps):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            s = states[idx]
            actions = np.asarray(act_batch(s))
            force = np.where(actions == PUSH_RIGHT, p.force_mag, -p.force_mag)
            x, x_dot, theta, theta_dot = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
            sin_t = np.sin(theta)
            cos_t = np.cos(theta)
            temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass
            theta_acc = (p.gravity * sin_t - cos_t * temp) / (
                p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass)
            )
            x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
            nxt = np.empty_like(s)
            nxt[:, 0] = x + p.tau * x_dot
            nxt[:, 1] = x_dot + p.tau * x_acc
            nxt[:, 2] = theta + p.tau * theta_dot
            nxt[:, 3] = theta_dot + p.tau * theta_acc
            states[idx] = nxt
            steps[idx] += 1
            failed = (np.abs(nxt[:, 0]) > p.x_threshold) | (np.abs(nxt[:, 2]) > p.theta_threshold)
            done = failed | (steps[idx] >= p.target_steps)
            active[idx[done]] = False
        return steps.astype(float), steps


# Canonical boxes partition: 3 positions x 3 velocities x 6 angles x 3
# angular velocities = 162 cells.  Interior edges only; values beyond the
# outermost edge fall into the outermost bin, so the map is total.
X_EDGES = (-0.8, 0.8)
X_DOT_EDGES = (-0.5, 0.5)
THETA_EDGES = tuple(d * math.pi / 180.0 for d in (-6.0, -1.0, 0.0, 1.0, 6.0))
THETA_DOT_EDGES = tuple(d * math.pi / 180.0 for d in (-50.0, 50.0))


class CartpoleDiscretizer:
    """Maps a cart-pole state to one of 162 box indices."""

    n_states = 162

    _edges = (X_EDGES, X_DOT_EDGES, THETA_EDGES, THETA_DOT_EDGES)
    _dims = (3, 3, 6, 3)

    def __call__(self, state) -> int:
        x, x_dot, theta, theta_dot = state
        i = bisect_right(X_EDGES, x)
        i = i * 3 + bisect_right(X_DOT_EDGES, x_dot)
        i = i * 6 + bisect_right(THETA_EDGES, theta)
        return i * 3 + bisect_right(THETA_DOT_EDGES, theta_dot)

    def indices_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        idx = np.searchsorted(X_EDGES, states[:, 0], side="right")
        idx = idx * 3 + np.searchsorted(X_DOT_EDGES, states[:, 1], side="right")
        idx = idx * 6 + np.searchsorted(THETA_EDGES, states[:, 2], side="right")
        return idx * 3 + np.searchsorted(THETA_DOT_EDGES, states[:, 3], side="right")


def discretize_cartpole(state) -> int:
    """Box index in [0, 162) for a cart-pole state (clamping at the edges)."""
    return CartpoleDiscretizer()(state)
