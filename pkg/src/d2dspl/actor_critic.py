"""Tabular actor-critic with eligibility traces over a discretized space.

The actor keeps a matrix of numerical preferences (one row per discrete
state, one column per action) turned into probabilities by a softmax;
the critic keeps one value weight per discrete state.  Both are updated
from a shared TD error through accumulating eligibility traces.

Alongside learning, every episode aggregates the continuous states seen
in each discrete state (sums and visit counts) plus the episode's total
reward.  These per-episode records feed the supervised distillation
stage; see :mod:`d2dspl.distill`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .envcore import Environment


@dataclass(frozen=True, slots=True)
class Hyperparams:
    """Step sizes, trace decays, and discount for the learner."""

    alpha_theta: float = 0.05
    alpha_w: float = 0.1
    lambda_theta: float = 0.8
    lambda_w: float = 0.8
    gamma: float = 0.99

    def __post_init__(self):
        if self.alpha_theta <= 0 or self.alpha_w <= 0:
            raise ValueError("step sizes must be strictly positive")
        for name in ("lambda_theta", "lambda_w"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


@dataclass(slots=True)
class Traces:
    """Per-episode eligibility state: trace arrays and the discount accumulator."""

    z_theta: np.ndarray
    z_w: np.ndarray
    i: float

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "Traces":
        return cls(np.zeros((n_states, n_actions)), np.zeros(n_states), 1.0)


@dataclass(frozen=True, slots=True)
class StepDiagnostics:
    delta: float
    reward: float


@dataclass(frozen=True)
class EpisodeRecord:
    """One episode's aggregates: total reward plus per-state sums/counts.

    Visits are stored sparsely (only states actually seen); the dense
    m_sv / m_sc views reconstruct the full per-state matrices.
    """

    r_total: float
    n_states: int
    n_state_vars: int
    states: np.ndarray  # sorted unique visited state indices, shape (k,)
    counts: np.ndarray  # visit counts per visited state, shape (k,)
    sums: np.ndarray  # summed continuous states, shape (k, n_state_vars)

    @classmethod
    def from_dense(cls, r_total: float, m_sv: np.ndarray, m_sc: np.ndarray) -> "EpisodeRecord":
        visited = np.flatnonzero(m_sc)
        return cls(
            r_total=float(r_total),
            n_states=len(m_sc),
            n_state_vars=m_sv.shape[1],
            states=visited.copy(),
            counts=m_sc[visited].astype(np.int64),
            sums=m_sv[visited].copy(),
        )

    @property
    def m_sv(self) -> np.ndarray:
        dense = np.zeros((self.n_states, self.n_state_vars))
        dense[self.states] = self.sums
        return dense

    @property
    def m_sc(self) -> np.ndarray:
        dense = np.zeros(self.n_states, dtype=np.int64)
        dense[self.states] = self.counts
        return dense

    @property
    def steps(self) -> int:
        return int(self.counts.sum())


Buffer = list[EpisodeRecord]


def policy_probabilities(theta: np.ndarray, s: int) -> np.ndarray:
    """Softmax of the preference row for state s (overflow-safe)."""
    row = theta[s]
    e = np.exp(row - row.max())
    return e / e.sum()


def sample_action(probs, rng: np.random.Generator) -> int:
    """Draw an action index from a probability vector."""
    r = rng.random()
    acc = 0.0
    for a, p in enumerate(probs):
        acc += p
        if r < acc:
            return a
    return len(probs) - 1


def td_update(
    theta: np.ndarray,
    w: np.ndarray,
    traces: Traces,
    s: int,
    a: int,
    reward: float,
    s_next: int | None,
    hyper: Hyperparams,
    probs: np.ndarray = None,
) -> StepDiagnostics:
    """One actor-critic update for the transition (s, a, reward, s_next).

    ``s_next is None`` marks a terminal transition, whose value is
    defined as zero.  theta, w, and traces are updated in place.  The
    action probabilities may be passed in to avoid recomputing the
    softmax used for sampling; they must come from the current theta.
    """
    v_next = 0.0 if s_next is None else w[s_next]
    delta = reward + hyper.gamma * v_next - w[s]
    if not math.isfinite(delta):
        raise FloatingPointError(
            f"non-finite TD error at s={s}, a={a}, r={reward}: delta={delta}"
        )
    if probs is None:
        probs = policy_probabilities(theta, s)

    traces.z_w *= hyper.gamma * hyper.lambda_w
    traces.z_w[s] += 1.0
    traces.z_theta *= hyper.gamma * hyper.lambda_theta
    row = traces.z_theta[s]
    row -= traces.i * probs
    row[a] += traces.i

    w += hyper.alpha_w * delta * traces.z_w
    theta += hyper.alpha_theta * delta * traces.z_theta
    traces.i *= hyper.gamma
    return StepDiagnostics(float(delta), float(reward))


def run_reinforcement_phase(
    env: Environment,
    discretizer,
    hyper: Hyperparams,
    n_episodes: int,
    rng: np.random.Generator,
    theta: np.ndarray = None,
    w: np.ndarray = None,
) -> tuple[np.ndarray, np.ndarray, Buffer]:
    """Run n_episodes of actor-critic learning on the environment.

    Per step: discretize the current state, sample an action from the
    softmax policy, step the environment, log the continuous state into
    the episode aggregates, and apply the TD update.  Passing theta/w
    continues learning from an existing policy (they are copied, not
    mutated).  Returns the final parameters and one record per episode.
    """
    n_ds = env.spec.n_discrete_states
    n_a = env.spec.n_actions
    n_sv = env.spec.n_state_vars
    theta = np.zeros((n_ds, n_a)) if theta is None else np.array(theta, dtype=float)
    w = np.zeros(n_ds) if w is None else np.array(w, dtype=float)
    if theta.shape != (n_ds, n_a) or w.shape != (n_ds,):
        raise ValueError(
            f"parameter shapes {theta.shape}/{w.shape} do not match "
            f"environment ({n_ds} states, {n_a} actions)"
        )

    buffer: Buffer = []
    m_sv = np.zeros((n_ds, n_sv))
    m_sc = np.zeros(n_ds, dtype=np.int64)
    for _ in range(n_episodes):
        state = env.reset(rng)
        s = discretizer(state)
        m_sv.fill(0.0)
        m_sc.fill(0)
        traces = Traces.zeros(n_ds, n_a)
        r_total = 0.0
        terminal = False
        while not terminal:
            probs = policy_probabilities(theta, s)
            a = sample_action(probs, rng)
            outcome = env.step(a)
            m_sv[s] += state
            m_sc[s] += 1
            r_total += outcome.reward
            s_next = None if outcome.terminal else discretizer(outcome.next_state)
            td_update(theta, w, traces, s, a, outcome.reward, s_next, hyper, probs=probs)
            state = outcome.next_state
            s = s_next
            terminal = outcome.terminal
        buffer.append(EpisodeRecord.from_dense(r_total, m_sv, m_sc))
    return theta, w, buffer
