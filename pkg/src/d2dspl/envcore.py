"""Environment, discretizer, and controller contracts.

Every environment in this package exposes the same minimal surface:
``reset(rng)`` starts an episode from an explicitly seeded random stream
and ``step(action)`` advances the dynamics by one timestep.  Environments
never touch ambient entropy, so a run is a pure function of its seeds.

Controllers are plain ``state -> action`` maps.  Tabular greedy policies
and trained classifiers both satisfy the same protocol, which keeps the
evaluation harness agnostic about what it is scoring.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


class EnvUsageError(RuntimeError):
    """Raised when the reset/step protocol is violated by the caller."""


@dataclass(frozen=True, slots=True)
class EnvironmentSpec:
    """Static description of an environment instance.

    Attributes:
        name: short identifier, e.g. ``"cartpole"``.
        n_state_vars: length of the continuous state vector.
        n_actions: number of discrete actions.
        n_discrete_states: size of the discretized state space the
            environment is paired with.
        max_steps: hard per-episode step limit.
    """

    name: str
    n_state_vars: int
    n_actions: int
    n_discrete_states: int
    max_steps: int

    def __post_init__(self):
        for field in ("n_state_vars", "n_actions", "n_discrete_states", "max_steps"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be strictly positive, got {getattr(self, field)}")


@dataclass(frozen=True, slots=True)
class StepOutcome:
    """Result of one environment step."""

    next_state: np.ndarray
    reward: float
    terminal: bool


class Environment(ABC):
    """Base class for episodic environments with injected randomness.

    Subclasses set ``self.spec`` in their constructor and implement the
    episode dynamics.  The base class tracks the step counter and the
    terminal flag and enforces the usage contract: no stepping before
    reset, after terminal, or with an out-of-range action.

    Instances are single-thread confined; run one instance per worker.
    """

    spec: EnvironmentSpec

    def __init__(self):
        self._steps = 0
        self._terminal = True  # unusable until reset()

    @property
    def steps(self) -> int:
        """Steps taken in the current episode."""
        return self._steps

    @property
    def terminal(self) -> bool:
        return self._terminal

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Start a new episode; returns the first continuous state."""
        self._steps = 0
        self._terminal = False
        return self._do_reset(rng)

    def step(self, action: int) -> StepOutcome:
        """Advance one timestep and return (next_state, reward, terminal)."""
        if self._terminal:
            raise EnvUsageError("step() called on a terminal episode; call reset() first")
        if not 0 <= action < self.spec.n_actions:
            raise EnvUsageError(
                f"action {action} out of range for {self.spec.name} "
                f"(expected 0..{self.spec.n_actions - 1})"
            )
        outcome = self._do_step(action)
        self._steps += 1
        self._terminal = outcome.terminal
        return outcome

    @abstractmethod
    def _do_reset(self, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def _do_step(self, action: int) -> StepOutcome: ...

    def episode_score(self, total_reward: float, steps: int) -> float:
        """Evaluation score of a finished episode; default is total reward."""
        return total_reward

    def is_success(self, score: float) -> bool:
        """Whether an evaluation score counts as solving the task."""
        return False


@runtime_checkable
class Controller(Protocol):
    """Deterministic state -> action map used at evaluation time."""

    def act(self, state: np.ndarray) -> int: ...


@runtime_checkable
class BatchController(Controller, Protocol):
    """Controller that can also act on a batch of states at once."""

    def act_batch(self, states: np.ndarray) -> np.ndarray: ...


class RandomController:
    """Uniform-random baseline controller with its own seeded stream."""

    def __init__(self, n_actions: int, seed: int = 0):
        if n_actions <= 0:
            raise ValueError("n_actions must be strictly positive")
        self.n_actions = n_actions
        self._rng = np.random.default_rng(seed)

    def act(self, state: np.ndarray) -> int:
        return int(self._rng.integers(self.n_actions))

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return self._rng.integers(self.n_actions, size=len(states))
