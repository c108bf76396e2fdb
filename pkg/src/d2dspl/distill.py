"""Distillation of episode records into a supervised training set.

The best episodes (by total reward) are consolidated per discrete
state: continuous state variables are summed and divided by the visit
count, giving one averaged input row per state that was ever visited.
The target for each row is the action the learned policy prefers in
that state.  States never visited are dropped, so the dataset has at
most one row per discrete state.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actor_critic import Buffer


@dataclass(frozen=True)
class TrainingDataset:
    """Averaged inputs with preferred-action targets.

    source_states records which discrete state produced each row
    (strictly increasing, for provenance and reproducibility).
    """

    inputs: np.ndarray  # (n, n_state_vars)
    targets: np.ndarray  # (n,) action ids
    source_states: np.ndarray  # (n,) discrete state indices

    def __post_init__(self):
        if not (len(self.inputs) == len(self.targets) == len(self.source_states)):
            raise ValueError("inputs, targets, and source_states must have equal length")
        if np.any(np.diff(self.source_states) <= 0):
            raise ValueError("source_states must be strictly increasing")

    def __len__(self) -> int:
        return len(self.targets)


def select_top_episodes(buffer: Buffer, fraction: float) -> Buffer:
    """The floor(fraction * len) records with the highest total reward.

    At least one record is always kept.  Ties on total reward are broken
    in favour of earlier episodes.
    """
    if not buffer:
        raise ValueError("cannot select episodes from an empty buffer")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    k = max(1, int(fraction * len(buffer)))
    order = sorted(range(len(buffer)), key=lambda i: -buffer[i].r_total)
    return [buffer[i] for i in sorted(order[:k])]


def consolidate(subset: Buffer) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise sums of per-state aggregates across the records.

    Returns (cons_m_sv, cons_m_sc): the summed state-variable matrix and
    visit-count vector, not yet averaged.
    """
    if not subset:
        raise ValueError("cannot consolidate an empty record subset")
    n_states = subset[0].n_states
    n_sv = subset[0].n_state_vars
    for rec in subset:
        if rec.n_states != n_states or rec.n_state_vars != n_sv:
            raise ValueError(
                f"record dimensions ({rec.n_states}, {rec.n_state_vars}) do not match "
                f"({n_states}, {n_sv})"
            )
    cons_m_sv = np.zeros((n_states, n_sv))
    cons_m_sc = np.zeros(n_states, dtype=np.int64)
    for rec in subset:
        cons_m_sv[rec.states] += rec.sums
        cons_m_sc[rec.states] += rec.counts
    return cons_m_sv, cons_m_sc


def build_dataset(cons_m_sv: np.ndarray, cons_m_sc: np.ndarray, theta: np.ndarray) -> TrainingDataset:
    """Average the consolidated sums and attach preferred-action targets.

    Rows for unvisited states are dropped.  Targets are the argmax of
    the preference row, lowest action index on ties.
    """
    if len(cons_m_sv) != len(cons_m_sc) or len(theta) != len(cons_m_sc):
        raise ValueError("consolidated arrays and theta must agree on the state count")
    visited = np.flatnonzero(cons_m_sc)
    inputs = cons_m_sv[visited] / cons_m_sc[visited, None]
    targets = np.argmax(theta[visited], axis=1)
    return TrainingDataset(inputs, targets, visited)


def distill(buffer: Buffer, theta: np.ndarray, fraction: float = 0.05) -> TrainingDataset:
    """Top-episode selection, consolidation, and dataset construction."""
    cons_m_sv, cons_m_sc = consolidate(select_top_episodes(buffer, fraction))
    return build_dataset(cons_m_sv, cons_m_sc, theta)


def save_dataset(dataset: TrainingDataset, path) -> None:
    """Write the dataset as CSV with full-precision decimals."""
    n_sv = dataset.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_index", *[f"s_{j}" for j in range(n_sv)], "target"])
        for state, row, target in zip(dataset.source_states, dataset.inputs, dataset.targets):
            writer.writerow([int(state), *[repr(float(v)) for v in row], int(target)])


def load_dataset(path) -> TrainingDataset:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_sv = len(header) - 2
        states, inputs, targets = [], [], []
        for row in reader:
            states.append(int(row[0]))
            inputs.append([float(v) for v in row[1 : 1 + n_sv]])
            targets.append(int(row[-1]))
    return TrainingDataset(
        np.array(inputs, dtype=float).reshape(len(states), n_sv),
        np.array(targets, dtype=np.int64),
        np.array(states, dtype=np.int64),
    )
