"""Single-hidden-layer softmax classifier trained by full-batch descent.

The distilled dataset is tiny (at most one row per discrete state), so
the whole batch is presented at once: plain gradient descent on the mean
cross-entropy, with the learning rate halved whenever a step would
increase the loss.  Inputs are z-scored with statistics stored in the
model, making the trained network a self-contained controller.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distill import TrainingDataset

STD_FLOOR = 1e-8  # below this a feature is treated as constant


@dataclass(frozen=True, slots=True)
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 0.1
    seed: int = 0
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs and learning_rate must be strictly positive")
        if self.loss != "cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")


@dataclass(frozen=True)
class MlpModel:
    """Weights, biases, and the input normalization statistics."""

    w1: np.ndarray  # (input_dim, hidden_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (hidden_dim, output_dim)
    b2: np.ndarray  # (output_dim,)
    mean: np.ndarray  # (input_dim,)
    std: np.ndarray  # (input_dim,), strictly positive
    activation: str = "tanh"
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        d_in, d_h = self.w1.shape
        if self.b1.shape != (d_h,) or self.w2.shape[0] != d_h:
            raise ValueError("hidden layer dimensions are inconsistent")
        if self.b2.shape != (self.w2.shape[1],):
            raise ValueError("output layer dimensions are inconsistent")
        if self.mean.shape != (d_in,) or self.std.shape != (d_in,):
            raise ValueError("normalizer dimensions do not match the input layer")
        if np.any(self.std <= 0):
            raise ValueError("normalizer std entries must be strictly positive")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[1]


def fit_normalizer(dataset: TrainingDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std, guarding constant columns."""
    if len(dataset) < 1:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    mean = dataset.inputs.mean(axis=0)
    std = dataset.inputs.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return mean, std


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_batch(model: MlpModel, states: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of raw (unnormalized) states."""
    states = np.asarray(states, dtype=float)
    if states.shape[-1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} state variables, got {states.shape[-1]}")
    xn = (states - model.mean) / model.std
    hidden = np.tanh(xn @ model.w1 + model.b1)
    return _softmax(hidden @ model.w2 + model.b2)


def forward(model: MlpModel, state) -> np.ndarray:
    """Class probabilities for one raw state vector."""
    return forward_batch(model, np.asarray(state, dtype=float).reshape(-1))


def predict(model: MlpModel, state) -> int:
    """Most probable action, lowest index on ties."""
    return int(np.argmax(forward(model, state)))


def _loss_and_grads(params, xn, targets, want_grads=True):
    """Mean cross-entropy (and parameter gradients) on normalized inputs."""
    w1, b1, w2, b2 = params
    n = len(xn)
    hidden = np.tanh(xn @ w1 + b1)
    logits = hidden @ w2 + b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(lse - shifted[np.arange(n), targets]))
    if not want_grads:
        return loss, None
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    dlogits = probs
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    dw2 = hidden.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhidden = (dlogits @ w2.T) * (1.0 - hidden * hidden)
    dw1 = xn.T @ dhidden
    db1 = dhidden.sum(axis=0)
    return loss, (dw1, db1, dw2, db2)


def train(dataset: TrainingDataset, hidden_dim: int, config: TrainConfig = TrainConfig()) -> MlpModel:
    """Fit the classifier to the distilled dataset.

    Weights start uniform in +-1/sqrt(fan_in) from the seeded stream,
    biases at zero.  Each epoch takes one full-batch step; if the step
    would raise the loss the learning rate is halved (repeatedly) before
    stepping, which keeps the recorded loss non-increasing.  Training is
    bit-deterministic for a given dataset and seed.
    """
    if len(dataset) < 1:
        raise ValueError("cannot train on an empty dataset")
    if hidden_dim <= 0:
        raise ValueError("hidden_dim must be strictly positive")
    n_in = dataset.inputs.shape[1]
    n_out = int(dataset.targets.max()) + 1
    rng = np.random.default_rng(config.seed)
    params = [
        rng.uniform(-1.0, 1.0, size=(n_in, hidden_dim)) / math.sqrt(n_in),
        np.zeros(hidden_dim),
        rng.uniform(-1.0, 1.0, size=(hidden_dim, n_out)) / math.sqrt(hidden_dim),
        np.zeros(n_out),
    ]
    mean, std = fit_normalizer(dataset)
    xn = (dataset.inputs - mean) / std
    targets = dataset.targets

    lr = config.learning_rate
    loss, _ = _loss_and_grads(params, xn, targets, want_grads=False)
    if not math.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss before epoch 0: {loss}")
    epochs_run = 0
    for epoch in range(config.epochs):
        _, grads = _loss_and_grads(params, xn, targets)
        while True:
            candidate = [p - lr * g for p, g in zip(params, grads)]
            cand_loss, _ = _loss_and_grads(candidate, xn, targets, want_grads=False)
            if not math.isfinite(cand_loss):
                if lr < 1e-14:
                    raise FloatingPointError(f"non-finite training loss at epoch {epoch}")
                lr *= 0.5
                continue
            if cand_loss <= loss or lr < 1e-14:
                break
            lr *= 0.5
        if cand_loss > loss:
            break  # at the numerical floor; further epochs cannot improve
        params, loss = candidate, cand_loss
        epochs_run = epoch + 1

    model = MlpModel(*params, mean=mean, std=std)
    accuracy = float(np.mean(
        np.argmax(forward_batch(model, dataset.inputs), axis=1) == targets
    ))
    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "epochs_run": epochs_run,
        "final_loss": loss,
        "final_accuracy": accuracy,
    }
    return MlpModel(*params, mean=mean, std=std, train_meta=meta)


def gradient_check(model: MlpModel, dataset: TrainingDataset, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    xn = (dataset.inputs - model.mean) / model.std
    targets = dataset.targets
    params = [model.w1.copy(), model.b1.copy(), model.w2.copy(), model.b2.copy()]
    _, grads = _loss_and_grads(params, xn, targets)
    worst = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            saved = flat_p[i]
            flat_p[i] = saved + epsilon
            up, _ = _loss_and_grads(params, xn, targets, want_grads=False)
            flat_p[i] = saved - epsilon
            down, _ = _loss_and_grads(params, xn, targets, want_grads=False)
            flat_p[i] = saved
            numeric = (up - down) / (2.0 * epsilon)
            rel = abs(flat_g[i] - numeric) / max(abs(flat_g[i]) + abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


def save_model(model: MlpModel, path) -> None:
    doc = {
        "dims": {"input": model.input_dim, "hidden": model.hidden_dim, "output": model.output_dim},
        "activation": model.activation,
        "normalizer": {"mean": model.mean.tolist(), "std": model.std.tolist()},
        "hidden": {"weights": model.w1.tolist(), "bias": model.b1.tolist()},
        "output": {"weights": model.w2.tolist(), "bias": model.b2.tolist()},
        "train_meta": model.train_meta,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> MlpModel:
    doc = json.loads(Path(path).read_text())
    model = MlpModel(
        w1=np.array(doc["hidden"]["weights"], dtype=float),
        b1=np.array(doc["hidden"]["bias"], dtype=float),
        w2=np.array(doc["output"]["weights"], dtype=float),
        b2=np.array(doc["output"]["bias"], dtype=float),
        mean=np.array(doc["normalizer"]["mean"], dtype=float),
        std=np.array(doc["normalizer"]["std"], dtype=float),
        activation=doc["activation"],
        train_meta=doc.get("train_meta", {}),
    )
    dims = doc["dims"]
    if (model.input_dim, model.hidden_dim, model.output_dim) != (
        dims["input"], dims["hidden"], dims["output"]
    ):
        raise ValueError("model file dims do not match the stored arrays")
    return model


class MlpController:
    """Controller view of a trained model: state -> most probable action."""

    def __init__(self, model: MlpModel):
        self.model = model

    def act(self, state) -> int:
        return predict(self.model, state)

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.argmax(forward_batch(self.model, states), axis=1)
