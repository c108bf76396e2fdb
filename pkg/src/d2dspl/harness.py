"""Experiment orchestration: seeded trials, evaluation, and persistence.

A trial trains a discrete policy for n episodes (discrete-n), continues
it for another n (discrete-2n), and distills the first phase's episodes
into a classifier (the distilled controller).  All three are evaluated
on shared held-out seeds and the per-run scores, summary tables, and
phase timings are written as plain CSV.  Everything except wall-clock
timing is a pure function of (config, trial seed).
"""

import csv
import json
import statistics
import time
import traceback
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import cartpole, pursuit
from .actor_critic import Buffer, EpisodeRecord, Hyperparams, policy_probabilities, run_reinforcement_phase
from .classifier import MlpController, TrainConfig, save_model, train
from .distill import distill, save_dataset
from .envcore import Environment

METHODS = ("discrete_n", "discrete_2n", "d2dspl")


class ConfigError(ValueError):
    """Invalid run configuration (maps to CLI exit code 1)."""


@dataclass(frozen=True)
class TrialConfig:
    """Everything a suite run needs; see parse_config for the file format."""

    env: str = "cartpole"
    episodes: int = 1000
    trial_seeds: tuple[int, ...] = tuple(range(10))
    eval_runs: int = 100
    eval_seed_base: int = 1_000_000_000
    hyper: Hyperparams = Hyperparams()
    distill_fraction: float = 0.05
    hidden_dim: int = 0  # 0 means the per-environment default (12 / 50)
    epochs: int = 5000
    learning_rate: float = 0.1
    eval_policy: str = "greedy"
    target_steps: int = 100_000
    pursuit_bins: tuple[int, int, int, int] = (14, 10, 10, 10)
    dt: float = 0.5
    pos_jitter: float = 50.0
    heading_jitter: float = 5.0
    scenarios: tuple[str, ...] = ()
    out: str = ""

    def validate(self) -> None:
        if self.env not in ("cartpole", "pursuit"):
            raise ConfigError(f"unknown environment {self.env!r}")
        if not self.trial_seeds:
            raise ConfigError("trial_seeds must be non-empty")
        if self.eval_runs <= 0:
            raise ConfigError("eval_runs must be strictly positive")
        if self.episodes < 0:
            raise ConfigError("episodes must be non-negative")
        if self.eval_policy not in ("greedy", "sample"):
            raise ConfigError(f"eval_policy must be greedy or sample, got {self.eval_policy!r}")
        if not 0.0 < self.distill_fraction <= 1.0:
            raise ConfigError("distill_fraction must lie in (0, 1]")

    @property
    def resolved_hidden_dim(self) -> int:
        if self.hidden_dim > 0:
            return self.hidden_dim
        return 12 if self.env == "cartpole" else 50

    def scenario_names(self) -> tuple[str, ...]:
        if self.env != "pursuit":
            return ("default",)
        return self.scenarios if self.scenarios else pursuit.BUNDLED_SCENARIOS


def build_discretizer(config: TrialConfig):
    if config.env == "cartpole":
        return cartpole.CartpoleDiscretizer()
    bins = config.pursuit_bins
    if tuple(bins) == (14, 10, 10, 10):
        scheme = pursuit.DiscretizationScheme.default()
    else:
        scheme = pursuit.DiscretizationScheme.with_bins(*bins)
    return pursuit.PursuitDiscretizer(scheme)


def build_env(config: TrialConfig, scenario: str = "default") -> Environment:
    """Environment instance for training (default scenario) or evaluation."""
    if config.env == "cartpole":
        return cartpole.CartpoleEnv(cartpole.CartpoleParams(target_steps=config.target_steps))
    if scenario == "default":
        script = pursuit.straight_training_script()
    elif scenario in pursuit.BUNDLED_SCENARIOS:
        script = pursuit.bundled_scenario(scenario)
    else:
        script = pursuit.load_script(scenario)
    return pursuit.PursuitEnv(
        scenario=script,
        cfg=pursuit.PursuitConfig(dt=config.dt),
        pos_jitter=config.pos_jitter,
        heading_jitter=config.heading_jitter,
        n_discrete_states=build_discretizer(config).n_states,
    )


class GreedyDiscreteController:
    """Argmax-preference controller over a discretized policy."""

    def __init__(self, theta: np.ndarray, discretizer):
        if len(theta) != discretizer.n_states:
            raise ValueError("theta row count does not match the discretizer")
        self._actions = np.argmax(theta, axis=1)
        self._discretizer = discretizer

    def act(self, state) -> int:
        return int(self._actions[self._discretizer(state)])

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return self._actions[self._discretizer.indices_batch(states)]


class SampledDiscreteController:
    """Softmax-sampling controller; reproducible via its construction seed."""

    def __init__(self, theta: np.ndarray, discretizer, seed: int = 0):
        self._probs = np.stack([policy_probabilities(theta, s) for s in range(len(theta))])
        self._cumulative = np.cumsum(self._probs, axis=1)
        self._discretizer = discretizer
        self._rng = np.random.default_rng(seed)

    def act(self, state) -> int:
        cum = self._cumulative[self._discretizer(state)]
        return int(np.searchsorted(cum, self._rng.random(), side="right").clip(0, len(cum) - 1))

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        idx = self._discretizer.indices_batch(states)
        draws = self._rng.random(len(idx))
        cum = self._cumulative[idx]
        picked = (draws[:, None] >= cum).sum(axis=1)
        return picked.clip(0, self._probs.shape[1] - 1)


def greedy_controller(theta: np.ndarray, discretizer) -> GreedyDiscreteController:
    return GreedyDiscreteController(theta, discretizer)


@dataclass(frozen=True)
class EvalReport:
    """Per-run evaluation scores and their aggregates."""

    scores: tuple[float, ...]
    mean: float
    median: float
    success_count: int
    seed_base: int
    wall_clock_s: float

    @classmethod
    def from_scores(cls, scores, successes, seed_base, wall_clock_s) -> "EvalReport":
        scores = tuple(float(s) for s in scores)
        return cls(
            scores=scores,
            mean=statistics.fmean(scores),
            median=statistics.median(scores),
            success_count=int(sum(successes)),
            seed_base=seed_base,
            wall_clock_s=wall_clock_s,
        )


def evaluate_controller(controller, env: Environment, n_runs: int, seed_base: int) -> EvalReport:
    """Score a deterministic controller over n_runs seeded episodes.

    Episode i draws its start from seed seed_base + i.  Cart-pole runs
    use the vectorized lockstep rollout when the controller can act on
    batches; the outcome is the same as stepping runs one at a time.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seeds = [seed_base + i for i in range(n_runs)]
    t0 = time.perf_counter()
    if hasattr(env, "rollout_batch") and hasattr(controller, "act_batch"):
        totals, steps = env.rollout_batch(controller.act_batch, seeds)
        scores = [env.episode_score(t, int(n)) for t, n in zip(totals, steps)]
    else:
        scores = []
        for seed in seeds:
            state = env.reset(np.random.default_rng(seed))
            total = 0.0
            terminal = False
            while not terminal:
                outcome = env.step(controller.act(state))
                total += outcome.reward
                state = outcome.next_state
                terminal = outcome.terminal
            scores.append(env.episode_score(total, env.steps))
    successes = [env.is_success(s) for s in scores]
    return EvalReport.from_scores(scores, successes, seed_base, time.perf_counter() - t0)


@dataclass(frozen=True)
class PhaseTimings:
    reinforce_s: float
    reinforce_2n_s: float
    distill_s: float
    train_s: float
    eval_s: float


@dataclass(frozen=True)
class TrialResult:
    trial_seed: int
    # method -> scenario name -> report
    reports: dict[str, dict[str, EvalReport]]
    timings: PhaseTimings
    dataset_size: int
    train_accuracy: float

    def report(self, method: str, scenario: str = None) -> EvalReport:
        per_scenario = self.reports[method]
        if scenario is None:
            scenario = next(iter(per_scenario))
        return per_scenario[scenario]


def _eval_seed_base(config: TrialConfig, trial_seed: int) -> int:
    return config.eval_seed_base + trial_seed * 1_000_000


def run_d2dspl_trial(config: TrialConfig, trial_seed: int, out_dir=None) -> TrialResult:
    """One full trial: reinforcement, continuation, distillation, evaluation.

    All randomness comes from streams derived from trial_seed, so
    rerunning with the same config reproduces every artifact except the
    recorded wall-clock times.
    """
    config.validate()
    discretizer = build_discretizer(config)
    env = build_env(config)
    rng = np.random.default_rng([trial_seed, 0])

    t0 = time.perf_counter()
    theta_n, w_n, buffer = run_reinforcement_phase(
        env, discretizer, config.hyper, config.episodes, rng
    )
    t_reinforce = time.perf_counter() - t0

    t0 = time.perf_counter()
    theta_2n, w_2n, _ = run_reinforcement_phase(
        env, discretizer, config.hyper, config.episodes, rng, theta=theta_n, w=w_n
    )
    t_reinforce_2n = time.perf_counter() - t0

    t0 = time.perf_counter()
    dataset = distill(buffer, theta_n, config.distill_fraction)
    t_distill = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = train(
        dataset,
        config.resolved_hidden_dim,
        TrainConfig(epochs=config.epochs, learning_rate=config.learning_rate, seed=trial_seed),
    )
    t_train = time.perf_counter() - t0

    controllers = {
        "discrete_n": _policy_controller(config, theta_n, discretizer, trial_seed),
        "discrete_2n": _policy_controller(config, theta_2n, discretizer, trial_seed),
        "d2dspl": MlpController(model),
    }
    seed_base = _eval_seed_base(config, trial_seed)
    t0 = time.perf_counter()
    reports: dict[str, dict[str, EvalReport]] = {m: {} for m in METHODS}
    for scenario in config.scenario_names():
        eval_env = build_env(config, scenario)
        for method, controller in controllers.items():
            reports[method][scenario] = evaluate_controller(
                controller, eval_env, config.eval_runs, seed_base
            )
    t_eval = time.perf_counter() - t0

    result = TrialResult(
        trial_seed=trial_seed,
        reports=reports,
        timings=PhaseTimings(t_reinforce, t_reinforce_2n, t_distill, t_train, t_eval),
        dataset_size=len(dataset),
        train_accuracy=model.train_meta["final_accuracy"],
    )
    if out_dir is not None:
        _persist_trial(Path(out_dir), config, result, theta_n, w_n, theta_2n, w_2n,
                       buffer, dataset, model)
    return result


def _policy_controller(config: TrialConfig, theta, discretizer, trial_seed: int):
    if config.eval_policy == "greedy":
        return GreedyDiscreteController(theta, discretizer)
    return SampledDiscreteController(theta, discretizer, seed=trial_seed)


@dataclass(frozen=True)
class SuiteResult:
    config: TrialConfig
    results: tuple[TrialResult, ...]
    failures: tuple[tuple[int, str], ...]
    out_dir: Path


def run_suite(config: TrialConfig) -> SuiteResult:
    """Run every configured trial and write the per-method summary tables.

    A failing trial is recorded in failures.csv and the suite continues.
    """
    config.validate()
    if not config.out:
        raise ConfigError("suite runs require an output directory")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(config, out / "config.txt")

    results: list[TrialResult] = []
    failures: list[tuple[int, str]] = []
    for seed in config.trial_seeds:
        trial_dir = out / f"trial_{seed}"
        try:
            results.append(run_d2dspl_trial(config, seed, out_dir=trial_dir))
        except Exception as exc:  # noqa: BLE001 - suite must survive bad trials
            failures.append((seed, f"{type(exc).__name__}: {exc}"))
            (trial_dir / "FAILED.txt").parent.mkdir(parents=True, exist_ok=True)
            (trial_dir / "FAILED.txt").write_text(traceback.format_exc())

    for scenario in config.scenario_names():
        name = "summary.csv" if scenario == "default" else f"summary_{Path(scenario).stem}.csv"
        _write_summary(out / name, results, scenario)
    if config.env == "cartpole":
        _write_successes(out / "successes.csv", results)
    _write_timing_summary(out / "timing_summary.csv", results)
    if failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial_seed", "error"])
            writer.writerows(failures)
    return SuiteResult(config, tuple(results), tuple(failures), out)


# ---------------------------------------------------------------------------
# persistence helpers


def _fmt(x) -> str:
    return repr(float(x))


def _persist_trial(trial_dir: Path, config: TrialConfig, result: TrialResult,
                   theta_n, w_n, theta_2n, w_2n, buffer, dataset, model) -> None:
    trial_dir.mkdir(parents=True, exist_ok=True)
    np.save(trial_dir / "policy_n.npy", theta_n)
    np.save(trial_dir / "value_n.npy", w_n)
    np.save(trial_dir / "policy_2n.npy", theta_2n)
    np.save(trial_dir / "value_2n.npy", w_2n)
    with open(trial_dir / "episode_returns.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "r_total", "steps"])
        for i, rec in enumerate(buffer):
            writer.writerow([i, _fmt(rec.r_total), rec.steps])
    save_dataset(dataset, trial_dir / "dataset.csv")
    save_model(model, trial_dir / "model.json")
    for method, per_scenario in result.reports.items():
        for scenario, report in per_scenario.items():
            suffix = "" if scenario == "default" else f"_{Path(scenario).stem}"
            with open(trial_dir / f"eval_{method}{suffix}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["run", "seed", "score", "success"])
                for i, score in enumerate(report.scores):
                    writer.writerow([
                        i, report.seed_base + i, _fmt(score),
                        int(score >= config.target_steps) if config.env == "cartpole" else 0,
                    ])
    t = result.timings
    with open(trial_dir / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "seconds"])
        for phase, secs in (("reinforce_n", t.reinforce_s), ("reinforce_2n", t.reinforce_2n_s),
                            ("distill", t.distill_s), ("classifier_train", t.train_s),
                            ("evaluate", t.eval_s)):
            writer.writerow([phase, _fmt(secs)])


def _write_summary(path: Path, results, scenario: str) -> None:
    rows = []
    for res in results:
        rows.append([res.trial_seed] + [_fmt(res.reports[m][scenario].mean) for m in METHODS])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", *METHODS])
        writer.writerows(rows)
        if rows:
            cols = list(zip(*[r[1:] for r in rows]))
            writer.writerow(["Mean", *[_fmt(statistics.fmean(float(v) for v in c)) for c in cols]])
            writer.writerow(["Median", *[_fmt(statistics.median(float(v) for v in c)) for c in cols]])


def _write_successes(path: Path, results) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", *METHODS])
        for res in results:
            scenario = next(iter(res.reports[METHODS[0]]))
            writer.writerow(
                [res.trial_seed] + [res.reports[m][scenario].success_count for m in METHODS]
            )


def _write_timing_summary(path: Path, results) -> None:
    """Per-trial learning times, absolute and relative to the discrete-n mean."""
    if not results:
        Path(path).write_text("trial,discrete_n,discrete_2n,d2dspl\n")
        return
    base = statistics.fmean(r.timings.reinforce_s for r in results)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "discrete_n_s", "discrete_2n_s", "d2dspl_s",
                         "discrete_n_rel", "discrete_2n_rel", "d2dspl_rel"])
        rel_rows = []
        for res in results:
            t = res.timings
            absolute = (t.reinforce_s, t.reinforce_s + t.reinforce_2n_s,
                        t.reinforce_s + t.distill_s + t.train_s)
            rel = tuple(a / base for a in absolute)
            rel_rows.append(rel)
            writer.writerow([res.trial_seed, *map(_fmt, absolute), *map(_fmt, rel)])
        means = [statistics.fmean(c) for c in zip(*rel_rows)]
        writer.writerow(["Mean", "", "", "", *map(_fmt, means)])


def save_buffer(buffer: Buffer, dir_path) -> None:
    """Persist episode records as a directory of flat arrays."""
    if not buffer:
        raise ValueError("cannot save an empty buffer")
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    ptr = np.zeros(len(buffer) + 1, dtype=np.int64)
    for i, rec in enumerate(buffer):
        ptr[i + 1] = ptr[i] + len(rec.states)
    np.save(dir_path / "r_total.npy", np.array([rec.r_total for rec in buffer]))
    np.save(dir_path / "ptr.npy", ptr)
    np.save(dir_path / "states.npy", np.concatenate([rec.states for rec in buffer]))
    np.save(dir_path / "counts.npy", np.concatenate([rec.counts for rec in buffer]))
    np.save(dir_path / "sums.npy", np.concatenate([rec.sums for rec in buffer], axis=0))
    meta = {"n_states": buffer[0].n_states, "n_state_vars": buffer[0].n_state_vars,
            "n_episodes": len(buffer)}
    (dir_path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_buffer(dir_path) -> Buffer:
    dir_path = Path(dir_path)
    meta = json.loads((dir_path / "meta.json").read_text())
    r_total = np.load(dir_path / "r_total.npy")
    ptr = np.load(dir_path / "ptr.npy")
    states = np.load(dir_path / "states.npy")
    counts = np.load(dir_path / "counts.npy")
    sums = np.load(dir_path / "sums.npy")
    buffer = []
    for i in range(meta["n_episodes"]):
        lo, hi = ptr[i], ptr[i + 1]
        buffer.append(EpisodeRecord(
            r_total=float(r_total[i]),
            n_states=meta["n_states"],
            n_state_vars=meta["n_state_vars"],
            states=states[lo:hi],
            counts=counts[lo:hi],
            sums=sums[lo:hi],
        ))
    return buffer


# ---------------------------------------------------------------------------
# config file format: flat "key = value" lines, # comments allowed

_TUPLE_FIELDS = {"trial_seeds", "pursuit_bins", "scenarios"}
_HYPER_FIELDS = {f.name for f in fields(Hyperparams)}


def parse_config(text: str, base: TrialConfig = None) -> TrialConfig:
    """Build a TrialConfig from flat key-value text.

    Keys match TrialConfig/Hyperparams field names.  `trials` and `seed`
    are conveniences expanding to trial_seeds = seed .. seed+trials-1.
    """
    config = base if base is not None else TrialConfig()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return apply_config_values(config, values)


def apply_config_values(config: TrialConfig, values: dict[str, str]) -> TrialConfig:
    values = dict(values)
    trials = values.pop("trials", None)
    seed = values.pop("seed", None)
    updates = {}
    hyper_updates = {}
    valid = {f.name: f.type for f in fields(TrialConfig)}
    for key, value in values.items():
        if key in _HYPER_FIELDS:
            hyper_updates[key] = float(value)
            continue
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            updates[key] = _parse_value(key, value, getattr(config, key))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    if hyper_updates:
        updates["hyper"] = replace(config.hyper, **hyper_updates)
    if trials is not None or seed is not None:
        first = int(seed) if seed is not None else (config.trial_seeds[0] if config.trial_seeds else 0)
        count = int(trials) if trials is not None else len(config.trial_seeds)
        if count <= 0:
            raise ConfigError("trials must be strictly positive")
        updates["trial_seeds"] = tuple(range(first, first + count))
    return replace(config, **updates)


def _parse_value(key: str, value: str, current):
    if key in _TUPLE_FIELDS:
        parts = [p.strip() for p in value.split(",") if p.strip()]
        if key == "scenarios":
            return tuple(parts)
        return tuple(int(p) for p in parts)
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def write_config(config: TrialConfig, path) -> None:
    """Echo the effective config as the run manifest (re-parseable)."""
    lines = []
    for f in fields(TrialConfig):
        value = getattr(config, f.name)
        if f.name == "hyper":
            for hf in fields(Hyperparams):
                lines.append(f"{hf.name} = {getattr(value, hf.name)!r}")
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_config(path, base: TrialConfig = None) -> TrialConfig:
    return parse_config(Path(path).read_text(), base)
