"""Command-line interface.

Subcommands mirror the pipeline stages: `train` runs the reinforcement
phase and saves the policy plus episode records, `distill` turns saved
records into a dataset and a trained classifier, `eval` scores a saved
controller, `suite` runs the full multi-trial protocol, and
`export-dataset` writes the distilled dataset without training.

Exit codes: 0 success, 1 validation error, 2 runtime fault.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .classifier import MlpController, TrainConfig, load_model, save_model, train
from .distill import distill, save_dataset
from .harness import (
    ConfigError,
    GreedyDiscreteController,
    TrialConfig,
    apply_config_values,
    build_discretizer,
    build_env,
    evaluate_controller,
    read_config,
    run_suite,
    save_buffer,
    load_buffer,
    write_config,
)
from .actor_critic import run_reinforcement_phase


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(parser: _Parser) -> None:
    parser.add_argument("--env", choices=("cartpole", "pursuit"))
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--out", type=Path)
    parser.add_argument("--scenario", action="append", default=None,
                        help="pursuit scenario name or file (repeatable)")


def build_parser() -> _Parser:
    parser = _Parser(prog="d2dspl", description=__doc__.split("\n\n")[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the reinforcement phase and save its outputs")
    _add_common(p_train)

    p_distill = sub.add_parser("distill", help="episode records + policy -> dataset + classifier")
    _add_common(p_distill)
    p_distill.add_argument("--buffer", type=Path, required=True, help="buffer directory from train")
    p_distill.add_argument("--policy", type=Path, required=True, help="policy .npy from train")

    p_export = sub.add_parser("export-dataset", help="episode records + policy -> dataset CSV")
    _add_common(p_export)
    p_export.add_argument("--buffer", type=Path, required=True)
    p_export.add_argument("--policy", type=Path, required=True)

    p_eval = sub.add_parser("eval", help="evaluate a saved controller")
    _add_common(p_eval)
    p_eval.add_argument("--policy", type=Path, help="evaluate the greedy policy from this .npy")
    p_eval.add_argument("--model", type=Path, help="evaluate the classifier from this .json")
    p_eval.add_argument("--runs", type=int, default=None, help="evaluation runs (default 100)")

    p_suite = sub.add_parser("suite", help="full multi-trial protocol with summary tables")
    _add_common(p_suite)
    return parser


def _config_from_args(args) -> TrialConfig:
    config = TrialConfig()
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        config = read_config(args.config, config)
    overrides = {}
    if args.env is not None:
        overrides["env"] = args.env
    if args.episodes is not None:
        overrides["episodes"] = str(args.episodes)
    if args.trials is not None:
        overrides["trials"] = str(args.trials)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.scenario:
        overrides["scenarios"] = ",".join(args.scenario)
    config = apply_config_values(config, overrides)
    config.validate()
    return config


def _require_out(config: TrialConfig) -> Path:
    if not config.out:
        raise ConfigError("--out (or config key 'out') is required for this command")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    out = _require_out(config)
    seed = config.trial_seeds[0]
    env = build_env(config)
    discretizer = build_discretizer(config)
    rng = np.random.default_rng([seed, 0])
    theta, w, buffer = run_reinforcement_phase(
        env, discretizer, config.hyper, config.episodes, rng
    )
    np.save(out / "policy.npy", theta)
    np.save(out / "value.npy", w)
    save_buffer(buffer, out / "buffer")
    write_config(config, out / "config.txt")
    returns = [rec.r_total for rec in buffer]
    print(f"trained {config.env} for {config.episodes} episodes (seed {seed})")
    print(f"last-100 mean return: {np.mean(returns[-100:]):.3f}")
    print(f"saved policy.npy, value.npy, buffer/ to {out}")
    return 0


def _distilled(args, config: TrialConfig):
    if not args.buffer.is_dir():
        raise ConfigError(f"buffer directory not found: {args.buffer}")
    if not args.policy.is_file():
        raise ConfigError(f"policy file not found: {args.policy}")
    buffer = load_buffer(args.buffer)
    theta = np.load(args.policy)
    return distill(buffer, theta, config.distill_fraction)


def _cmd_export_dataset(args) -> int:
    config = _config_from_args(args)
    out = _require_out(config)
    dataset = _distilled(args, config)
    save_dataset(dataset, out / "dataset.csv")
    print(f"wrote dataset.csv with {len(dataset)} rows to {out}")
    return 0


def _cmd_distill(args) -> int:
    config = _config_from_args(args)
    out = _require_out(config)
    dataset = _distilled(args, config)
    save_dataset(dataset, out / "dataset.csv")
    seed = config.trial_seeds[0]
    model = train(
        dataset,
        config.resolved_hidden_dim,
        TrainConfig(epochs=config.epochs, learning_rate=config.learning_rate, seed=seed),
    )
    save_model(model, out / "model.json")
    meta = model.train_meta
    print(f"dataset: {len(dataset)} rows; classifier accuracy {meta['final_accuracy']:.3f} "
          f"(loss {meta['final_loss']:.6f} after {meta['epochs_run']} epochs)")
    print(f"wrote dataset.csv and model.json to {out}")
    return 0


def _cmd_eval(args) -> int:
    config = _config_from_args(args)
    if (args.policy is None) == (args.model is None):
        raise ConfigError("eval needs exactly one of --policy or --model")
    runs = args.runs if args.runs is not None else config.eval_runs
    if runs <= 0:
        raise ConfigError("--runs must be strictly positive")
    if args.model is not None:
        if not args.model.is_file():
            raise ConfigError(f"model file not found: {args.model}")
        controller = MlpController(load_model(args.model))
        label = f"classifier {args.model.name}"
    else:
        if not args.policy.is_file():
            raise ConfigError(f"policy file not found: {args.policy}")
        controller = GreedyDiscreteController(np.load(args.policy), build_discretizer(config))
        label = f"greedy policy {args.policy.name}"
    seed_base = config.eval_seed_base + config.trial_seeds[0] * 1_000_000
    out = Path(config.out) if config.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for scenario in config.scenario_names():
        env = build_env(config, scenario)
        report = evaluate_controller(controller, env, runs, seed_base)
        tag = "" if scenario == "default" else f" [{Path(scenario).stem}]"
        print(f"{label}{tag}: mean {report.mean:.4f}  median {report.median:.4f}  "
              f"successes {report.success_count}/{runs}")
        if out is not None:
            name = "scores.csv" if scenario == "default" else f"scores_{Path(scenario).stem}.csv"
            with open(out / name, "w", newline="") as fh:
                fh.write("run,seed,score\n")
                for i, score in enumerate(report.scores):
                    fh.write(f"{i},{report.seed_base + i},{score!r}\n")
    return 0


def _cmd_suite(args) -> int:
    config = _config_from_args(args)
    _require_out(config)
    suite = run_suite(config)
    print(f"suite finished: {len(suite.results)} trials ok, {len(suite.failures)} failed")
    for scenario in config.scenario_names():
        name = "summary.csv" if scenario == "default" else f"summary_{Path(scenario).stem}.csv"
        print(f"  wrote {suite.out_dir / name}")
    if suite.failures:
        for seed, err in suite.failures:
            print(f"  trial {seed} FAILED: {err}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "distill": _cmd_distill,
    "export-dataset": _cmd_export_dataset,
    "eval": _cmd_eval,
    "suite": _cmd_suite,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"d2dspl: validation error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"d2dspl: runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
