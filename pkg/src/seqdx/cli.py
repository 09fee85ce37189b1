"""Command-line pipeline: generate, split, fit, train, evaluate, report.

Exit codes: 0 success, 1 validation error (bad flags, bad file contents,
incompatible artifacts), 2 I/O error (missing or unreadable files). Every
stage logs the config hash it consumed to stderr, so runs can be audited
against the artifacts they produced.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass

from . import serialize
from .diagnoser import fit_full_info
from .episode import (
    POLICY_ALL_INFO,
    POLICY_FIXED_INFO,
    POLICY_GREEDY_IG,
    POLICY_RANDOM,
    POLICY_TRAINED,
    EpisodeLimits,
    PolicySpec,
    run_benchmark,
)
from .errors import ConfigConflict, SchemaError, SeqdxError, UnknownCommand
from .metrics import compare_reports, compute_metrics, histogram_csv
from .planner import TARGET_SOURCES, TrainConfig, feature_dim, train_planner
from .presets import PRESETS
from .trajectory import marginal_action_posterior, trajectory_posterior
from .world import build_world, sample_cases, split_cases

COMMANDS = ("gen-world", "gen-cases", "split", "fit-diagnoser", "train-planner",
            "eval", "oracle", "report")


@dataclass(frozen=True)
class RunConfig:
    """Pipeline-level knobs accepted from a config file (flags must agree)."""

    tau: float = 1.0
    beta: float = 1.0
    theta_stop: float = 0.9
    t_max: int = 3
    seed: int = 0
    lr: float = 0.1
    epochs: int = 20
    target_source: str = "stepwise_ig"
    rollout: str = "teacher"
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)

    def validate(self) -> None:
        if self.tau <= 0:
            raise SchemaError(f"tau must be > 0, got {self.tau}")
        if self.beta < 0:
            raise SchemaError(f"beta must be >= 0, got {self.beta}")
        if not (0.0 < self.theta_stop <= 1.0):
            raise SchemaError(f"theta_stop must be in (0, 1], got {self.theta_stop}")
        if self.t_max < 1:
            raise SchemaError(f"t_max must be >= 1, got {self.t_max}")
        if self.target_source not in TARGET_SOURCES:
            raise SchemaError(f"unknown target_source {self.target_source!r}")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        data = serialize._parse_json(serialize._read_text(path), path)
        known = {"tau", "beta", "theta_stop", "t_max", "seed", "split", "train",
                 "world", "paths"}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"{path}: unknown run-config fields {sorted(unknown)}")
        train = data.get("train", {})
        unknown_train = set(train) - {"lr", "epochs", "target_source", "rollout"}
        if unknown_train:
            raise SchemaError(f"{path}: unknown train fields {sorted(unknown_train)}")
        cfg = cls(
            tau=float(data.get("tau", 1.0)),
            beta=float(data.get("beta", 1.0)),
            theta_stop=float(data.get("theta_stop", 0.9)),
            t_max=int(data.get("t_max", 3)),
            seed=int(data.get("seed", 0)),
            lr=float(train.get("lr", 0.1)),
            epochs=int(train.get("epochs", 20)),
            target_source=str(train.get("target_source", "stepwise_ig")),
            rollout=str(train.get("rollout", "teacher")),
            split=tuple(float(r) for r in data.get("split", (0.7, 0.1, 0.2))),
        )
        cfg.validate()
        return cfg


class _CliParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so we own the exit codes."""

    def error(self, message):
        raise UnknownCommand(message)


def _log(stage: str, config_hash) -> None:
    print(f"stage={stage} config_hash={config_hash or 'none'}", file=sys.stderr)


def _build_parser() -> _CliParser:
    parser = _CliParser(prog="seqdx", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="|".join(COMMANDS))

    p = sub.add_parser("gen-world", help="write a preset world config")
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--availability-prob", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-cases", help="sample cases from a world config")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="split a case file into train/val/test")
    p.add_argument("--cases", required=True)
    p.add_argument("--ratios", default="0.7,0.1,0.2")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("fit-diagnoser", help="fit the diagnoser on full information")
    p.add_argument("--cases", required=True)
    p.add_argument("--config", default=None, help="world config for canonical alphabets")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-planner", help="train the planner policy")
    p.add_argument("--cases", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train-config", default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--target-source", choices=TARGET_SOURCES, default=None)
    p.add_argument("--rollout", choices=("teacher", "on_policy"), default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--theta-stop", type=float, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="run a policy over cases and write a report")
    p.add_argument("--policy", required=True,
                   help="ldtl | random | greedy-ig | all | fixed:history[+ACTION...]")
    p.add_argument("--cases", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--theta-stop", type=float, default=0.9)
    p.add_argument("--t-max", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes-log", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle", help="dump the exact trajectory table for one case")
    p.add_argument("--cases", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--case-id", required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--t-max", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--marginals-out", default=None)

    p = sub.add_parser("report", help="compare saved reports")
    p.add_argument("--reports", nargs="+", required=True, metavar="NAME=PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--text-out", default=None)
    p.add_argument("--plot-data", default=None)
    return parser


def _cmd_gen_world(args) -> int:
    config = PRESETS[args.preset]()
    overrides = {}
    if args.availability_prob is not None:
        overrides["availability_prob"] = args.availability_prob
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    build_world(config)  # validate before writing
    serialize.save_world_config(config, args.out)
    _log("gen-world", serialize.world_config_hash(config))
    return 0


def _cmd_gen_cases(args) -> int:
    config = serialize.load_world_config(args.config)
    world = build_world(config)
    seed = args.seed if args.seed is not None else config.seed
    cases = sample_cases(world, args.n, seed)
    serialize.save_cases(cases, args.out)
    _log("gen-cases", cases.config_hash)
    return 0


def _cmd_split(args) -> int:
    cases = serialize.load_cases(args.cases)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    parts = split_cases(cases, ratios, args.seed)
    for name, part in zip(("train", "val", "test"), parts):
        serialize.save_cases(part, f"{args.out_prefix}.{name}.jsonl")
    _log("split", cases.config_hash)
    return 0


def _cmd_fit_diagnoser(args) -> int:
    cases = serialize.load_cases(args.cases)
    world = None
    if args.config is not None:
        config = serialize.load_world_config(args.config)
        world = build_world(config)
        expected = serialize.world_config_hash(config)
        if cases.config_hash is not None and cases.config_hash != expected:
            raise ConfigConflict(
                f"case file hash {cases.config_hash} != --config hash {expected}"
            )
        cases.config_hash = expected
    model = fit_full_info(cases, alpha=args.alpha, world=world)
    serialize.save_model(model, args.out)
    _log("fit-diagnoser", model.config_hash)
    return 0


_TRAIN_FLAG_FIELDS = {
    "lr": "lr", "epochs": "epochs", "target_source": "target_source",
    "rollout": "rollout", "tau": "tau", "beta": "beta",
    "theta_stop": "theta_stop", "t_max": "t_max", "seed": "seed",
}


def _resolve_train_config(args) -> TrainConfig:
    """Merge run-config file and flags; any disagreement is a hard error."""
    run = RunConfig.from_file(args.train_config) if args.train_config else RunConfig()
    values = {}
    for flag, field_name in _TRAIN_FLAG_FIELDS.items():
        flag_value = getattr(args, flag)
        file_value = getattr(run, field_name)
        if flag_value is None:
            values[field_name] = file_value
        elif args.train_config is not None and flag_value != file_value:
            raise ConfigConflict(
                f"--{flag.replace('_', '-')}={flag_value} conflicts with "
                f"{args.train_config} ({field_name}={file_value})"
            )
        else:
            values[field_name] = flag_value
    hyper = TrainConfig(**values)
    RunConfig(**{k: values[k] for k in
                 ("tau", "beta", "theta_stop", "t_max", "seed", "lr", "epochs",
                  "target_source", "rollout")}).validate()
    return hyper


def _cmd_train_planner(args) -> int:
    cases = serialize.load_cases(args.cases)
    model = serialize.load_model(args.model)
    if (cases.config_hash is not None and model.config_hash
            and cases.config_hash != model.config_hash):
        raise ConfigConflict(
            f"case file hash {cases.config_hash} != model hash {model.config_hash}"
        )
    hyper = _resolve_train_config(args)
    params = train_planner(cases, model, hyper)
    serialize.save_checkpoint(params, args.out)
    _log("train-planner", model.config_hash)
    return 0


def _parse_policy(text: str, args, model) -> PolicySpec:
    if text == "ldtl":
        if args.checkpoint is None:
            raise SchemaError("policy 'ldtl' requires --checkpoint")
        params = serialize.load_checkpoint(
            args.checkpoint,
            expect_config_hash=model.config_hash or None,
            expect_shape=(len(model.action_names), feature_dim(model)),
        )
        return PolicySpec(kind=POLICY_TRAINED, params=params, seed_stream=args.seed)
    if text == "random":
        return PolicySpec(kind=POLICY_RANDOM, seed_stream=args.seed)
    if text == "greedy-ig":
        return PolicySpec(kind=POLICY_GREEDY_IG, seed_stream=args.seed)
    if text == "all":
        return PolicySpec(kind=POLICY_ALL_INFO, seed_stream=args.seed)
    if text.startswith("fixed:"):
        parts = text[len("fixed:"):].split("+")
        if parts[0] != "history":
            raise SchemaError(f"--policy fixed sets must start with 'history': {text!r}")
        fixed = tuple(parts[1:])
        unknown = set(fixed) - set(model.action_names)
        if unknown:
            raise SchemaError(f"--policy names unknown actions {sorted(unknown)}")
        return PolicySpec(kind=POLICY_FIXED_INFO, fixed_set=fixed, seed_stream=args.seed)
    raise SchemaError(f"unknown --policy {text!r}")


def _cmd_eval(args) -> int:
    model = serialize.load_model(args.model)
    cases = serialize.load_cases(args.cases)
    if (cases.config_hash is not None and model.config_hash
            and cases.config_hash != model.config_hash):
        raise ConfigConflict(
            f"case file hash {cases.config_hash} != model hash {model.config_hash}"
        )
    policy = _parse_policy(args.policy, args, model)
    limits = EpisodeLimits(theta_stop=args.theta_stop, t_max=args.t_max)
    records = run_benchmark(policy, cases, model, limits, log_path=args.episodes_log)
    report = compute_metrics(records, num_classes=model.num_diseases)
    serialize.save_report(
        report, args.out, config_hash=model.config_hash,
        extra={"policy": args.policy, "seed": args.seed,
               "theta_stop": args.theta_stop, "t_max": args.t_max},
    )
    _log("eval", model.config_hash)
    return 0


def _cmd_oracle(args) -> int:
    model = serialize.load_model(args.model)
    cases = serialize.load_cases(args.cases)
    matches = [c for c in cases if c.id == args.case_id]
    if not matches:
        raise SchemaError(f"--case-id {args.case_id!r} not found in {args.cases}")
    case = matches[0]

    dist = trajectory_posterior(model, case, beta=args.beta, t_max=args.t_max)
    lines = ["trajectory,score,probability"]
    for traj, score, prob in zip(dist.support, dist.scores, dist.probs):
        lines.append(f"{'>'.join(traj.actions)},{score:.12g},{prob:.12g}")
    serialize._write_text(args.out, "\n".join(lines) + "\n")

    marginals_path = args.marginals_out
    if marginals_path is None:
        marginals_path = (args.out[:-4] if args.out.endswith(".csv") else args.out)
        marginals_path += ".marginals.csv"
    lines = ["t,prefix,action,probability"]
    prefixes = [()]
    for t in range(1, args.t_max + 1):
        next_prefixes = []
        for prefix in prefixes:
            try:
                marg = marginal_action_posterior(dist, t, prefix)
            except SeqdxError:
                continue
            for action, prob in zip(marg.support, marg.probs):
                lines.append(f"{t},{'>'.join(prefix)},{action},{prob:.12g}")
                next_prefixes.append(prefix + (action,))
        prefixes = next_prefixes
    serialize._write_text(marginals_path, "\n".join(lines) + "\n")
    _log("oracle", model.config_hash)
    return 0


def _cmd_report(args) -> int:
    named = []
    hashes = {}
    for item in args.reports:
        if "=" not in item:
            raise SchemaError(f"--reports items must be NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        report, config_hash, _ = serialize.load_report(path)
        named.append((name, report))
        hashes[name] = config_hash
    distinct = set(hashes.values())
    if len(distinct) > 1:
        raise ConfigConflict(f"reports span different world hashes: {hashes}")
    table = compare_reports(named)
    serialize._write_text(args.out, table.to_csv())
    if args.text_out is not None:
        serialize._write_text(args.text_out, table.to_text())
    if args.plot_data is not None:
        serialize._write_text(args.plot_data, histogram_csv(named))
    _log("report", distinct.pop() if distinct else "none")
    return 0


_HANDLERS = {
    "gen-world": _cmd_gen_world,
    "gen-cases": _cmd_gen_cases,
    "split": _cmd_split,
    "fit-diagnoser": _cmd_fit_diagnoser,
    "train-planner": _cmd_train_planner,
    "eval": _cmd_eval,
    "oracle": _cmd_oracle,
    "report": _cmd_report,
}


def run_command(argv) -> int:
    """Dispatch one CLI invocation; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        return _HANDLERS[args.command](args)
    except SeqdxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
