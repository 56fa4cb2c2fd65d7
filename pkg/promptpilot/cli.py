__author__ = 'Tommi Enenkel @alice_und_bob'

import argparse
import asyncio
import logging
import sys
from pathlib import Path

import simplejson as json

import promptpilot
from promptpilot.errors import ConfigError, PromptPilotError
from promptpilot.reports.run_report import build_report, error_record
from promptpilot.trainers.train_config import TrainConfig, parse_override

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s (%(filename)s:%(lineno)s)'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptpilot",
                                     description="Train and compare prompt-selection policies for thought-guided RL.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_config_args(sub, with_out=True):
        sub.add_argument("--config", help="train config JSON (see config/sample_train_config.json)")
        sub.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        sub.add_argument("--selector", choices=("learned", "random", "ucb"))
        sub.add_argument("--objective", choices=("neg-entropy", "env-reward"))
        sub.add_argument("--reasoner", choices=("cache", "template", "remote"))
        sub.add_argument("--env", choices=("chain_world", "four_room", "overcooked"))
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="override any config key by dotted path, e.g. trainer.episodes=200")
        if with_out:
            sub.add_argument("--out", help="output directory")

    train = commands.add_parser("train", help="train the configured seeds into a run directory")
    add_config_args(train)

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint without updates")
    add_config_args(evaluate)
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--episodes", type=int, default=100)
    evaluate.add_argument("--greedy", action="store_true")

    report = commands.add_parser("report", help="compare finished runs of one environment")
    report.add_argument("run_dirs", nargs="+")
    report.add_argument("--out", required=True)

    cache = commands.add_parser("cache-cot", help="fill the thought cache for all situations and prompts")
    add_config_args(cache, with_out=False)

    gen = commands.add_parser("gen-prompts", help="let the chat model write a candidate set")
    add_config_args(gen)
    gen.add_argument("--task-file", required=True, help="JSON file with 'task' and 'state_situation'")
    gen.add_argument("-k", type=int, default=3)
    return parser


def resolve_config(args) -> TrainConfig:
    """Config file, then shorthand flags, then --set overrides."""
    config = TrainConfig.load(args.config) if args.config else TrainConfig()
    overrides = {}
    for name in ("selector", "objective", "reasoner", "env", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for assignment in args.overrides:
        key, value = parse_override(assignment)
        overrides[key] = value
    return config.with_overrides(overrides)


async def run(args) -> dict:
    """Executes one subcommand and returns its JSON-serializable result."""
    if args.command == "report":
        tables = build_report(args.run_dirs, args.out)
        return {"out": args.out, "auc": tables["auc"].to_dict(orient="records")}

    config = resolve_config(args)
    if args.command == "train":
        out = args.out or str(Path("data") / "runs" / config.method.replace("/", "_"))
        reports = await promptpilot.train(config, out)
        return {"out": out, "auc": {str(r.seed): r.auc for r in reports}}
    if args.command == "eval":
        report = await promptpilot.evaluate(args.checkpoint, args.episodes, greedy=args.greedy,
                                            config=config if args.config else None, seed=args.seed)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            report.to_frame().to_csv(Path(args.out) / "eval_metrics.csv", index=False)
        return report.summary()
    if args.command == "cache-cot":
        return await promptpilot.cache_cot(config)
    if args.command == "gen-prompts":
        if not args.out:
            raise ConfigError("gen-prompts needs --out for the candidate set file")
        candidates = await promptpilot.gen_prompts(args.task_file, args.k, args.out, config)
        return {"out": args.out, "prompts": list(candidates.texts)}
    raise ConfigError(f"unknown command {args.command}")


def main(argv=None) -> int:
    """
    Entry point of the `promptpilot` command. Prints the result as JSON on stdout and returns 0, or prints an
    error record as JSON on stderr and returns 1. A training run that got as far as its manifest also keeps the
    record as error.json.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    # httpx with asyncio can cause an "unclosed transport" error on Windows. A workaround is to set a different loop
    # policy. See https://github.com/encode/httpx/issues/914
    if sys.platform.startswith('win'):
        asyncio.set_event_loop_policy(asyncio.WindowsSelectorEventLoopPolicy())

    try:
        result = asyncio.run(run(args))
    except PromptPilotError as e:
        record = error_record(e)
        print(json.dumps(record), file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(e)
        logger.exception(e)
        print(json.dumps(error_record(e)), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
