"""Command-line harness.

Subcommands: gen-synthetic, pretrain, refine, finetune, eval, pairwise, and
run (the full single-task vs. MTL-refine vs. MTL-fine-tune comparison).
Exit status 0 on success, 1 on configuration errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (CheckpointError, ConfigError, MtlError, ParseError)
from .experiment import (ExperimentConfig, initial_encoder,
                         load_experiment_config, pairwise_mtl, prepare,
                         run_experiment)
from .trainer import evaluate_task, fine_tune, mtl_refine, write_training_log
from .workspace import write_synthetic_workspace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mtltext", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="override config seeds (repeatable)")
        p.add_argument("--out-dir", default=None, help="override output directory")
        return p

    gen = add("gen-synthetic", "write the synthetic four-task workspace",
              needs_config=False)
    gen.add_argument("--difficulty", type=float, default=0.5)
    gen.add_argument("--train", type=int, default=512)
    gen.add_argument("--dev", type=int, default=128)
    gen.add_argument("--test", type=int, default=128)
    gen.add_argument("--pretrain-sentences", type=int, default=1000)

    add("pretrain", "masked-LM pretraining of the shared encoder")
    refine = add("refine", "multi-task refinement over all configured tasks")
    refine.add_argument("--init", default=None,
                        help="checkpoint to initialize the shared layers from")
    ft = add("finetune", "per-task fine-tuning of a refined checkpoint")
    ft.add_argument("--checkpoint", required=True)
    ft.add_argument("--task", action="append", default=None,
                    help="restrict to these task names (repeatable)")
    ev = add("eval", "evaluate a checkpoint on the configured tasks")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", default="test", choices=("train", "dev", "test"))
    add("run", "single-task vs. MTL-refine vs. MTL-fine-tune comparison")
    add("pairwise", "directed pairwise task-affinity matrix")
    return parser


def _load(args) -> tuple[ExperimentConfig, list[int], str]:
    config = load_experiment_config(args.config)
    seeds = args.seed if args.seed else config.seeds
    out_dir = args.out_dir or config.resolve(config.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return config, seeds, out_dir


def _cmd_gen_synthetic(args) -> int:
    out_dir = args.out_dir or "synthetic"
    seed = args.seed[0] if args.seed else 0
    path = write_synthetic_workspace(
        out_dir, seed=seed, difficulty=args.difficulty, train=args.train,
        dev=args.dev, test=args.test,
        pretrain_sentences=args.pretrain_sentences)
    print(f"wrote synthetic workspace; config at {path}")
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    config, seeds, out_dir = _load(args)
    if not config.pretrain_enabled:
        raise ConfigError("config has pretrain = false; nothing to do")
    prep = prepare(config)
    for seed in seeds:
        initial_encoder(prep, seed, out_dir)
        print(f"pretrained encoder for seed {seed} -> "
              f"{out_dir}/pretrain-seed{seed}.ckpt")
    return EXIT_OK


def _cmd_refine(args) -> int:
    config, seeds, out_dir = _load(args)
    prep = prepare(config)
    for seed in seeds:
        if args.init:
            shared = load_checkpoint(args.init).shared_tensors()
        else:
            shared = initial_encoder(prep, seed, out_dir)
        result = mtl_refine(
            shared, prep.econfig, config.tasks,
            {t.name: prep.data[t.name]["train"] for t in config.tasks},
            config.train_config("refine", seed),
            dev_data={t.name: prep.data[t.name].get("dev", [])
                      for t in config.tasks})
        path = os.path.join(out_dir, f"refine-seed{seed}.ckpt")
        save_checkpoint(result.checkpoint, path)
        write_training_log(result.log,
                           os.path.join(out_dir, f"refine-seed{seed}.log.tsv"))
        print(f"refined checkpoint for seed {seed} -> {path}")
    return EXIT_OK


def _cmd_finetune(args) -> int:
    config, seeds, out_dir = _load(args)
    prep = prepare(config)
    ckpt = load_checkpoint(args.checkpoint)
    wanted = set(args.task) if args.task else {t.name for t in config.tasks}
    unknown = wanted - {t.name for t in config.tasks}
    if unknown:
        raise ConfigError(f"unknown task names: {sorted(unknown)}")
    for seed in seeds:
        for task in config.tasks:
            if task.name not in wanted:
                continue
            result = fine_tune(ckpt, task, prep.data[task.name]["train"],
                               config.train_config("finetune", seed),
                               dev_data=prep.data[task.name].get("dev"))
            path = os.path.join(out_dir, f"finetune-{task.name}-seed{seed}.ckpt")
            save_checkpoint(result.checkpoint, path)
            write_training_log(result.log, os.path.join(
                out_dir, f"finetune-{task.name}-seed{seed}.log.tsv"))
            print(f"fine-tuned {task.name} (seed {seed}) -> {path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config, _, _ = _load(args)
    prep = prepare(config)
    ckpt = load_checkpoint(args.checkpoint)
    print("task\tmetric\tvalue")
    for task in config.tasks:
        if not ckpt.head_tensors(task.name):
            print(f"{task.name}\t{task.metric}\tnan")
            continue
        value = evaluate_task(task, ckpt.tensors, prep.econfig,
                              prep.data[task.name].get(args.split, []),
                              config.train_config("refine", 0).batch_size)
        print(f"{task.name}\t{task.metric}\t{value:.4f}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config, seeds, out_dir = _load(args)
    report = run_experiment(config, out_dir=out_dir, seeds=seeds)
    print(report.to_text(), end="")
    print(f"report written to {out_dir}/report.tsv")
    return EXIT_OK


def _cmd_pairwise(args) -> int:
    config, seeds, out_dir = _load(args)
    matrix = pairwise_mtl(config, out_dir=out_dir, seeds=seeds)
    print(matrix.to_text(), end="")
    print(f"matrix written to {out_dir}/pairwise.tsv")
    return EXIT_OK


_COMMANDS = {
    "gen-synthetic": _cmd_gen_synthetic,
    "pretrain": _cmd_pretrain,
    "refine": _cmd_refine,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "pairwise": _cmd_pairwise,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, ParseError, CheckpointError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (MtlError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
