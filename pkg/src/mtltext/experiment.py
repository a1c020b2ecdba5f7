"""Config-driven experiment drivers: the three-strategy comparison and the
pairwise task-affinity protocol.

Configs are flat INI files. ``[experiment]`` lists the tasks and seeds and
toggles stages; ``[encoder]`` sizes the shared model; ``[pretrain]``,
``[refine]`` and ``[finetune]`` hold per-stage optimization settings; the
single-task baseline row trains each task directly on the initial encoder
with the fine-tune settings (override with a ``[baseline]`` section); one
``[task:NAME]`` section per task gives its kind, label/tag set, and
dataset paths (relative to the config file).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .checkpoint import save_checkpoint
from .data import encode_examples, load_dataset
from .encoder import EncoderConfig, init_params
from .errors import ConfigError
from .heads import TaskSpec
from .report import (PairwiseMatrix, RunReport, STRATEGY_FINETUNE,
                     STRATEGY_REFINE, STRATEGY_SINGLE, median)
from .tokenizer import Vocab, encode_single, wordpiece_tokenize
from .trainer import (TrainConfig, evaluate_task, fine_tune, mlm_pretrain,
                      mtl_refine, train_single_task, write_training_log)

_STAGE_DEFAULTS = {
    "refine": {},
    "finetune": {"learning_rate": 1e-5, "max_epochs": 10},
    "pretrain": {"learning_rate": 1e-2, "weight_decay": 0.0, "dropout": 0.0},
}

# the single-task baseline row is the initial encoder fine-tuned directly on
# each task, so it shares the fine-tune stage settings unless a [baseline]
# section overrides them
_STAGE_FALLBACK = {"baseline": "finetune"}


@dataclass
class ExperimentConfig:
    base_dir: str
    tasks: list[TaskSpec]
    seeds: list[int]
    vocab_path: str
    max_len: int
    encoder: dict                 # sizes; vocab_size filled at load time
    stages: dict                  # stage name -> dict of TrainConfig overrides
    pretrain_enabled: bool
    finetune_enabled: bool
    pairwise_finetune: bool
    eps: float
    out_dir: str
    corpus_path: str = ""
    mask_prob: float = 0.15
    pretrain_max_len: int = 16

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def train_config(self, stage: str, seed: int) -> TrainConfig:
        base = _STAGE_FALLBACK.get(stage, stage)
        values = dict(_STAGE_DEFAULTS.get(base, {}))
        values.update(self.stages.get(base, {}))
        values.update(self.stages.get(stage, {}))
        values["seed"] = seed
        return TrainConfig(**values)


_TRAIN_KEYS = {
    "learning_rate": float, "batch_size": int, "warmup": float,
    "weight_decay": float, "clip_norm": float, "max_epochs": int,
    "dropout": float,
}


def _parse_stage(cp, section) -> dict:
    out = {}
    if cp.has_section(section):
        for key, conv in _TRAIN_KEYS.items():
            if cp.has_option(section, key):
                out[key] = conv(cp.get(section, key))
    return out


def _split_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def load_experiment_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found")
    if not cp.has_section("experiment"):
        raise ConfigError(f"{path}: missing [experiment] section")
    exp = cp["experiment"]

    task_names = _split_list(exp.get("tasks", ""))
    if not task_names:
        raise ConfigError(f"{path}: [experiment] tasks is empty")
    tasks = []
    for name in task_names:
        section = f"task:{name}"
        if not cp.has_section(section):
            raise ConfigError(f"{path}: missing [{section}] section")
        sec = cp[section]
        kind = sec.get("kind", "")
        paths = {split: sec.get(split) for split in ("train", "dev", "test")
                 if sec.get(split)}
        tasks.append(TaskSpec(
            name=name, kind=kind,
            labels=tuple(_split_list(sec.get("labels", ""))),
            tags=tuple(_split_list(sec.get("tags", ""))),
            metric=sec.get("metric", ""),
            negative_label=sec.get("negative_label") or None,
            paths=paths))

    encoder = {}
    if cp.has_section("encoder"):
        for key in ("max_positions", "hidden_size", "num_layers", "num_heads",
                    "ff_size"):
            if cp.has_option("encoder", key):
                encoder[key] = cp.getint("encoder", key)
        if cp.has_option("encoder", "dropout"):
            encoder["dropout"] = cp.getfloat("encoder", "dropout")

    stages = {stage: _parse_stage(cp, stage)
              for stage in ("pretrain", "refine", "finetune", "baseline")}

    pretrain_section = cp["pretrain"] if cp.has_section("pretrain") else {}
    return ExperimentConfig(
        base_dir=os.path.dirname(os.path.abspath(path)),
        tasks=tasks,
        seeds=[int(s) for s in _split_list(exp.get("seeds", "0"))],
        vocab_path=exp.get("vocab", "vocab.txt"),
        max_len=int(exp.get("max_len", "128")),
        encoder=encoder,
        stages=stages,
        pretrain_enabled=exp.getboolean("pretrain", fallback=False),
        finetune_enabled=exp.getboolean("finetune", fallback=True),
        pairwise_finetune=exp.getboolean("pairwise_finetune", fallback=False),
        eps=float(exp.get("eps", "0.005")),
        out_dir=exp.get("out_dir", "runs"),
        corpus_path=pretrain_section.get("corpus", ""),
        mask_prob=float(pretrain_section.get("mask_prob", "0.15")),
        pretrain_max_len=int(pretrain_section.get("max_len", "16")),
    )


@dataclass
class PreparedExperiment:
    config: ExperimentConfig
    vocab: Vocab
    econfig: EncoderConfig
    data: dict = field(default_factory=dict)   # task -> split -> [EncodedInput]
    corpus: list = field(default_factory=list)  # encoded pretraining sentences


def prepare(config: ExperimentConfig) -> PreparedExperiment:
    """Load the vocab and every referenced dataset, encode them once."""
    vocab_file = config.resolve(config.vocab_path)
    if not os.path.exists(vocab_file):
        raise ConfigError(f"vocab file {vocab_file!r} does not exist")
    vocab = Vocab.load(vocab_file)
    econfig = EncoderConfig(vocab_size=len(vocab), **config.encoder)

    data = {}
    for task in config.tasks:
        if "train" not in task.paths:
            raise ConfigError(f"task {task.name!r} has no train path")
        data[task.name] = {}
        for split, rel in task.paths.items():
            path = config.resolve(rel)
            if not os.path.exists(path):
                raise ConfigError(f"{task.name} {split} file {path!r} does not exist")
            examples = load_dataset(path, task.kind)
            data[task.name][split] = encode_examples(task, examples, vocab,
                                                     config.max_len)

    corpus = []
    if config.pretrain_enabled:
        if not config.corpus_path:
            raise ConfigError("[pretrain] corpus path required when pretrain = true")
        corpus_file = config.resolve(config.corpus_path)
        if not os.path.exists(corpus_file):
            raise ConfigError(f"pretraining corpus {corpus_file!r} does not exist")
        with open(corpus_file, encoding="utf-8") as f:
            sentences = [line.strip() for line in f if line.strip()]
        corpus = [encode_single(wordpiece_tokenize(s, vocab), vocab,
                                config.pretrain_max_len) for s in sentences]
    return PreparedExperiment(config=config, vocab=vocab, econfig=econfig,
                              data=data, corpus=corpus)


def initial_encoder(prep: PreparedExperiment, seed: int,
                    out_dir: str | None = None) -> dict:
    """Random or MLM-pretrained shared parameters for one seed."""
    config = prep.config
    if not config.pretrain_enabled:
        return init_params(prep.econfig, seed=seed)
    result = mlm_pretrain(prep.econfig, prep.corpus, prep.vocab,
                          config.train_config("pretrain", seed),
                          mask_prob=config.mask_prob)
    if out_dir:
        save_checkpoint(result.checkpoint,
                        os.path.join(out_dir, f"pretrain-seed{seed}.ckpt"))
        write_training_log(result.log,
                           os.path.join(out_dir, f"pretrain-seed{seed}.log.tsv"))
    return result.checkpoint.shared_tensors()


def _test_metric(prep, task, tensors) -> float:
    batch = prep.config.train_config("refine", 0).batch_size
    return evaluate_task(task, tensors, prep.econfig,
                         prep.data[task.name].get("test", []), batch)


def _as_config(config) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    return load_experiment_config(config)


def run_experiment(config, out_dir: str | None = None,
                   seeds: list[int] | None = None) -> RunReport:
    """Single-task vs. MTL-refine vs. MTL-fine-tune on every listed task;
    cells are medians over the configured seeds. ``config`` is an
    ExperimentConfig or a config file path."""
    config = _as_config(config)
    prep = prepare(config)
    seeds = list(seeds) if seeds else config.seeds
    out_dir = out_dir or config.resolve(config.out_dir)
    os.makedirs(out_dir, exist_ok=True)

    per_seed: dict[str, dict[str, list[float]]] = {
        STRATEGY_SINGLE: {t.name: [] for t in config.tasks},
        STRATEGY_REFINE: {t.name: [] for t in config.tasks},
        STRATEGY_FINETUNE: {t.name: [] for t in config.tasks},
    }

    for seed in seeds:
        shared = initial_encoder(prep, seed, out_dir)
        refine_cfg = config.train_config("refine", seed)
        baseline_cfg = config.train_config("baseline", seed)

        for task in config.tasks:
            result = train_single_task(
                shared, prep.econfig, task, prep.data[task.name]["train"],
                baseline_cfg, dev_data=prep.data[task.name].get("dev"))
            per_seed[STRATEGY_SINGLE][task.name].append(
                _test_metric(prep, task, result.checkpoint.tensors))
            write_training_log(result.log, os.path.join(
                out_dir, f"single-{task.name}-seed{seed}.log.tsv"))

        refined = mtl_refine(
            shared, prep.econfig, config.tasks,
            {t.name: prep.data[t.name]["train"] for t in config.tasks},
            refine_cfg,
            dev_data={t.name: prep.data[t.name].get("dev", [])
                      for t in config.tasks})
        save_checkpoint(refined.checkpoint,
                        os.path.join(out_dir, f"refine-seed{seed}.ckpt"))
        write_training_log(refined.log,
                           os.path.join(out_dir, f"refine-seed{seed}.log.tsv"))
        for task in config.tasks:
            per_seed[STRATEGY_REFINE][task.name].append(
                _test_metric(prep, task, refined.checkpoint.tensors))

        if config.finetune_enabled:
            ft_cfg_base = config.train_config("finetune", seed)
            for task in config.tasks:
                result = fine_tune(refined.checkpoint, task,
                                   prep.data[task.name]["train"], ft_cfg_base,
                                   dev_data=prep.data[task.name].get("dev"))
                per_seed[STRATEGY_FINETUNE][task.name].append(
                    _test_metric(prep, task, result.checkpoint.tensors))
                save_checkpoint(result.checkpoint, os.path.join(
                    out_dir, f"finetune-{task.name}-seed{seed}.ckpt"))
                write_training_log(result.log, os.path.join(
                    out_dir, f"finetune-{task.name}-seed{seed}.log.tsv"))

    strategies = [STRATEGY_SINGLE, STRATEGY_REFINE]
    if config.finetune_enabled:
        strategies.append(STRATEGY_FINETUNE)
    report = RunReport(
        tasks=[t.name for t in config.tasks],
        metrics={s: {name: median(vals) for name, vals in per_seed[s].items()}
                 for s in strategies},
        strategies=strategies)

    with open(os.path.join(out_dir, "report.tsv"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(report.to_tsv())
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(report.to_text())
    return report


def pairwise_mtl(config, out_dir: str | None = None,
                 seeds: list[int] | None = None) -> PairwiseMatrix:
    """Directed task-affinity edges: for each ordered pair (s, t), compare
    task t trained alone against t refined jointly with s. One joint run per
    unordered pair and seed serves both directions. ``config`` is an
    ExperimentConfig or a config file path."""
    config = _as_config(config)
    if len(config.tasks) < 2:
        raise ConfigError("pairwise analysis needs at least 2 tasks")
    prep = prepare(config)
    seeds = list(seeds) if seeds else config.seeds
    if not seeds:
        raise ConfigError("pairwise analysis needs at least 1 seed")
    out_dir = out_dir or config.resolve(config.out_dir)
    os.makedirs(out_dir, exist_ok=True)

    names = [t.name for t in config.tasks]
    by_name = {t.name: t for t in config.tasks}
    baselines: dict[str, dict[int, float]] = {n: {} for n in names}
    joints: dict[tuple, dict[int, float]] = {}

    for seed in seeds:
        shared = initial_encoder(prep, seed, out_dir)
        refine_cfg = config.train_config("refine", seed)

        for task in config.tasks:
            result = train_single_task(
                shared, prep.econfig, task, prep.data[task.name]["train"],
                refine_cfg, dev_data=prep.data[task.name].get("dev"))
            if config.pairwise_finetune:
                result = fine_tune(result.checkpoint, task,
                                   prep.data[task.name]["train"],
                                   config.train_config("finetune", seed),
                                   dev_data=prep.data[task.name].get("dev"))
            baselines[task.name][seed] = _test_metric(prep, task,
                                                      result.checkpoint.tensors)

        for i, s in enumerate(names):
            for t in names[i + 1:]:
                pair = [by_name[s], by_name[t]]
                refined = mtl_refine(
                    shared, prep.econfig, pair,
                    {n: prep.data[n]["train"] for n in (s, t)},
                    refine_cfg,
                    dev_data={n: prep.data[n].get("dev", []) for n in (s, t)})
                for target in (s, t):
                    ckpt = refined.checkpoint
                    if config.pairwise_finetune:
                        ckpt = fine_tune(ckpt, by_name[target],
                                         prep.data[target]["train"],
                                         config.train_config("finetune", seed),
                                         dev_data=prep.data[target].get("dev")
                                         ).checkpoint
                    joints.setdefault((s, t), {}).setdefault(seed, {})[target] = \
                        _test_metric(prep, by_name[target], ckpt.tensors)

    matrix = PairwiseMatrix(tasks=names, eps=config.eps)
    for source in names:
        for target in names:
            if source == target:
                continue
            key = (source, target) if (source, target) in joints \
                else (target, source)
            deltas = [joints[key][seed][target] - baselines[target][seed]
                      for seed in seeds]
            matrix.add(source, target,
                       baseline=median([baselines[target][s] for s in seeds]),
                       joint=median([joints[key][s][target] for s in seeds]),
                       deltas=deltas)
    matrix.validate_complete()

    with open(os.path.join(out_dir, "pairwise.tsv"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(matrix.to_tsv())
    with open(os.path.join(out_dir, "pairwise.txt"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(matrix.to_text())
    return matrix
