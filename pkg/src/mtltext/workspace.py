"""Writes a ready-to-run synthetic experiment workspace: datasets, vocab,
pretraining corpus, and a calibrated desk-scale config file."""

from __future__ import annotations

import os

from .data import save_dataset
from .synthetic import gen_pretrain_corpus, gen_synthetic_suite

_CONFIG_TEMPLATE = """\
[experiment]
tasks = {tasks}
seeds = {seeds}
vocab = vocab.txt
max_len = 32
pretrain = true
finetune = true
pairwise_finetune = false
eps = 0.005
out_dir = runs

[encoder]
hidden_size = 64
num_layers = 2
num_heads = 2
ff_size = 256
max_positions = 32
dropout = 0.1

[pretrain]
corpus = corpus.txt
learning_rate = 0.01
batch_size = 32
max_epochs = 30
weight_decay = 0.0
dropout = 0.0
mask_prob = 0.25
max_len = 16

[refine]
learning_rate = 0.002
batch_size = 32
max_epochs = 10
weight_decay = 0.0
dropout = 0.1

[finetune]
learning_rate = 0.001
batch_size = 32
max_epochs = 10
weight_decay = 0.0
dropout = 0.1

{task_sections}
"""

_EXT = {"similarity": "tsv", "classification": "tsv", "inference": "tsv",
        "tagging": "conll"}


def _task_section(task) -> str:
    ext = _EXT[task.kind]
    lines = [f"[task:{task.name}]", f"kind = {task.kind}"]
    if task.labels:
        lines.append("labels = " + ", ".join(task.labels))
    if task.negative_label:
        lines.append(f"negative_label = {task.negative_label}")
    if task.tags:
        lines.append("tags = " + ", ".join(task.tags))
    lines.append(f"metric = {task.metric}")
    for split in ("train", "dev", "test"):
        lines.append(f"{split} = {task.name}-{split}.{ext}")
    return "\n".join(lines) + "\n"


def write_synthetic_workspace(out_dir, seed=0, difficulty=0.5, train=512,
                              dev=128, test=128, pretrain_sentences=1000,
                              seeds=(0, 1, 2, 3, 4)) -> str:
    """Generate the suite, save all files under out_dir, return the config path."""
    os.makedirs(out_dir, exist_ok=True)
    suite = gen_synthetic_suite(seed, difficulty=difficulty, train=train,
                                dev=dev, test=test)
    suite.vocab.save(os.path.join(out_dir, "vocab.txt"))

    corpus = gen_pretrain_corpus(seed, n=pretrain_sentences, difficulty=difficulty)
    with open(os.path.join(out_dir, "corpus.txt"), "w", encoding="utf-8",
              newline="\n") as f:
        for sentence in corpus:
            f.write(sentence + "\n")

    for task in suite.tasks:
        for split in ("train", "dev", "test"):
            path = os.path.join(out_dir, f"{task.name}-{split}.{_EXT[task.kind]}")
            save_dataset(suite.data[task.name][split], path, task.kind)

    config_path = os.path.join(out_dir, "config.ini")
    with open(config_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_CONFIG_TEMPLATE.format(
            tasks=", ".join(t.name for t in suite.tasks),
            seeds=", ".join(str(s) for s in seeds),
            task_sections="\n".join(_task_section(t) for t in suite.tasks)))
    return config_path
