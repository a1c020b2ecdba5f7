"""Synthetic four-task suite generated from one shared latent model.

A common vocabulary is partitioned into topic clusters arranged on a ring.
Every task's labels derive from cluster identity, so the tasks are related
through the same latent structure and benefit from a shared encoder:

  similarity      pair score = ring closeness of the two sentence clusters
  classification  relation class = cluster of the words around two argument
                  placeholders (clusters 4..7 map to the negative class)
  inference       label = ring distance between premise and hypothesis
                  clusters (0 entailment, 2 neutral, 4 contradiction)
  tagging         entity words come from dedicated clusters (X: 0-1, Y: 2-3)

``difficulty`` in [0, 1] sets the chance that a content word is drawn from
the whole vocabulary instead of the intended cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Example
from .heads import TaskSpec
from .seeding import rng_from
from .tokenizer import Vocab

N_CLUSTERS = 8
WORDS_PER_CLUSTER = 12
FUNCTION_WORDS = ("the", "a", "of", "and", "to", "in", "is", "on")
ARG1, ARG2 = "@arg1$", "@arg2$"

SIM_TASK = "syn-sim"
REL_TASK = "syn-rel"
NLI_TASK = "syn-nli"
NER_TASK = "syn-ner"

REL_LABELS = ("none", "r1", "r2", "r3", "r4")
NLI_LABELS = ("entailment", "neutral", "contradiction")
NER_TAGS = ("O", "B-X", "I-X", "B-Y", "I-Y")

_ENTITY_CLUSTERS = {"X": (0, 1), "Y": (2, 3)}
_BACKGROUND_CLUSTERS = (4, 5, 6, 7)


def cluster_words(cluster: int) -> list[str]:
    return [f"c{cluster}w{j:02d}" for j in range(WORDS_PER_CLUSTER)]


def synthetic_vocab() -> Vocab:
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    tokens.extend(FUNCTION_WORDS)
    for k in range(N_CLUSTERS):
        tokens.extend(cluster_words(k))
    tokens.extend([ARG1, ARG2])
    return Vocab(tokens)


def word_cluster_map() -> dict[str, int]:
    return {w: k for k in range(N_CLUSTERS) for w in cluster_words(k)}


def ring_distance(i: int, j: int) -> int:
    d = abs(i - j) % N_CLUSTERS
    return min(d, N_CLUSTERS - d)


def similarity_score(i: int, j: int) -> float:
    """Cluster closeness mapped to the usual 0..5 similarity range."""
    return 5.0 * (1.0 - ring_distance(i, j) / (N_CLUSTERS / 2))


@dataclass
class SyntheticSuite:
    vocab: Vocab
    tasks: list[TaskSpec]
    data: dict = field(default_factory=dict)  # task name -> split -> [Example]

    def task(self, name: str) -> TaskSpec:
        return next(t for t in self.tasks if t.name == name)


def _content_word(rng, cluster: int, noise: float, all_words: list[str]) -> str:
    if rng.random() < noise:
        return all_words[rng.integers(len(all_words))]
    words = cluster_words(cluster)
    return words[rng.integers(len(words))]


def _sentence(rng, cluster: int, noise: float, all_words, lo=6, hi=12,
              function_rate=0.25) -> list[str]:
    n = int(rng.integers(lo, hi + 1))
    out = []
    for _ in range(n):
        if rng.random() < function_rate:
            out.append(FUNCTION_WORDS[rng.integers(len(FUNCTION_WORDS))])
        else:
            out.append(_content_word(rng, cluster, noise, all_words))
    return out


def _gen_similarity(rng, n: int, split: str, noise: float, all_words) -> list[Example]:
    out = []
    for i in range(n):
        a = int(rng.integers(N_CLUSTERS))
        # uniform over ring distances so every score level appears
        dist = int(rng.integers(0, N_CLUSTERS // 2 + 1))
        b = (a + dist * (1 if rng.random() < 0.5 else -1)) % N_CLUSTERS
        out.append(Example(
            f"{SIM_TASK}-{split}-{i:05d}",
            " ".join(_sentence(rng, a, noise, all_words)),
            " ".join(_sentence(rng, b, noise, all_words)),
            similarity_score(a, b)))
    return out


# relation = ordered pair of (cluster left of @arg1$, cluster right of @arg2$);
# every other pair is the negative class, so the label needs both contexts
REL_PATTERNS = {"r1": (0, 1), "r2": (1, 0), "r3": (2, 3), "r4": (3, 2)}


def _gen_relation(rng, n: int, split: str, noise: float, all_words) -> list[Example]:
    pattern_set = set(REL_PATTERNS.values())
    out = []
    for i in range(n):
        label = REL_LABELS[rng.integers(len(REL_LABELS))]
        if label == "none":
            while True:
                pair = (int(rng.integers(N_CLUSTERS)), int(rng.integers(N_CLUSTERS)))
                if pair not in pattern_set:
                    break
        else:
            pair = REL_PATTERNS[label]
        left = _sentence(rng, pair[0], noise, all_words, 2, 3, function_rate=0.1)
        middle = [FUNCTION_WORDS[rng.integers(len(FUNCTION_WORDS))]
                  for _ in range(int(rng.integers(1, 3)))]
        right = _sentence(rng, pair[1], noise, all_words, 2, 3, function_rate=0.1)
        words = left + [ARG1] + middle + [ARG2] + right
        out.append(Example(f"{REL_TASK}-{split}-{i:05d}", " ".join(words),
                           label=label))
    return out


def _gen_inference(rng, n: int, split: str, noise: float, all_words) -> list[Example]:
    distances = {"entailment": 0, "neutral": 2, "contradiction": 4}
    out = []
    for i in range(n):
        label = NLI_LABELS[rng.integers(len(NLI_LABELS))]
        premise_cluster = int(rng.integers(N_CLUSTERS))
        sign = 1 if rng.random() < 0.5 else -1
        hyp_cluster = (premise_cluster + sign * distances[label]) % N_CLUSTERS
        out.append(Example(
            f"{NLI_TASK}-{split}-{i:05d}",
            " ".join(_sentence(rng, premise_cluster, noise, all_words)),
            " ".join(_sentence(rng, hyp_cluster, noise, all_words, 4, 8)),
            label))
    return out


def _gen_tagging(rng, n: int, split: str, noise: float, all_words) -> list[Example]:
    out = []
    for i in range(n):
        words: list[str] = []
        tags: list[str] = []
        target = int(rng.integers(7, 13))
        while len(words) < target:
            roll = rng.random()
            if roll < 0.30:  # insert an entity span of 1-3 words
                etype = "X" if rng.random() < 0.5 else "Y"
                clusters = _ENTITY_CLUSTERS[etype]
                span = int(rng.integers(1, 4))
                for j in range(span):
                    cluster = int(clusters[rng.integers(2)])
                    words.append(_content_word(rng, cluster, noise, all_words))
                    tags.append(("B-" if j == 0 else "I-") + etype)
            elif roll < 0.55:
                words.append(FUNCTION_WORDS[rng.integers(len(FUNCTION_WORDS))])
                tags.append("O")
            else:
                cluster = int(_BACKGROUND_CLUSTERS[rng.integers(4)])
                words.append(_content_word(rng, cluster, noise, all_words))
                tags.append("O")
        out.append(Example(f"{NER_TASK}-{split}-{i:05d}", words, label=tags))
    return out


def gen_synthetic_suite(seed, difficulty: float = 0.5, train: int = 512,
                        dev: int = 128, test: int = 128) -> SyntheticSuite:
    """Four related tasks with disjoint train/dev/test splits, deterministic
    in ``seed``."""
    noise = 0.05 + 0.30 * float(difficulty)
    vocab = synthetic_vocab()
    all_words = sorted(word_cluster_map())
    tasks = [
        TaskSpec(name=SIM_TASK, kind="similarity"),
        TaskSpec(name=REL_TASK, kind="classification", labels=REL_LABELS,
                 negative_label="none"),
        TaskSpec(name=NLI_TASK, kind="inference", labels=NLI_LABELS),
        TaskSpec(name=NER_TASK, kind="tagging", tags=NER_TAGS),
    ]
    generators = {
        SIM_TASK: _gen_similarity,
        REL_TASK: _gen_relation,
        NLI_TASK: _gen_inference,
        NER_TASK: _gen_tagging,
    }
    sizes = {"train": train, "dev": dev, "test": test}
    data = {}
    for task in tasks:
        data[task.name] = {}
        for split, n in sizes.items():
            rng = rng_from("synthetic", seed, task.name, split)
            data[task.name][split] = generators[task.name](
                rng, n, split, noise, all_words)
    return SyntheticSuite(vocab=vocab, tasks=tasks, data=data)


def gen_pretrain_corpus(seed, n: int = 500, difficulty: float = 0.5) -> list[str]:
    """Unlabeled sentences from the same latent cluster model."""
    noise = 0.05 + 0.30 * float(difficulty)
    all_words = sorted(word_cluster_map())
    rng = rng_from("synthetic-corpus", seed)
    out = []
    for _ in range(n):
        cluster = int(rng.integers(N_CLUSTERS))
        out.append(" ".join(_sentence(rng, cluster, noise, all_words)))
    return out
