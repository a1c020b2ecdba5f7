"""Tiny deterministic task worlds shared by the trainer/experiment tests."""

import numpy as np

from mtltext.encoder import EncoderConfig
from mtltext.heads import TaskSpec
from mtltext.tokenizer import Vocab, encode_single, encode_pair, encode_tagged

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def tiny_vocab(n_tokens=12):
    return Vocab(SPECIALS + [f"t{i:02d}" for i in range(n_tokens)])


def tiny_encoder_config(vocab, **overrides):
    base = dict(vocab_size=len(vocab), max_positions=10, hidden_size=16,
                num_layers=1, num_heads=2, ff_size=32, dropout=0.1)
    base.update(overrides)
    return EncoderConfig(**base)


def memorization_classification(vocab, n=16, seed=0, max_len=8):
    """Sentences of content tokens; class is decided by the first token's
    index parity. Perfectly learnable from token identity."""
    task = TaskSpec(name="memo-clf", kind="classification", labels=("even", "odd"),
                    metric="accuracy")
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        first = int(rng.integers(0, 12))
        rest = rng.integers(0, 12, size=3)
        tokens = [f"t{first:02d}"] + [f"t{j:02d}" for j in rest]
        data.append(encode_single(tokens, vocab, max_len, label=first % 2,
                                  example_id=f"m{i}"))
    return task, data


def memorization_similarity(vocab, n=16, seed=1, max_len=10):
    """Pair score = 2.0 when the two sides share their first token else 0.5."""
    task = TaskSpec(name="memo-sim", kind="similarity")
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        a = int(rng.integers(0, 6))
        same = bool(rng.integers(0, 2))
        b = a if same else int(rng.integers(6, 12))
        data.append(encode_pair([f"t{a:02d}", f"t{int(rng.integers(0, 12)):02d}"],
                                [f"t{b:02d}"], vocab, max_len,
                                label=2.0 if same else 0.5, example_id=f"s{i}"))
    return task, data


def memorization_inference(vocab, n=16, seed=2, max_len=10):
    """Pair-packed inputs whose label is decided by the hypothesis token."""
    task = TaskSpec(name="memo-inf", kind="inference", labels=("lo", "hi"),
                    metric="accuracy")
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        a = int(rng.integers(0, 12))
        b = int(rng.integers(0, 12))
        data.append(encode_pair([f"t{a:02d}"], [f"t{b:02d}"], vocab, max_len,
                                label=0 if b < 6 else 1, example_id=f"i{i}"))
    return task, data


def memorization_tagging(vocab, n=16, seed=3, max_len=8):
    """Tokens t00..t05 are entity X words, the rest are O."""
    task = TaskSpec(name="memo-tag", kind="tagging", tags=("O", "B-X", "I-X"))
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        idxs = rng.integers(0, 12, size=4)
        words = [f"t{j:02d}" for j in idxs]
        tags = []
        prev_entity = False
        for j in idxs:
            if j < 6:
                tags.append(2 if prev_entity else 1)  # I-X after X else B-X
                prev_entity = True
            else:
                tags.append(0)
                prev_entity = False
        data.append(encode_tagged(words, tags, vocab, max_len,
                                  example_id=f"t{i}"))
    return task, data
