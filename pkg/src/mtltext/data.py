"""Dataset file formats and the example-to-model-input encoding pipeline.

Three on-disk formats, all UTF-8 with LF line endings:
  similarity    TSV: id, text_a, text_b, score (float)
  inference     TSV: id, text_a, text_b, label (class name)
  classification TSV: id, text (arguments pre-tagged), label
  tagging       CoNLL: token TAB tag per line, blank line between sentences,
                BIO tags
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, ParseError
from .heads import TaskSpec
from .tokenizer import (EncodedInput, Vocab, encode_pair, encode_single,
                        encode_tagged, split_long_sentence, wordpiece_tokenize)


@dataclass
class Example:
    """One raw example. For tagging, text_a is the word list and label the
    per-word tag list; otherwise text_a/text_b are strings."""

    id: str
    text_a: object
    text_b: Optional[str] = None
    label: object = None

    def __post_init__(self):
        if isinstance(self.label, list) and len(self.label) != len(self.text_a):
            raise ParseError(f"example {self.id}: {len(self.text_a)} words but "
                             f"{len(self.label)} tags")


def _is_bio(tag: str) -> bool:
    return tag == "O" or tag.startswith("B-") or tag.startswith("I-")


def load_dataset(path, kind: str) -> list[Example]:
    """Parse one dataset file; raises ParseError naming the offending line."""
    if kind == "tagging":
        return _load_conll(path)
    if kind not in ("similarity", "classification", "inference"):
        raise ConfigError(f"unknown dataset kind {kind!r}")

    ncols = 3 if kind == "classification" else 4
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise ParseError(f"{path}:{lineno}: expected {ncols} tab-separated "
                                 f"columns, got {len(parts)}")
            if kind == "classification":
                ex_id, text, label = parts
                examples.append(Example(ex_id, text, label=label))
            elif kind == "inference":
                ex_id, text_a, text_b, label = parts
                examples.append(Example(ex_id, text_a, text_b, label))
            else:
                ex_id, text_a, text_b, score = parts
                try:
                    value = float(score)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: non-numeric score {score!r}") from None
                examples.append(Example(ex_id, text_a, text_b, value))
    return examples


def _load_conll(path) -> list[Example]:
    examples = []
    words: list[str] = []
    tags: list[str] = []

    def flush():
        nonlocal words, tags
        if words:
            examples.append(Example(f"s{len(examples) + 1}", words, label=tags))
            words, tags = [], []

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'token<TAB>tag', "
                                 f"got {line!r}")
            token, tag = parts
            if not _is_bio(tag):
                raise ParseError(f"{path}:{lineno}: tag {tag!r} outside the BIO scheme")
            words.append(token)
            tags.append(tag)
    flush()
    return examples


def save_dataset(examples: list[Example], path, kind: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if kind == "tagging":
            for ex in examples:
                for word, tag in zip(ex.text_a, ex.label):
                    f.write(f"{word}\t{tag}\n")
                f.write("\n")
        elif kind == "classification":
            for ex in examples:
                f.write(f"{ex.id}\t{ex.text_a}\t{ex.label}\n")
        else:
            for ex in examples:
                f.write(f"{ex.id}\t{ex.text_a}\t{ex.text_b}\t{ex.label}\n")


def encode_examples(task: TaskSpec, examples: list[Example], vocab: Vocab,
                    max_len: int, sentence_limit: int = 30) -> list[EncodedInput]:
    """Raw examples -> packed model inputs, per the task's input convention.

    Tagging sentences longer than ``sentence_limit`` words are split into
    sub-sentences (tags split identically) before wordpiece, so one raw
    example may yield several inputs.
    """
    out = []
    for ex in examples:
        if task.kind == "similarity":
            out.append(encode_pair(wordpiece_tokenize(ex.text_a, vocab),
                                   wordpiece_tokenize(ex.text_b, vocab),
                                   vocab, max_len, label=float(ex.label),
                                   example_id=ex.id))
        elif task.kind == "inference":
            out.append(encode_pair(wordpiece_tokenize(ex.text_a, vocab),
                                   wordpiece_tokenize(ex.text_b, vocab),
                                   vocab, max_len,
                                   label=task.label_id(ex.label, ex.id),
                                   example_id=ex.id))
        elif task.kind == "classification":
            out.append(encode_single(wordpiece_tokenize(ex.text_a, vocab),
                                     vocab, max_len,
                                     label=task.label_id(ex.label, ex.id),
                                     example_id=ex.id))
        else:
            word_chunks = split_long_sentence(ex.text_a, sentence_limit)
            tag_chunks = split_long_sentence(ex.label, sentence_limit)
            for i, (wchunk, tchunk) in enumerate(zip(word_chunks, tag_chunks)):
                tag_ids = [task.tag_id(t, ex.id) for t in tchunk]
                out.append(encode_tagged(wchunk, tag_ids, vocab, max_len,
                                         example_id=f"{ex.id}.{i}"))
    return out
