"""Wordpiece tokenization, special-token packing, truncation, sentence splitting.

Text is lowercased before tokenization (uncased convention). Words are
whitespace-separated; argument placeholders used by relation tasks (e.g.
``@arg1$``) must be present in the vocabulary as atomic tokens so the
greedy matcher keeps them whole.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, ContractError

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
CONTINUATION = "##"

# label value for token positions excluded from tagging loss and metrics
# ([CLS]/[SEP]/pad/continuation pieces)
IGNORE_TAG = -1

_MAX_WORD_CHARS = 100


class Vocab:
    """Token-to-id map with dense ids 0..V-1 and the five special tokens."""

    def __init__(self, tokens: list[str]):
        self.id_to_token = list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            dupes = len(self.id_to_token) - len(self.token_to_id)
            raise ConfigError(f"vocab contains {dupes} duplicate token(s)")
        missing = [s for s in SPECIAL_TOKENS if s not in self.token_to_id]
        if missing:
            raise ConfigError(f"vocab is missing special tokens: {missing}")
        self.pad_id = self.token_to_id[PAD]
        self.unk_id = self.token_to_id[UNK]
        self.cls_id = self.token_to_id[CLS]
        self.sep_id = self.token_to_id[SEP]
        self.mask_id = self.token_to_id[MASK]

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    @classmethod
    def load(cls, path) -> "Vocab":
        """One token per line, id = line number."""
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for tok in self.id_to_token:
                f.write(tok + "\n")


@dataclass
class EncodedInput:
    """One packed example: fixed-length ids, segment ids, attention mask.

    ``label`` carries the task payload: a float score, a class id, or a
    per-token tag-id list (IGNORE_TAG on special/pad/continuation positions).
    """

    token_ids: list[int]
    segment_ids: list[int]
    attention_mask: list[int]
    label: object = None
    example_id: Optional[str] = None

    def __post_init__(self):
        n = len(self.token_ids)
        if len(self.segment_ids) != n or len(self.attention_mask) != n:
            raise ContractError("token_ids/segment_ids/attention_mask lengths differ")
        if isinstance(self.label, list) and len(self.label) != n:
            raise ContractError("tag sequence length must equal token length")

    def __len__(self):
        return len(self.token_ids)

    @property
    def real_length(self) -> int:
        return sum(self.attention_mask)


def _wordpiece_word(word: str, vocab: Vocab) -> list[str]:
    if len(word) > _MAX_WORD_CHARS:
        return [UNK]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = CONTINUATION + sub
            if sub in vocab:
                match = sub
                break
            end -= 1
        if match is None:
            return [UNK]
        pieces.append(match)
        start = end
    return pieces


def wordpiece_tokenize(text: str, vocab: Vocab) -> list[str]:
    """Greedy longest-match-first sub-word segmentation of lowercased text."""
    if vocab is None or len(vocab) == 0:
        raise ConfigError("wordpiece_tokenize requires a loaded vocab")
    tokens: list[str] = []
    for word in text.lower().split():
        tokens.extend(_wordpiece_word(word, vocab))
    return tokens


def split_long_sentence(words: list, limit: int = 30) -> list[list]:
    """Greedy chunks of exactly ``limit`` items plus a shorter final chunk."""
    if limit < 1:
        raise ConfigError("split limit must be >= 1")
    return [list(words[i:i + limit]) for i in range(0, len(words), limit)]


def _pad_to(ids, segs, max_len, pad_id):
    mask = [1] * len(ids) + [0] * (max_len - len(ids))
    ids = ids + [pad_id] * (max_len - len(ids))
    segs = segs + [0] * (max_len - len(segs))
    return ids, segs, mask


def encode_single(tokens: list[str], vocab: Vocab, max_len: int,
                  label=None, example_id=None) -> EncodedInput:
    """[CLS] + tokens + [SEP], truncated from the right, padded to max_len."""
    if max_len < 3:
        raise ConfigError(f"max_len must be >= 3 for a single sequence, got {max_len}")
    kept = tokens[:max_len - 2]
    ids = [vocab.cls_id] + [vocab.id_of(t) for t in kept] + [vocab.sep_id]
    ids, segs, mask = _pad_to(ids, [0] * len(ids), max_len, vocab.pad_id)
    return EncodedInput(ids, segs, mask, label=label, example_id=example_id)


def truncate_pair(tokens_a: list[str], tokens_b: list[str], budget: int):
    """Drop one trailing token at a time from the currently longer sequence
    (ties drop from the second) until the pair fits the budget."""
    a, b = list(tokens_a), list(tokens_b)
    while len(a) + len(b) > budget:
        if len(a) > len(b):
            a.pop()
        else:
            b.pop()
    return a, b


def encode_pair(tokens_a: list[str], tokens_b: list[str], vocab: Vocab,
                max_len: int, label=None, example_id=None) -> EncodedInput:
    """[CLS] A [SEP] B [SEP] with segment ids 0 over the first part, 1 over B [SEP]."""
    if max_len < 5:
        raise ConfigError(f"max_len must be >= 5 for a sequence pair, got {max_len}")
    a, b = truncate_pair(tokens_a, tokens_b, max_len - 3)
    ids = ([vocab.cls_id] + [vocab.id_of(t) for t in a] + [vocab.sep_id]
           + [vocab.id_of(t) for t in b] + [vocab.sep_id])
    segs = [0] * (len(a) + 2) + [1] * (len(b) + 1)
    ids, segs, mask = _pad_to(ids, segs, max_len, vocab.pad_id)
    return EncodedInput(ids, segs, mask, label=label, example_id=example_id)


def encode_tagged(words: list[str], word_tag_ids: list[int], vocab: Vocab,
                  max_len: int, example_id=None) -> EncodedInput:
    """Wordpiece each word; the first piece carries the word's tag id and
    continuation pieces, specials and padding carry IGNORE_TAG."""
    if len(words) != len(word_tag_ids):
        raise ContractError("one tag per word required")
    if max_len < 3:
        raise ConfigError(f"max_len must be >= 3, got {max_len}")
    tokens: list[str] = []
    tags: list[int] = []
    for word, tag in zip(words, word_tag_ids):
        pieces = _wordpiece_word(word.lower(), vocab)
        tokens.extend(pieces)
        tags.extend([tag] + [IGNORE_TAG] * (len(pieces) - 1))
    kept = tokens[:max_len - 2]
    kept_tags = tags[:max_len - 2]
    ids = [vocab.cls_id] + [vocab.id_of(t) for t in kept] + [vocab.sep_id]
    tag_seq = [IGNORE_TAG] + kept_tags + [IGNORE_TAG]
    ids, segs, mask = _pad_to(ids, [0] * len(ids), max_len, vocab.pad_id)
    tag_seq = tag_seq + [IGNORE_TAG] * (max_len - len(tag_seq))
    return EncodedInput(ids, segs, mask, label=tag_seq, example_id=example_id)


def decode_real_tokens(enc: EncodedInput, vocab: Vocab) -> list[str]:
    """Tokens at real (non-pad, non-[CLS]/[SEP]) positions, in order."""
    out = []
    for tok_id, m in zip(enc.token_ids, enc.attention_mask):
        if m and tok_id not in (vocab.cls_id, vocab.sep_id):
            out.append(vocab.id_to_token[tok_id])
    return out
