"""Task-specific decoders and losses.

Each head is a single fully-connected layer on top of the shared encoder
output: similarity and (pair-)classification read h_0 at [CLS], tagging
reads every position. Inference is literally the classification head
applied to pair-packed input, so its registry entry reuses the same
function objects. Batch losses are means (per example, and per non-ignored
token for tagging) so learning-rate semantics do not depend on batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DataError
from .seeding import rng_from, trunc_normal
from .tokenizer import IGNORE_TAG

TASK_KINDS = ("similarity", "classification", "inference", "tagging")

DEFAULT_METRICS = {
    "similarity": "pearson",
    "classification": "micro_f1",
    "inference": "accuracy",
    "tagging": "entity_f1",
}


@dataclass(frozen=True)
class TaskSpec:
    """One task: its kind, label/tag set, metric, and (optional) file paths."""

    name: str
    kind: str
    labels: tuple = ()          # classification / inference class names
    tags: tuple = ()            # tagging BIO tag names
    metric: str = ""
    negative_label: Optional[str] = None  # excluded from micro-F1 positives
    paths: dict = field(default_factory=dict)  # split name -> dataset path

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r} for task {self.name!r}")
        if self.kind in ("classification", "inference"):
            if len(self.labels) < 2:
                raise ConfigError(f"task {self.name!r} needs >= 2 labels")
        if self.kind == "tagging":
            if len(self.tags) < 2:
                raise ConfigError(f"task {self.name!r} needs >= 2 tags")
            bad = [t for t in self.tags
                   if t != "O" and not (t.startswith("B-") or t.startswith("I-"))]
            if bad:
                raise ConfigError(f"task {self.name!r} tags not in BIO scheme: {bad}")
        if self.negative_label and self.negative_label not in self.labels:
            raise ConfigError(
                f"negative label {self.negative_label!r} not in task labels")
        if not self.metric:
            object.__setattr__(self, "metric", DEFAULT_METRICS[self.kind])

    @property
    def num_outputs(self) -> int:
        if self.kind == "similarity":
            return 1
        if self.kind == "tagging":
            return len(self.tags)
        return len(self.labels)

    def label_id(self, name: str, example_id=None) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise DataError(
                f"label {name!r} outside the label set of task {self.name!r}"
                + (f" (example {example_id})" if example_id else "")) from None

    def tag_id(self, name: str, example_id=None) -> int:
        try:
            return self.tags.index(name)
        except ValueError:
            raise DataError(
                f"tag {name!r} outside the tag set of task {self.name!r}"
                + (f" (example {example_id})" if example_id else "")) from None


def head_prefix(task: TaskSpec) -> str:
    return f"task/{task.name}/"


def new_head(task: TaskSpec, hidden_size: int, seed) -> dict[str, np.ndarray]:
    """Fresh head parameters: truncated-normal weight (std 0.02), zero bias."""
    rng = rng_from("head-init", task.name, seed)
    p = head_prefix(task)
    if task.kind == "similarity":
        return {p + "w": trunc_normal(rng, (hidden_size,)),
                p + "b": np.zeros(())}
    n = task.num_outputs
    return {p + "w": trunc_normal(rng, (n, hidden_size)),
            p + "b": np.zeros((n,))}


def cls_vector(hidden: T.Tensor) -> T.Tensor:
    """h_0 rows of a (B, T, H) batch -> (B, H)."""
    b, t, h = hidden.shape
    flat = T.reshape(hidden, (b * t, h))
    return T.gather(flat, np.arange(b) * t)


def _maybe_drop(x, mode, rate, rng):
    if mode == "train" and rate > 0:
        if rng is None:
            raise ContractError("train mode needs a dropout rng")
        return T.dropout(x, rate, rng)
    return x


def similarity_forward(head_params, task: TaskSpec, h0: T.Tensor,
                       mode="eval", dropout=0.1, rng=None) -> T.Tensor:
    """Unbounded score per example: w . h0 + b, shape (B,)."""
    p = head_prefix(task)
    h0 = _maybe_drop(h0, mode, dropout, rng)
    w = T.reshape(_as_tensor(head_params[p + "w"]), (-1, 1))
    score = T.reshape(h0 @ w, (h0.shape[0],))
    return score + _as_tensor(head_params[p + "b"])


def mse_loss(scores: T.Tensor, targets) -> T.Tensor:
    diff = T.sub(T.Tensor(np.asarray(targets, dtype=np.float64)), scores)
    return T.mean(T.mul(diff, diff))


def classify_forward(head_params, task: TaskSpec, h0: T.Tensor,
                     mode="eval", dropout=0.1, rng=None) -> T.Tensor:
    """Class probabilities softmax(w h0 + b), shape (B, C)."""
    p = head_prefix(task)
    h0 = _maybe_drop(h0, mode, dropout, rng)
    logits = h0 @ T.transpose(_as_tensor(head_params[p + "w"]), (1, 0))
    logits = logits + _as_tensor(head_params[p + "b"])
    return T.softmax(logits, axis=-1)


def ce_loss(probs: T.Tensor, label_ids) -> T.Tensor:
    ids = np.asarray(label_ids, dtype=np.intp)
    if ids.min() < 0 or ids.max() >= probs.shape[-1]:
        raise DataError(f"label id outside [0, {probs.shape[-1]})")
    return T.neg(T.mean(T.log(T.pick(probs, ids))))


def tag_forward(head_params, task: TaskSpec, hidden: T.Tensor,
                mode="eval", dropout=0.1, rng=None) -> T.Tensor:
    """Per-token tag probabilities, shape (B, T, L)."""
    p = head_prefix(task)
    hidden = _maybe_drop(hidden, mode, dropout, rng)
    logits = hidden @ T.transpose(_as_tensor(head_params[p + "w"]), (1, 0))
    logits = logits + _as_tensor(head_params[p + "b"])
    return T.softmax(logits, axis=-1)


def token_ce_loss(probs: T.Tensor, tag_ids) -> T.Tensor:
    """Mean -log P(gold tag) over non-ignored positions."""
    tags = np.asarray(tag_ids, dtype=np.intp)
    b, t, l = probs.shape
    flat_tags = tags.reshape(-1)
    keep = np.nonzero(flat_tags != IGNORE_TAG)[0]
    if keep.size == 0:
        raise DataError("tagging batch has no non-ignored positions")
    if flat_tags[keep].min() < 0 or flat_tags[keep].max() >= l:
        raise DataError(f"tag id outside [0, {l})")
    flat = T.reshape(probs, (b * t, l))
    gold = T.pick(T.gather(flat, keep), flat_tags[keep])
    return T.neg(T.mean(T.log(gold)))


def _as_tensor(value):
    return value if isinstance(value, T.Tensor) else T.Tensor(value)


# kind -> (forward on h0/hidden, loss). Inference reuses the classification
# entries by identity, not by copy.
_CLASSIFY_ENTRY = (classify_forward, ce_loss)
HEAD_REGISTRY = {
    "similarity": (similarity_forward, mse_loss),
    "classification": _CLASSIFY_ENTRY,
    "inference": _CLASSIFY_ENTRY,
    "tagging": (tag_forward, token_ce_loss),
}


def batch_labels(task: TaskSpec, batch) -> np.ndarray:
    labels = [e.label for e in batch]
    if any(l is None for l in labels):
        raise DataError(f"unlabeled example in a {task.name!r} batch")
    if task.kind == "similarity":
        return np.asarray(labels, dtype=np.float64)
    return np.asarray(labels, dtype=np.intp)


def batch_loss(task: TaskSpec, head_params, hidden: T.Tensor, batch,
               mode="eval", dropout=0.1, rng=None) -> T.Tensor:
    """Scalar task loss for an encoded batch with its labels."""
    labels = batch_labels(task, batch)
    forward, loss = HEAD_REGISTRY[task.kind]
    if task.kind == "tagging":
        out = forward(head_params, task, hidden, mode, dropout, rng)
    else:
        out = forward(head_params, task, cls_vector(hidden), mode, dropout, rng)
    return loss(out, labels)


def predict(task: TaskSpec, head_params, hidden: T.Tensor):
    """Eval-mode predictions: scores (B,), class ids (B,), or tag ids (B, T)."""
    forward, _ = HEAD_REGISTRY[task.kind]
    if task.kind == "similarity":
        return forward(head_params, task, cls_vector(hidden)).data
    if task.kind == "tagging":
        return forward(head_params, task, hidden).data.argmax(axis=-1)
    return forward(head_params, task, cls_vector(hidden)).data.argmax(axis=-1)
