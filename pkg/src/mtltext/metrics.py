"""Evaluation metrics: Pearson, accuracy, micro F1, and entity-level F1."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ContractError, MetricError

METRIC_IDS = ("pearson", "accuracy", "micro_f1", "entity_f1")


@dataclass(frozen=True)
class MetricResult:
    metric: str
    value: float
    support: int

    def __post_init__(self):
        lo = -1.0 if self.metric == "pearson" else 0.0
        if not lo - 1e-12 <= self.value <= 1.0 + 1e-12:
            raise MetricError(f"{self.metric} value {self.value} out of range")
        if self.support <= 0:
            raise MetricError(f"{self.metric} computed with no support")


def pearson(preds, golds) -> MetricResult:
    """Sample Pearson correlation coefficient."""
    if len(preds) != len(golds):
        raise ContractError("pearson: length mismatch")
    n = len(preds)
    if n < 2:
        raise MetricError("pearson needs at least 2 points")
    mp = sum(preds) / n
    mg = sum(golds) / n
    cov = sum((p - mp) * (g - mg) for p, g in zip(preds, golds))
    vp = sum((p - mp) ** 2 for p in preds)
    vg = sum((g - mg) ** 2 for g in golds)
    if vp == 0.0 or vg == 0.0:
        raise MetricError("pearson undefined: zero variance")
    value = cov / math.sqrt(vp * vg)
    return MetricResult("pearson", min(1.0, max(-1.0, value)), n)


def accuracy(preds, golds) -> MetricResult:
    if len(preds) != len(golds):
        raise ContractError("accuracy: length mismatch")
    if not golds:
        raise MetricError("accuracy of an empty set")
    hits = sum(1 for p, g in zip(preds, golds) if p == g)
    return MetricResult("accuracy", hits / len(golds), len(golds))


def _f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def micro_f1(preds, golds, positive_classes) -> MetricResult:
    """TP/FP/FN pooled over the positive classes (negative class excluded)."""
    if len(preds) != len(golds):
        raise ContractError("micro_f1: length mismatch")
    if not golds:
        raise MetricError("micro_f1 of an empty set")
    positives = set(positive_classes)
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        if p in positives and p == g:
            tp += 1
        else:
            if p in positives:
                fp += 1
            if g in positives:
                fn += 1
    return MetricResult("micro_f1", _f1(tp, fp, fn), len(golds))


def bio_decode(tags) -> set:
    """Maximal (type, start, end) spans of a BIO sequence, end exclusive.

    Lenient: an I-X that does not continue an open X run (after O, after a
    different type, or at the start) opens a new entity at that token.
    """
    spans = set()
    start = None
    current = None
    for i, tag in enumerate(tags):
        if tag == "O":
            prefix, etype = None, None
        elif tag.startswith("B-") or tag.startswith("I-"):
            prefix, etype = tag[0], tag[2:]
        else:
            raise ContractError(f"tag {tag!r} outside the BIO scheme")
        continues = prefix == "I" and current == etype
        if current is not None and not continues:
            spans.add((current, start, i))
            current = None
        if prefix is not None and not continues:
            start, current = i, etype
    if current is not None:
        spans.add((current, start, len(tags)))
    return spans


def entity_f1(pred_tag_seqs, gold_tag_seqs) -> MetricResult:
    """Exact-span, exact-type F1 over entities decoded from BIO sequences."""
    if len(pred_tag_seqs) != len(gold_tag_seqs):
        raise ContractError("entity_f1: sentence count mismatch")
    if not gold_tag_seqs:
        raise MetricError("entity_f1 of an empty set")
    tp = fp = fn = 0
    for pred, gold in zip(pred_tag_seqs, gold_tag_seqs):
        if len(pred) != len(gold):
            raise ContractError("entity_f1: tag sequence length mismatch")
        p_spans = bio_decode(pred)
        g_spans = bio_decode(gold)
        tp += len(p_spans & g_spans)
        fp += len(p_spans - g_spans)
        fn += len(g_spans - p_spans)
    return MetricResult("entity_f1", _f1(tp, fp, fn), len(gold_tag_seqs))


def compute_metric(metric_id: str, preds, golds, positive_classes=()) -> MetricResult:
    if metric_id == "pearson":
        return pearson(preds, golds)
    if metric_id == "accuracy":
        return accuracy(preds, golds)
    if metric_id == "micro_f1":
        return micro_f1(preds, golds, positive_classes)
    if metric_id == "entity_f1":
        return entity_f1(preds, golds)
    raise ContractError(f"unknown metric {metric_id!r}")
