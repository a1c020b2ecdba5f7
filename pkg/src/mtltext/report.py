"""Result tables: the three-strategy comparison and the pairwise edge matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ContractError

STRATEGY_SINGLE = "single-task"
STRATEGY_REFINE = "mtl-refine"
STRATEGY_FINETUNE = "mtl-finetune"

EDGE_IMPROVES = "improves"
EDGE_DECREASES = "decreases"
EDGE_NO_EFFECT = "no-effect"


def median(values) -> float:
    xs = sorted(values)
    if not xs:
        raise ContractError("median of an empty list")
    mid = len(xs) // 2
    if len(xs) % 2:
        return float(xs[mid])
    return 0.5 * (xs[mid - 1] + xs[mid])


def edge_label(delta: float, eps: float) -> str:
    if delta > eps:
        return EDGE_IMPROVES
    if delta < -eps:
        return EDGE_DECREASES
    return EDGE_NO_EFFECT


def _fmt(value: float) -> str:
    return "nan" if isinstance(value, float) and math.isnan(value) else f"{value:.4f}"


@dataclass
class RunReport:
    """Per-task test metrics for each training strategy, plus the unweighted
    average column; tasks appear in config order."""

    tasks: list[str]
    metrics: dict  # strategy -> {task name -> float}
    strategies: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.strategies:
            self.strategies = list(self.metrics)
        for strategy in self.strategies:
            missing = [t for t in self.tasks if t not in self.metrics[strategy]]
            if missing:
                raise ContractError(f"{strategy} is missing tasks {missing}")

    def average(self, strategy: str) -> float:
        return sum(self.metrics[strategy][t] for t in self.tasks) / len(self.tasks)

    def to_tsv(self) -> str:
        lines = ["strategy\t" + "\t".join(self.tasks) + "\tavg"]
        for strategy in self.strategies:
            row = [strategy]
            row.extend(_fmt(self.metrics[strategy][t]) for t in self.tasks)
            row.append(_fmt(self.average(strategy)))
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        headers = ["strategy"] + self.tasks + ["avg"]
        rows = []
        for strategy in self.strategies:
            row = [strategy]
            row.extend(_fmt(self.metrics[strategy][t]) for t in self.tasks)
            row.append(_fmt(self.average(strategy)))
            rows.append(row)
        widths = [max(len(r[i]) for r in [headers] + rows)
                  for i in range(len(headers))]
        out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        out.append("  ".join("-" * w for w in widths))
        for row in rows:
            out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        return "\n".join(out) + "\n"


@dataclass
class PairEdge:
    source: str
    target: str
    baseline: float
    joint: float
    deltas: list  # per-seed joint - baseline
    label: str


@dataclass
class PairwiseMatrix:
    """One entry per ordered task pair (s, t): metric of t alone vs. jointly
    refined with s, labeled by the sign of the median per-seed delta."""

    tasks: list[str]
    eps: float
    edges: dict = field(default_factory=dict)  # (source, target) -> PairEdge

    def add(self, source: str, target: str, baseline: float, joint: float,
            deltas: list) -> PairEdge:
        edge = PairEdge(source, target, baseline, joint, list(deltas),
                        edge_label(median(deltas), self.eps))
        self.edges[(source, target)] = edge
        return edge

    def validate_complete(self) -> None:
        n = len(self.tasks)
        expect = {(s, t) for s in self.tasks for t in self.tasks if s != t}
        if set(self.edges) != expect:
            raise ContractError(
                f"pairwise matrix has {len(self.edges)} edges, "
                f"expected n*(n-1) = {n * (n - 1)}")

    def to_tsv(self) -> str:
        lines = ["source\ttarget\tbaseline\tjoint\tdelta_median\tdeltas\tlabel"]
        for s in self.tasks:
            for t in self.tasks:
                if s == t:
                    continue
                e = self.edges[(s, t)]
                deltas = ",".join(f"{d:+.4f}" for d in e.deltas)
                lines.append(f"{s}\t{t}\t{_fmt(e.baseline)}\t{_fmt(e.joint)}\t"
                             f"{median(e.deltas):+.4f}\t{deltas}\t{e.label}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [f"pairwise edges (eps = {self.eps}):"]
        for s in self.tasks:
            for t in self.tasks:
                if s == t:
                    continue
                e = self.edges[(s, t)]
                out.append(f"  {s:>10} -> {t:<10} {e.label:<10} "
                           f"baseline {_fmt(e.baseline)}  joint {_fmt(e.joint)}  "
                           f"median delta {median(e.deltas):+.4f}")
        return "\n".join(out) + "\n"
