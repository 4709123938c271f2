"""Entity spans from BIO labels and exact-match precision / recall / F1."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .corpus import ENTITY_TYPES, split_label


class EntitySpan(NamedTuple):
    entity_type: str
    start: int
    end: int  # exclusive


def extract_spans(labels: Sequence[str]) -> list[EntitySpan]:
    """Spans in order of start position.

    An ``I-X`` that does not continue an open ``X`` span starts a new one.
    """
    spans = []
    open_type, open_start = None, 0
    for i, label in enumerate(labels):
        prefix, etype = split_label(label)
        if prefix == "I" and etype == open_type:
            continue
        if open_type is not None:
            spans.append(EntitySpan(open_type, open_start, i))
        open_type, open_start = etype, i
    if open_type is not None:
        spans.append(EntitySpan(open_type, open_start, len(labels)))
    return spans


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class Report:
    overall: Metrics = field(default_factory=Metrics)
    per_type: dict[str, Metrics] = field(default_factory=dict)


def score(gold: Sequence, pred: Sequence, entity_types: Sequence[str] = ENTITY_TYPES) -> Report:
    """Micro-averaged exact-match scores over aligned sentences.

    ``gold`` and ``pred`` hold one span collection per sentence.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    report = Report(per_type={t: Metrics() for t in entity_types})
    for g_spans, p_spans in zip(gold, pred):
        g, p = set(g_spans), set(p_spans)
        for span, kind in [(s, "tp") for s in g & p] + [(s, "fp") for s in p - g] + [(s, "fn") for s in g - p]:
            for m in (report.overall, report.per_type.setdefault(span.entity_type, Metrics())):
                setattr(m, kind, getattr(m, kind) + 1)
    return report


def score_labels(gold_labels: Sequence[Sequence[str]], pred_labels: Sequence[Sequence[str]],
                 entity_types: Sequence[str] = ENTITY_TYPES) -> Report:
    return score([extract_spans(l) for l in gold_labels],
                 [extract_spans(l) for l in pred_labels], entity_types)


def format_report(report: Report) -> str:
    rows = [("overall", report.overall)] + list(report.per_type.items())
    width = max(len(name) for name, _ in rows)
    lines = [f"{'Type':<{width}}  Precision  Recall  F1"]
    for name, m in rows:
        lines.append(f"{name:<{width}}  {m.precision:.3f}      {m.recall:.3f}   {m.f1:.3f}")
    return "\n".join(lines) + "\n"


_ROW = re.compile(r"^(\S+)\s+(\d\.\d{3})\s+(\d\.\d{3})\s+(\d\.\d{3})\s*$")


def parse_report_table(text: str) -> dict[str, tuple[float, float, float]]:
    """Read back ``(precision, recall, f1)`` per row of :func:`format_report` output."""
    out = {}
    for line in text.splitlines():
        match = _ROW.match(line)
        if match:
            out[match.group(1)] = tuple(float(x) for x in match.group(2, 3, 4))
    return out


def format_kv(report: Report) -> str:
    """One ``key=value`` per line, e.g. ``overall.f1=0.5``."""
    lines = []
    for name, m in [("overall", report.overall)] + list(report.per_type.items()):
        lines += [
            f"{name}.tp={m.tp}", f"{name}.fp={m.fp}", f"{name}.fn={m.fn}",
            f"{name}.precision={m.precision!r}", f"{name}.recall={m.recall!r}",
            f"{name}.f1={m.f1!r}",
        ]
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    pairs = (line.split("=", 1) for line in text.splitlines() if "=" in line)
    return {k: v for k, v in pairs}
