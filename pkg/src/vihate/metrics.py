"""Accuracy, weighted F1 and macro F1 for labels and character masks.

Zero-division convention: precision, recall or F1 whose denominator is zero is
0, and such a class still counts toward the macro mean. A span corpus with no
hateful characters in gold or prediction therefore scores MF1 = 0.5, not 1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Sequence

from .errors import EmptyInput, MissingTask, TaskMismatch
from .spans import spans_to_mask
from .tasks import Task


class ConfusionCounts:
    """Gold/pred pair counts; shards merge with ``+``."""

    def __init__(self, classes: Sequence[Hashable]):
        self.classes = list(classes)
        self.pairs: Counter = Counter()

    def update(self, golds: Iterable, preds: Iterable) -> None:
        self.pairs.update(zip(golds, preds))

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        if self.classes != other.classes:
            raise TaskMismatch("cannot merge counts over different classes")
        merged = ConfusionCounts(self.classes)
        merged.pairs = self.pairs + other.pairs
        return merged

    @property
    def total(self) -> int:
        return sum(self.pairs.values())


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    task: Task
    accuracy: float
    weighted_f1: float
    macro_f1: float
    per_class: dict[str, ClassScores] = field(default_factory=dict)
    n_examples: int = 0

    def to_dict(self) -> dict:
        return {
            "task": self.task.prefix,
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "per_class": {
                name: {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for name, s in self.per_class.items()
            },
            "n_examples": self.n_examples,
        }


@dataclass
class SummaryReport:
    reports: list[EvalReport]
    average_mf1: float

    def to_dict(self) -> dict:
        return {"reports": [r.to_dict() for r in self.reports], "average_mf1": self.average_mf1}


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def report_from_counts(task: Task, counts: ConfusionCounts, n_examples: int) -> EvalReport:
    total = counts.total
    if not total:
        raise EmptyInput("nothing to evaluate")
    gold_totals: Counter = Counter()
    pred_totals: Counter = Counter()
    correct: Counter = Counter()
    for (gold, pred), n in counts.pairs.items():
        gold_totals[gold] += n
        pred_totals[pred] += n
        if gold == pred:
            correct[gold] += n

    per_class = {}
    macro = weighted = 0.0
    for cls in counts.classes:
        precision = _ratio(correct[cls], pred_totals[cls])
        recall = _ratio(correct[cls], gold_totals[cls])
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_class[_class_name(cls)] = ClassScores(precision, recall, f1, gold_totals[cls])
        macro += f1
        weighted += f1 * gold_totals[cls]
    return EvalReport(
        task=task,
        accuracy=sum(correct.values()) / total,
        weighted_f1=weighted / total,
        macro_f1=macro / len(counts.classes),
        per_class=per_class,
        n_examples=n_examples,
    )


def _class_name(cls) -> str:
    return cls.name if isinstance(cls, Enum) else str(cls)


def _label_type(labels: Sequence[Enum], what: str) -> type[Enum]:
    types = {type(label) for label in labels}
    if len(types) != 1:
        raise TaskMismatch(f"{what} mix label alphabets: {sorted(t.__name__ for t in types)}")
    return types.pop()


def classification_eval(golds: Sequence[Enum], preds: Sequence[Enum], task: Task | None = None) -> EvalReport:
    """Score label predictions over the full alphabet of the gold labels."""
    if not golds:
        raise EmptyInput("no gold labels")
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} golds vs {len(preds)} predictions")
    labels = _label_type(golds, "gold labels")
    if _label_type(preds, "predictions") is not labels:
        raise TaskMismatch("gold labels and predictions use different alphabets")
    if task is None:
        task = next(t for t in Task if labels in t.label_types)
    elif labels not in task.label_types:
        raise TaskMismatch(f"{labels.__name__} is not an alphabet of {task.prefix}")
    counts = ConfusionCounts(list(labels))
    counts.update(golds, preds)
    return report_from_counts(task, counts, len(golds))


def span_counts(golds: Iterable, preds: Iterable, texts: Iterable[str]) -> tuple[ConfusionCounts, int]:
    counts = ConfusionCounts([0, 1])
    n = 0
    for gold, pred, text in zip(golds, preds, texts, strict=True):
        counts.update(spans_to_mask(gold, text), spans_to_mask(pred, text))
        n += 1
    return counts, n


def span_eval(golds: Sequence, preds: Sequence, texts: Sequence[str]) -> EvalReport:
    """Binary character-level scores over the concatenation of every mask."""
    if not texts:
        raise EmptyInput("no texts")
    if not len(golds) == len(preds) == len(texts):
        raise ValueError("golds, preds and texts differ in length")
    counts, n = span_counts(golds, preds, texts)
    return report_from_counts(Task.HATE_SPANS, counts, n)


def mean_macro_f1(scores: Iterable[float]) -> float:
    scores = list(scores)
    if not scores:
        raise EmptyInput("no scores to average")
    return sum(scores) / len(scores)


def average_mf1(reports: Sequence[EvalReport]) -> float:
    """Arithmetic mean of macro F1 over exactly one report per task."""
    by_task = {}
    for report in reports:
        if report.task in by_task:
            raise MissingTask(f"two reports for {report.task.prefix}")
        by_task[report.task] = report
    missing = [t.prefix for t in Task if t not in by_task]
    if missing:
        raise MissingTask(f"no report for {', '.join(missing)}")
    return mean_macro_f1(by_task[t].macro_f1 for t in Task)


def summarize(reports: Sequence[EvalReport]) -> SummaryReport:
    ordered = sorted(reports, key=lambda r: list(Task).index(r.task))
    return SummaryReport(ordered, average_mf1(ordered))


TABLE_COLUMNS = {
    Task.HATE_SPEECH: "Hate Speech Detection",
    Task.TOXIC_SPEECH: "Toxic Speech Detection",
    Task.HATE_SPANS: "Hate Spans Detection",
}


def format_table(reports: Sequence[EvalReport], average: float | None = None, name: str = "model") -> str:
    """Fixed-width rows: model, Average MF1, then Acc/WF1/MF1 per task."""
    by_task = {r.task: r for r in reports}
    tasks = [t for t in Task if t in by_task]
    head1 = f"{'Model':<20} {'Average MF1':>11}"
    head2 = f"{'':<20} {'':>11}"
    row = f"{name[:20]:<20} {('%.4f' % average) if average is not None else '-':>11}"
    for task in tasks:
        head1 += f" | {TABLE_COLUMNS[task]:^23}"
        head2 += f" | {'Acc':>7} {'WF1':>7} {'MF1':>7}"
        r = by_task[task]
        row += f" | {r.accuracy:7.4f} {r.weighted_f1:7.4f} {r.macro_f1:7.4f}"
    return "\n".join([head1, head2, "-" * len(head2), row])
