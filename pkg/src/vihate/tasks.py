"""Text-to-text encoding for the three prefix tasks, plus label alphabets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import LabelTaskMismatch
from .spans import Span, encode_tags, recover_spans

PREFIX_SEPARATOR = ": "
# Spelling printed in the published example table; kept for byte-exact replication.
TABLE_TOXIC_PREFIX = "toxic-speech-detecion"


class HateLabel(Enum):
    """ViHSD three-way labels; values are the integer ids used by classifiers."""

    CLEAN = 0
    OFFENSIVE = 1
    HATE = 2


class ToxicLabel(Enum):
    NONE = 0
    TOXIC = 1


class BinaryLabel(Enum):
    """Collapsed ViHSD labels, also the alphabet of the weakly labeled corpus."""

    NONE = 0
    HATE = 1


ClassLabel = HateLabel | ToxicLabel | BinaryLabel
LABEL_TYPES = (HateLabel, ToxicLabel, BinaryLabel)


class Task(Enum):
    HATE_SPEECH = "hate-speech-detection"
    TOXIC_SPEECH = "toxic-speech-detection"
    HATE_SPANS = "hate-spans-detection"

    @property
    def prefix(self) -> str:
        return self.value

    @property
    def is_span_task(self) -> bool:
        return self is Task.HATE_SPANS

    @property
    def label_types(self) -> tuple[type[Enum], ...]:
        return _TASK_LABELS[self]

    @property
    def default_labels(self) -> type[Enum] | None:
        types = self.label_types
        return types[0] if types else None


_TASK_LABELS: dict[Task, tuple[type[Enum], ...]] = {
    Task.HATE_SPEECH: (HateLabel, BinaryLabel),
    Task.TOXIC_SPEECH: (ToxicLabel,),
    Task.HATE_SPANS: (),
}

TASK_ALIASES = {
    "vihsd": Task.HATE_SPEECH,
    "vihsd_binary": Task.HATE_SPEECH,
    "victsd": Task.TOXIC_SPEECH,
    "vihos": Task.HATE_SPANS,
}

# Non-harmful class of each alphabet; what unparseable output decodes to.
FALLBACK_LABELS = {
    HateLabel: HateLabel.CLEAN,
    ToxicLabel: ToxicLabel.NONE,
    BinaryLabel: BinaryLabel.NONE,
}


def parse_task(name: str | Task) -> Task:
    """Accept a dataset alias (``vihsd``), a prefix, or an enum member name."""
    if isinstance(name, Task):
        return name
    key = name.strip().lower()
    if key in TASK_ALIASES:
        return TASK_ALIASES[key]
    for task in Task:
        if key in (task.value, task.name.lower()) or key == TABLE_TOXIC_PREFIX and task is Task.TOXIC_SPEECH:
            return task
    raise ValueError(f"unknown task {name!r}; expected one of {sorted(TASK_ALIASES)}")


def label_from_name(labels: type[Enum], name: str) -> Enum:
    try:
        return labels[name]
    except KeyError:
        raise LabelTaskMismatch(f"{name!r} is not a {labels.__name__} label") from None


@dataclass(frozen=True)
class Prediction:
    task: Task
    label: Enum | None = None
    spans: list[Span] | None = None
    parse_status: str = "exact"  # exact | repaired | fallback


def encode_source(task: Task, text: str, table_spelling: bool = False) -> str:
    """Prefix ``text`` with its task name.

    ``table_spelling`` reproduces the misspelt toxic prefix of the published
    example table.
    """
    prefix = task.prefix
    if table_spelling and task is Task.TOXIC_SPEECH:
        prefix = TABLE_TOXIC_PREFIX
    return prefix + PREFIX_SEPARATOR + text


def encode_target(task: Task, gold: Enum | Iterable, original: str | None = None) -> str:
    if task.is_span_task:
        if isinstance(gold, Enum):
            raise LabelTaskMismatch(f"{task.prefix} expects spans, got label {gold.name}")
        if original is None:
            raise ValueError("span targets need the original text")
        return encode_tags(original, gold)
    if not isinstance(gold, task.label_types):
        raise LabelTaskMismatch(f"{gold!r} is not a label of {task.prefix}")
    return gold.name


def decode_prediction(task: Task, model_output: str, original: str | None = None,
                      labels: type[Enum] | None = None) -> Prediction:
    """Parse raw model output; never raises on malformed output.

    Classification: an exact label word is ``exact``; a match after trimming and
    upper-casing is ``repaired``; anything else becomes the alphabet's
    non-harmful class with ``fallback``. Spans: tolerant ``[HATE]`` decoding,
    ``repaired`` when the output needed fixing, ``fallback`` (no spans) when a
    tagged substring could not be located.
    """
    if task.is_span_task:
        if original is None:
            raise ValueError("span decoding needs the original text")
        result = recover_spans(model_output, original)
        if not result.aligned:
            return Prediction(task, spans=[], parse_status="fallback")
        return Prediction(task, spans=result.spans,
                          parse_status="repaired" if result.repaired else "exact")

    labels = labels or task.default_labels
    if labels not in task.label_types:
        raise LabelTaskMismatch(f"{labels.__name__} is not an alphabet of {task.prefix}")
    if model_output in labels.__members__:
        return Prediction(task, label=labels[model_output], parse_status="exact")
    cleaned = model_output.strip().upper()
    if cleaned in labels.__members__:
        return Prediction(task, label=labels[cleaned], parse_status="repaired")
    return Prediction(task, label=FALLBACK_LABELS[labels], parse_status="fallback")


def collapse_to_binary(label: HateLabel) -> BinaryLabel:
    """CLEAN becomes NONE; OFFENSIVE and HATE both become HATE."""
    if not isinstance(label, HateLabel):
        raise LabelTaskMismatch(f"only ViHSD labels collapse, got {label!r}")
    return BinaryLabel.NONE if label is HateLabel.CLEAN else BinaryLabel.HATE
