"""Reading and writing benchmark / pre-training corpora.

JSONL is the canonical format (field names as in :data:`JSONL_FIELDS`). CSV is
accepted at ingestion, with per-schema column names; the defaults below follow
the column headers of the public ViHSD, ViCTSD and ViHOS releases and can be
overridden.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import DataError, InvalidSpan, LabelTaskMismatch, MalformedRow, SchemaMismatch
from .normalize import RawComment
from .spans import Span, validate_spans
from .tasks import BinaryLabel, HateLabel, Task, ToxicLabel, collapse_to_binary, encode_source, encode_target

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test", "unsplit")
JSONL_FIELDS = ("id", "text", "label", "spans", "score", "topic", "split")
# written only when set
EXTRA_FIELDS = ("thread", "annotator")


@dataclass
class LabeledRecord:
    id: str
    text: str
    label: Enum | None = None
    spans: list[Span] | None = None
    score: float | None = None
    topic: str | None = None
    split: str = "unsplit"
    thread: str | None = None
    annotator: str | None = None

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "text": self.text,
            "label": self.label.name if self.label is not None else None,
            "spans": [list(s) for s in self.spans] if self.spans is not None else None,
            "score": self.score,
            "topic": self.topic,
            "split": self.split,
        }
        for name in EXTRA_FIELDS:
            value = getattr(self, name)
            if value is not None:
                obj[name] = value
        return obj


@dataclass(frozen=True)
class DatasetSchema:
    """How to read one dataset.

    ``columns`` maps logical fields (id, text, label, spans, topic, split,
    thread, score) to CSV headers; JSONL input always uses the logical names.
    ``collapse`` reads three-way ViHSD labels and stores their binary collapse.
    """

    name: str
    task: Task | None
    labels: type[Enum] | None
    columns: dict[str, str] = field(default_factory=dict)
    collapse: bool = False

    @property
    def required(self) -> tuple[str, ...]:
        if self.task is Task.HATE_SPANS:
            return ("text", "spans")
        if self.labels is not None and self.name != "pretrain":
            return ("text", "label")
        return ("text",)

    def with_columns(self, **overrides: str) -> "DatasetSchema":
        return replace(self, columns={**self.columns, **overrides})


SCHEMAS = {
    "vihsd": DatasetSchema("vihsd", Task.HATE_SPEECH, HateLabel,
                           {"text": "free_text", "label": "label_id"}),
    "vihsd_binary": DatasetSchema("vihsd_binary", Task.HATE_SPEECH, BinaryLabel,
                                  {"text": "free_text", "label": "label_id"}, collapse=True),
    "victsd": DatasetSchema("victsd", Task.TOXIC_SPEECH, ToxicLabel,
                            {"text": "Comment", "label": "Toxicity"}),
    "vihos": DatasetSchema("vihos", Task.HATE_SPANS, None,
                           {"text": "content", "spans": "index_spans"}),
    "pretrain": DatasetSchema("pretrain", None, BinaryLabel, {}),
}


def get_schema(name: str) -> DatasetSchema:
    try:
        return SCHEMAS[name]
    except KeyError:
        raise ValueError(f"unknown schema {name!r}; expected one of {sorted(SCHEMAS)}") from None


def parse_label(value, labels: type[Enum], collapse: bool = False) -> Enum:
    """Label from a name (any case) or an integer id."""
    source = HateLabel if collapse else labels
    if isinstance(value, str):
        value = value.strip()
        if value.lstrip("-").isdigit():
            value = int(value)
        elif value.upper() in source.__members__:
            value = source[value.upper()]
        elif collapse and value.upper() in labels.__members__:
            return labels[value.upper()]
        else:
            raise LabelTaskMismatch(f"{value!r} is not a {source.__name__} label")
    if isinstance(value, bool) or value is None:
        raise LabelTaskMismatch(f"{value!r} is not a label")
    if isinstance(value, (int, float)):
        try:
            value = source(int(value))
        except ValueError:
            raise LabelTaskMismatch(f"{value!r} is not a {source.__name__} id") from None
    if collapse and isinstance(value, HateLabel):
        return collapse_to_binary(value)
    if not isinstance(value, labels):
        raise LabelTaskMismatch(f"{value!r} is not a {labels.__name__} label")
    return value


def parse_spans(value) -> list:
    """Spans as a flat index list ``[0,1,2]`` or pair list ``[[0,2]]``, JSON text or parsed."""
    if isinstance(value, str):
        value = value.strip()
        if not value:
            return []
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            raise InvalidSpan(f"unparseable span list {value!r}") from None
    if not isinstance(value, list):
        raise InvalidSpan(f"span list expected, got {type(value).__name__}")
    return value


@contextmanager
def _open_text(path, mode: str):
    if str(path) == "-":
        stream = sys.stdin if "r" in mode else sys.stdout
        yield stream
        if "w" in mode:
            stream.flush()
        return
    with open(path, mode, encoding="utf-8", newline="" if "r" in mode else None) as fh:
        yield fh


def detect_format(path) -> str:
    suffix = Path(str(path)).suffix.lower()
    if suffix in (".csv", ".tsv"):
        return suffix[1:]
    return "jsonl"


class DatasetReader:
    """Streaming, re-iterable view of a dataset file.

    Every iteration reopens the file; ``split_counts`` and ``skipped`` describe
    the most recent pass. Malformed rows are skipped and counted, or raise
    :class:`MalformedRow` when ``strict``.
    """

    def __init__(self, path, schema: DatasetSchema, fmt: str | None = None,
                 split: str | None = None, strict: bool = False):
        self.path = path
        self.schema = schema
        self.fmt = fmt or detect_format(path)
        self.default_split = split or "unsplit"
        self.strict = strict
        self.split_counts: Counter = Counter()
        self.skipped = 0

    def __iter__(self) -> Iterator[LabeledRecord]:
        self.split_counts = Counter()
        self.skipped = 0
        with _open_text(self.path, "r") as fh:
            rows = self._csv_rows(fh) if self.fmt in ("csv", "tsv") else self._jsonl_rows(fh)
            for lineno, row in rows:
                try:
                    record = self._to_record(row, lineno)
                except DataError as exc:
                    if self.strict:
                        raise MalformedRow(f"{self.path}:{lineno}: {exc}") from exc
                    self.skipped += 1
                    log.debug("skipping %s:%d: %s", self.path, lineno, exc)
                    continue
                self.split_counts[record.split] += 1
                yield record

    def _columns(self) -> dict[str, str]:
        if self.fmt == "jsonl":
            return {}
        return self.schema.columns

    def _csv_rows(self, fh: IO) -> Iterator[tuple[int, dict]]:
        reader = csv.DictReader(fh, delimiter="\t" if self.fmt == "tsv" else ",")
        header = reader.fieldnames or []
        if header:
            columns = self._columns()
            missing = [columns.get(f, f) for f in self.schema.required if columns.get(f, f) not in header]
            if missing:
                raise SchemaMismatch(f"{self.path}: missing column(s) {missing}; header is {header}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row

    def _jsonl_rows(self, fh: IO) -> Iterator[tuple[int, dict]]:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, {"__error__": f"invalid JSON: {exc}"}
                continue
            if not isinstance(obj, dict):
                yield lineno, {"__error__": "JSON line is not an object"}
                continue
            yield lineno, obj

    def _to_record(self, row: dict, lineno: int) -> LabeledRecord:
        if "__error__" in row:
            raise MalformedRow(row["__error__"])
        columns = self._columns()

        def get(name):
            value = row.get(columns.get(name, name))
            return None if value == "" and self.fmt != "jsonl" else value

        text = get("text")
        if not isinstance(text, str):
            raise MalformedRow("missing text")
        record_id = get("id")
        record = LabeledRecord(id=str(record_id) if record_id is not None else str(lineno), text=text)

        label = get("label")
        if label is not None and self.schema.labels is not None:
            record.label = parse_label(label, self.schema.labels, self.schema.collapse)
        elif "label" in self.schema.required:
            raise MalformedRow("missing label")

        spans = get("spans")
        if spans is not None:
            record.spans = validate_spans(parse_spans(spans), len(text))
        elif "spans" in self.schema.required:
            raise MalformedRow("missing spans")

        score = get("score")
        if score is not None:
            try:
                record.score = float(score)
            except (TypeError, ValueError):
                raise MalformedRow(f"bad score {score!r}") from None
        for name in ("topic", "thread", "annotator"):
            value = get(name)
            if value is not None:
                setattr(record, name, str(value))
        split = get("split") or self.default_split
        if split not in SPLITS:
            raise MalformedRow(f"unknown split {split!r}")
        record.split = split
        return record


def read_dataset(path, schema: DatasetSchema | str, fmt: str | None = None,
                 split: str | None = None, strict: bool = False) -> DatasetReader:
    if isinstance(schema, str):
        schema = get_schema(schema)
    if str(path) != "-" and not Path(path).is_file():
        raise FileNotFoundError(path)
    return DatasetReader(path, schema, fmt=fmt, split=split, strict=strict)


def dumps_record(record: LabeledRecord) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False)


def write_jsonl(records: Iterable[LabeledRecord], path) -> int:
    count = 0
    with _open_text(path, "w") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")
            count += 1
    return count


def make_t5_pairs(records: Iterable[LabeledRecord], task: Task,
                  table_spelling: bool = False) -> Iterator[tuple[str, str]]:
    for record in records:
        gold = record.spans if task.is_span_task else record.label
        if gold is None:
            raise LabelTaskMismatch(f"record {record.id} has no {'spans' if task.is_span_task else 'label'}")
        yield encode_source(task, record.text, table_spelling), encode_target(task, gold, record.text)


def _tsv_field(text: str) -> str:
    return text.replace("\t", " ").replace("\r", " ").replace("\n", " ")


def write_pairs(pairs: Iterable[tuple[str, str]], path, fmt: str = "tsv") -> int:
    count = 0
    with _open_text(path, "w") as fh:
        for source, target in pairs:
            if fmt == "tsv":
                fh.write(f"{_tsv_field(source)}\t{_tsv_field(target)}\n")
            else:
                fh.write(json.dumps({"source": source, "target": target}, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_raw_comments(path, strict: bool = False) -> Iterator[RawComment]:
    """Raw forum comments from JSONL or CSV (``id``, ``body``, optional
    ``quoted_block``, ``topic``, ``thread``)."""
    fmt = detect_format(path)
    with _open_text(path, "r") as fh:
        if fmt in ("csv", "tsv"):
            rows = enumerate(csv.DictReader(fh, delimiter="\t" if fmt == "tsv" else ","), start=2)
        else:
            rows = ((n, line) for n, line in enumerate(fh, start=1) if line.strip())
        for lineno, row in rows:
            try:
                if isinstance(row, str):
                    row = json.loads(row)
                body = row.get("body")
                if not isinstance(body, str):
                    raise MalformedRow("missing body")
                yield RawComment(
                    id=str(row.get("id") or lineno),
                    body=body,
                    quoted_block=row.get("quoted_block") or None,
                    topic=row.get("topic") or None,
                    thread=str(row["thread"]) if row.get("thread") not in (None, "") else None,
                )
            except (MalformedRow, json.JSONDecodeError, AttributeError) as exc:
                if strict:
                    raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
                log.warning("skipping %s:%d: %s", path, lineno, exc)
