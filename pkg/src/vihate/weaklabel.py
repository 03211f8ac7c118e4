"""Automated annotation of a raw comment corpus.

A binary classifier trained on collapsed ViHSD labels labels every comment of a
large corpus; the labeled corpus is then resampled to a target hate ratio. The
classifier sits behind :class:`Annotator`, so the built-in character n-gram
naive Bayes model and a remote inference service are interchangeable.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import os
import random
import time
import urllib.request
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol, Sequence

from .corpus import LabeledRecord, dumps_record
from .errors import DataError, DegenerateTrainingSet, InsufficientClean, RemoteUnavailable
from .tasks import BinaryLabel

log = logging.getLogger(__name__)

ENDPOINT_ENV = "VIHATE_ANNOTATOR_URL"


class Annotator(Protocol):
    annotator_id: str
    kind: str  # "builtin" | "remote"

    def classify_batch(self, texts: Sequence[str]) -> list[tuple[BinaryLabel, float]]:
        ...


# ---------------------------------------------------------------------------
# built-in baseline


@dataclass(frozen=True)
class BaselineConfig:
    ngram_min: int = 1
    ngram_max: int = 3
    alpha: float = 1.0  # additive smoothing
    lowercase: bool = True
    threshold: float = 0.5  # on P(HATE)


def char_ngrams(text: str, ngram_min: int, ngram_max: int) -> Iterator[str]:
    for n in range(ngram_min, ngram_max + 1):
        for i in range(len(text) - n + 1):
            yield text[i:i + n]


@dataclass
class NaiveBayesModel:
    """Multinomial naive Bayes over character n-grams.

    ``log_likelihoods[c][j]`` is log P(ngram j | class c) with class order
    ``BinaryLabel`` order (NONE, HATE). N-grams outside the vocabulary are
    ignored at prediction time.
    """

    config: BaselineConfig
    vocabulary: dict[str, int]
    log_priors: list[float]
    log_likelihoods: list[list[float]]
    kind: str = field(default="builtin", init=False)

    def __post_init__(self):
        none_ll, hate_ll = self.log_likelihoods
        self._bias = self.log_priors[1] - self.log_priors[0]
        self._weights = {g: hate_ll[j] - none_ll[j] for g, j in self.vocabulary.items()}

    @cached_property
    def annotator_id(self) -> str:
        digest = hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:12]
        return f"nb-char{self.config.ngram_min}{self.config.ngram_max}-{digest}"

    def hate_probability(self, text: str) -> float:
        cfg = self.config
        if cfg.lowercase:
            text = text.lower()
        get = self._weights.get
        logit = self._bias
        length = len(text)
        for n in range(cfg.ngram_min, cfg.ngram_max + 1):
            for i in range(length - n + 1):
                logit += get(text[i:i + n], 0.0)
        if logit >= 0:
            return 1.0 / (1.0 + math.exp(-logit))
        z = math.exp(logit)
        return z / (1.0 + z)

    def classify_batch(self, texts: Sequence[str]) -> list[tuple[BinaryLabel, float]]:
        out = []
        for text in texts:
            p = self.hate_probability(text)
            if p > self.config.threshold:
                out.append((BinaryLabel.HATE, p))
            else:
                out.append((BinaryLabel.NONE, 1.0 - p))
        return out

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "vocabulary": self.vocabulary,
            "log_priors": self.log_priors,
            "log_likelihoods": self.log_likelihoods,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "NaiveBayesModel":
        return cls(BaselineConfig(**obj["config"]), obj["vocabulary"], obj["log_priors"], obj["log_likelihoods"])

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NaiveBayesModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_baseline(examples: Iterable[tuple[str, BinaryLabel]],
                   config: BaselineConfig = BaselineConfig()) -> NaiveBayesModel:
    """Fit the naive Bayes baseline; deterministic for a given input order."""
    classes = list(BinaryLabel)
    doc_counts = Counter()
    gram_counts = {c: Counter() for c in classes}
    for text, label in examples:
        if not isinstance(label, BinaryLabel):
            raise DataError(f"baseline trains on binary labels, got {label!r}")
        if config.lowercase:
            text = text.lower()
        doc_counts[label] += 1
        gram_counts[label].update(char_ngrams(text, config.ngram_min, config.ngram_max))
    absent = [c.name for c in classes if not doc_counts[c]]
    if absent:
        raise DegenerateTrainingSet(f"no training examples for {', '.join(absent)}")

    vocab_list = sorted(set().union(*gram_counts.values()))
    vocabulary = {g: j for j, g in enumerate(vocab_list)}
    n_docs = sum(doc_counts.values())
    log_priors = [math.log(doc_counts[c] / n_docs) for c in classes]
    log_likelihoods = []
    for c in classes:
        counts = gram_counts[c]
        denom = sum(counts.values()) + config.alpha * len(vocab_list)
        log_likelihoods.append([math.log((counts[g] + config.alpha) / denom) for g in vocab_list])
    return NaiveBayesModel(config, vocabulary, log_priors, log_likelihoods)


# ---------------------------------------------------------------------------
# remote


class RemoteAnnotator:
    """Client for ``POST /classify``.

    Request ``{"texts": [...]}``; response ``{"labels": ["HATE"|"NONE", ...],
    "scores": [...]}``. A missing ``scores`` field means 1.0 for every item.
    Non-200 responses, transport errors and length mismatches are retried with
    exponential backoff, then :class:`RemoteUnavailable` is raised.
    """

    kind = "remote"

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0,
                 attempts: int = 3, backoff: float = 0.5):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValueError(f"no annotator endpoint given and ${ENDPOINT_ENV} is unset")
        endpoint = endpoint.rstrip("/")
        if not endpoint.endswith("/classify"):
            endpoint += "/classify"
        self.url = endpoint
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.annotator_id = f"remote:{endpoint}"

    def _post(self, texts: Sequence[str]) -> list[tuple[BinaryLabel, float]]:
        body = json.dumps({"texts": list(texts)}, ensure_ascii=False).encode("utf-8")
        request = urllib.request.Request(self.url, data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            if response.status != 200:
                raise ValueError(f"HTTP {response.status}")
            payload = json.loads(response.read().decode("utf-8"))
        labels = payload["labels"]
        scores = payload.get("scores")
        if scores is None:
            scores = [1.0] * len(labels)
        if len(labels) != len(texts) or len(scores) != len(texts):
            raise ValueError(f"sent {len(texts)} texts, got {len(labels)} labels / {len(scores)} scores")
        return [(BinaryLabel[str(name).upper()], float(score)) for name, score in zip(labels, scores)]

    def classify_batch(self, texts: Sequence[str]) -> list[tuple[BinaryLabel, float]]:
        if not texts:
            return []
        error = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                return self._post(texts)
            except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
                error = exc
                log.warning("annotator request failed (attempt %d/%d): %s", attempt + 1, self.attempts, exc)
        raise RemoteUnavailable(f"{self.url} unavailable after {self.attempts} attempts: {error}")


# ---------------------------------------------------------------------------
# labeling


def _batched(records: Iterable[LabeledRecord], size: int) -> Iterator[list[LabeledRecord]]:
    if size < 1:
        raise ValueError("batch_size must be positive")
    it = iter(records)
    while batch := list(itertools.islice(it, size)):
        yield batch


def _attach(batch: list[LabeledRecord], results, annotator_id: str) -> list[LabeledRecord]:
    if len(results) != len(batch):
        raise DataError(f"annotator returned {len(results)} results for {len(batch)} texts")
    return [replace(rec, label=label, score=score, annotator=annotator_id)
            for rec, (label, score) in zip(batch, results)]


def label_batches(records: Iterable[LabeledRecord], annotator: Annotator,
                  batch_size: int = 512, jobs: int = 1) -> Iterator[list[LabeledRecord]]:
    """Label a stream batch by batch, in input order.

    With ``jobs > 1`` up to ``jobs`` batches are in flight at once; results are
    re-sequenced before they are yielded.
    """
    batches = _batched(records, batch_size)
    aid = annotator.annotator_id
    if jobs <= 1:
        for batch in batches:
            yield _attach(batch, annotator.classify_batch([r.text for r in batch]), aid)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        pending: deque = deque()
        for batch in batches:
            pending.append((batch, pool.submit(annotator.classify_batch, [r.text for r in batch])))
            if len(pending) >= jobs:
                done, future = pending.popleft()
                yield _attach(done, future.result(), aid)
        while pending:
            done, future = pending.popleft()
            yield _attach(done, future.result(), aid)


def label_corpus(records: Iterable[LabeledRecord], annotator: Annotator,
                 batch_size: int = 512, jobs: int = 1) -> Iterator[LabeledRecord]:
    for batch in label_batches(records, annotator, batch_size, jobs):
        yield from batch


@dataclass
class Checkpoint:
    committed: int = 0
    last_id: str | None = None
    offset: int = 0  # bytes of output known to be complete

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path) -> None:
        tmp = Path(f"{path}.tmp")
        tmp.write_text(json.dumps(self.__dict__, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


def run_labeling(records: Iterable[LabeledRecord], output_path, annotator: Annotator,
                 batch_size: int = 512, checkpoint_path=None, resume: bool = False,
                 jobs: int = 1, progress: Callable[[int], None] | None = None) -> int:
    """Label ``records`` into a JSONL file, committing a checkpoint per batch.

    On resume the output is truncated to the last committed byte offset and the
    committed number of input records is skipped, so an interrupted run
    followed by a resumed one produces the same file as a single run.
    Returns the total number of records in the output.
    """
    state = Checkpoint()
    if resume and checkpoint_path and Path(checkpoint_path).exists():
        state = Checkpoint.load(checkpoint_path)
    records = iter(records)
    if state.committed:
        skipped = None
        for skipped in itertools.islice(records, state.committed):
            pass
        if skipped is None or skipped.id != state.last_id:
            raise DataError(f"input does not match checkpoint (expected record {state.last_id!r} "
                            f"at position {state.committed})")
        with open(output_path, "r+b") as fh:
            fh.truncate(state.offset)
        mode = "ab"
    else:
        mode = "wb"

    with open(output_path, mode) as out:
        try:
            for batch in label_batches(records, annotator, batch_size, jobs):
                out.write("".join(dumps_record(r) + "\n" for r in batch).encode("utf-8"))
                out.flush()
                state.committed += len(batch)
                state.last_id = batch[-1].id
                state.offset = out.tell()
                if checkpoint_path:
                    state.save(checkpoint_path)
                if progress:
                    progress(state.committed)
        except RemoteUnavailable as exc:
            raise RemoteUnavailable(str(exc), state.last_id, state.committed) from exc
    return state.committed


# ---------------------------------------------------------------------------
# resampling


class RatioCondition(Enum):
    FULL = "full"
    BALANCED = "balanced"
    HATE_ONLY = "hate_only"

    @property
    def target_hate_fraction(self) -> float | None:
        """None for ``full``: the corpus keeps its native ratio."""
        return {"full": None, "balanced": 0.5, "hate_only": 1.0}[self.value]


def _is_hate(record: LabeledRecord) -> bool:
    if not isinstance(record.label, BinaryLabel):
        raise DataError(f"record {record.id} has no binary label ({record.label!r})")
    return record.label is BinaryLabel.HATE


def resample(records: Iterable[LabeledRecord], condition: RatioCondition | str,
             seed: int | None = None) -> Iterator[LabeledRecord]:
    """Resample a labeled corpus to a hate ratio, preserving input order.

    ``balanced`` keeps every hate record and a uniform sample (without
    replacement) of as many clean records. The sample size is only known once
    the stream is exhausted, so ``records`` must be re-iterable (a list or a
    :class:`~vihate.corpus.DatasetReader`): one pass counts, a second pass
    selects with sequential selection sampling in O(1) memory.
    """
    condition = RatioCondition(condition)
    if condition is RatioCondition.FULL:
        yield from records
        return
    if condition is RatioCondition.HATE_ONLY:
        yield from (r for r in records if _is_hate(r))
        return

    if seed is None:
        raise ValueError("balanced resampling needs a seed")
    if iter(records) is records:
        raise TypeError("balanced resampling needs a re-iterable corpus, not a one-shot iterator")
    n_hate = n_clean = 0
    for record in records:
        if _is_hate(record):
            n_hate += 1
        else:
            n_clean += 1
    if n_clean < n_hate:
        raise InsufficientClean(f"{n_clean} clean records cannot balance {n_hate} hate records")

    rng = random.Random(seed)
    needed, remaining = n_hate, n_clean
    for record in records:
        if _is_hate(record):
            yield record
        elif remaining:
            # needed == remaining forces selection, needed == 0 forbids it
            if rng.random() * remaining < needed:
                needed -= 1
                yield record
            remaining -= 1
    if needed:
        raise DataError("corpus changed between the counting and selection passes")


# ---------------------------------------------------------------------------
# statistics


@dataclass
class StatsReport:
    total: int
    hate: int
    labels: dict[str, int]
    topics: dict[str, dict[str, int]]
    threads: int
    hate_fraction: float  # rounded to 4 decimal places
    fraction_defined: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class StatsAccumulator:
    """Counts per label and topic; threads are distinct (topic, thread) ids."""

    def __init__(self):
        self.labels: Counter = Counter()
        self.comments: Counter = Counter()
        self.thread_counts: Counter = Counter()
        self._threads: set = set()

    def add(self, record: LabeledRecord) -> None:
        topic = record.topic or "unknown"
        self.comments[topic] += 1
        self.labels[record.label.name if record.label is not None else "UNLABELED"] += 1
        if record.thread is not None:
            key = (topic, record.thread)
            if key not in self._threads:
                self._threads.add(key)
                self.thread_counts[topic] += 1

    def add_manifest_row(self, topic: str, threads: int, comments: int, hate: int | None = None) -> None:
        self.comments[topic] += comments
        self.thread_counts[topic] += threads
        if hate is not None:
            if not 0 <= hate <= comments:
                raise DataError(f"topic {topic!r}: hate count {hate} outside [0, {comments}]")
            self.labels["HATE"] += hate
            self.labels["NONE"] += comments - hate
        else:
            self.labels["UNLABELED"] += comments

    def report(self) -> StatsReport:
        total = sum(self.comments.values())
        hate = self.labels.get("HATE", 0)
        topics = {t: {"comments": self.comments[t], "threads": self.thread_counts[t]}
                  for t in sorted(self.comments)}
        return StatsReport(
            total=total,
            hate=hate,
            labels=dict(sorted(self.labels.items())),
            topics=topics,
            threads=sum(self.thread_counts.values()),
            hate_fraction=round(hate / total, 4) if total else 0.0,
            fraction_defined=bool(total),
        )


def corpus_stats(records: Iterable[LabeledRecord]) -> StatsReport:
    acc = StatsAccumulator()
    for record in records:
        acc.add(record)
    return acc.report()


def manifest_stats(rows: Iterable[dict]) -> StatsReport:
    """Stats from per-topic summary rows (``topic``, ``threads``, ``comments``, optional ``hate``)."""
    acc = StatsAccumulator()
    for row in rows:
        try:
            hate = row.get("hate")
            acc.add_manifest_row(str(row["topic"]), int(row["threads"]), int(row["comments"]),
                                 int(hate) if hate not in (None, "") else None)
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad manifest row {row!r}: {exc}") from None
    return acc.report()


def read_manifest(path) -> list[dict]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        if path.suffix.lower() == ".csv":
            return list(csv.DictReader(fh))
        rows = []
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
        return rows
