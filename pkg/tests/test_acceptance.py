"""Acceptance criteria, one test each. Every test reports a PASS/FAIL line
(collected in the terminal summary) before asserting."""

import hashlib
import random
import statistics
import time
import tracemalloc

import pytest

from oracles import confusion_oracle
from synth import PLANTED, TOPIC_MANIFEST, FlakyAnnotator, SharedRecordStream, SyntheticStream, planted_corpus
from example_table import CLASSIFICATION_ROWS, SPAN_ROWS
from verdicts import report
from vihate.errors import RemoteUnavailable
from vihate.metrics import EvalReport, average_mf1, classification_eval
from vihate.spans import (
    canonicalize,
    decode_tags,
    encode_tags,
    mask_to_spans,
    span_indices,
    spans_to_iob,
    spans_to_mask,
)
from vihate.tasks import BinaryLabel, HateLabel, Task, ToxicLabel, collapse_to_binary, encode_source, encode_target
from vihate.weaklabel import corpus_stats, manifest_stats, resample, run_labeling, train_baseline

EXAMPLE_TEXT = "vcl thật. Chịu luôn đm m!!!"
EXAMPLE_TAGGED = "[HATE]vcl[HATE] thật. Chịu luôn [HATE]đm m[HATE]!!!"
EXAMPLE_INDICES = [0, 1, 2, 20, 21, 22, 23]


def test_criterion_01_tag_decoding_example():
    result = span_indices(decode_tags(EXAMPLE_TAGGED, EXAMPLE_TEXT))
    timings = []
    for _ in range(2000):
        start = time.perf_counter()
        decode_tags(EXAMPLE_TAGGED, EXAMPLE_TEXT)
        timings.append(time.perf_counter() - start)
    median_ms = statistics.median(timings) * 1e3
    ok = result == EXAMPLE_INDICES and median_ms < 1.0
    report(1, "tag decoding worked example", ok, f"indices={result}, median {median_ms:.4f} ms")
    assert ok


def test_criterion_02_mask_example():
    mask = spans_to_mask(EXAMPLE_INDICES, EXAMPLE_TEXT)
    covered = set(EXAMPLE_INDICES)
    loop_oracle = [1 if i in covered else 0 for i in range(len(EXAMPLE_TEXT))]
    printed = [1, 1, 2] + [0] * 17 + [1, 1, 1, 1, 0, 0, 0]
    printed_fixed = [1 if b == 2 else b for b in printed]
    ok = len(mask) == 27 and mask == loop_oracle == printed_fixed
    report(2, "mask worked example", ok, f"len={len(mask)}, ones at {[i for i, b in enumerate(mask) if b]}")
    assert ok


ALPHABET = list("aăâbcdđeêghiklmnoôơpqrstuưvxyáàảãạấầẩẫậếềểễệốồổỗộớờởỡợứừửữựíìỉĩịýỳỷỹỵ"
                "AĂÂĐÊÔƠƯ0123456789.,!?:=)(") + [" ", " ", "  ", "😂", "😡", "👍", "🤣", "❤️"]


def test_criterion_03_codec_roundtrip():
    rng = random.Random(20240101)
    failures = 0
    start = time.perf_counter()
    for _ in range(10_000):
        text = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 60)))
        density = rng.random()
        mask = [1 if rng.random() < density else 0 for _ in text]
        spans = mask_to_spans(mask)
        ok = (decode_tags(encode_tags(text, spans), text) == spans
              and spans_to_mask(spans, text) == mask
              and mask_to_spans(spans_to_mask(spans, text)) == spans)
        failures += not ok
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 10
    report(3, "codec round-trip, 10,000 cases", ok, f"{failures} failures in {elapsed:.2f} s")
    assert ok


def test_criterion_04_table_conformance():
    mismatches = []
    for task, text, label, label_id, source, target in CLASSIFICATION_ROWS:
        # the printed toxic prefix carries the table's spelling
        table_spelling = task is Task.TOXIC_SPEECH
        got = (encode_source(task, text, table_spelling), encode_target(task, label), label.value)
        if got != (source, target, label_id):
            mismatches.append(text)
    for text, indices, iob, source, target in SPAN_ROWS:
        got = (encode_source(Task.HATE_SPANS, text), encode_target(Task.HATE_SPANS, canonicalize(indices), text))
        if got != (source, target):
            mismatches.append(text)
        if iob is not None and spans_to_iob(text, canonicalize(indices)).tags != iob.split():
            mismatches.append(f"IOB {text}")
    rows = len(CLASSIFICATION_ROWS) + len(SPAN_ROWS)
    tdeo = spans_to_iob("t deo hieu no cuoi cl me gi nua", [2, 3, 4, 19, 20, 21, 22, 23]).tags
    ok = not mismatches and tdeo == "O B-T O O O B-T I-T O O".split()
    report(4, "example table conformance", ok, f"{rows} rows, mismatches={mismatches}, IOB row {' '.join(tdeo)}")
    assert ok


def test_criterion_05_metrics_oracle():
    rng = random.Random(5)
    worst = 0.0
    for _ in range(1000):
        labels = list(rng.choice([HateLabel, ToxicLabel, BinaryLabel]))
        n = rng.randint(1, 200)
        golds = [rng.choice(labels) for _ in range(n)]
        preds = [rng.choice(labels) for _ in range(n)]
        acc, wf1, mf1, _ = confusion_oracle(golds, preds, labels)
        r = classification_eval(golds, preds)
        worst = max(worst, abs(r.accuracy - acc), abs(r.weighted_f1 - wf1), abs(r.macro_f1 - mf1))
    ok = worst <= 1e-12
    report(5, "metrics vs brute-force oracle, 1,000 lists", ok, f"max abs diff {worst:.2e}")
    assert ok


def test_criterion_06_average_mf1():
    reports = [EvalReport(task, 0.0, 0.0, mf1) for task, mf1 in
               zip(Task, (0.6867, 0.7163, 0.8637))]
    avg = average_mf1(reports)
    ok = abs(avg - 0.7556) <= 0.00005
    report(6, "average MF1", ok, f"{avg:.6f} vs 0.7556")
    assert ok


def test_criterion_07_label_collapse():
    expected = {HateLabel.CLEAN: BinaryLabel.NONE, HateLabel.OFFENSIVE: BinaryLabel.HATE,
                HateLabel.HATE: BinaryLabel.HATE}
    got = {label: collapse_to_binary(label) for label in HateLabel}
    ok = got == expected and len(got) == len(HateLabel)
    report(7, "binary label collapse", ok, ", ".join(f"{a.name}->{b.name}" for a, b in got.items()))
    assert ok


@pytest.mark.slow
def test_criterion_08_resampling_arithmetic():
    n_hate = 584_495
    n_clean = 10_747_733 - n_hate
    stream = SharedRecordStream(n_hate, n_clean)
    balanced = sum(1 for _ in resample(stream, "balanced", seed=7))
    hate_only = sum(1 for _ in resample(stream, "hate_only"))
    toy = [r for r in SharedRecordStream(3, 7)]
    toy = [type(r)(id=str(i), text="", label=r.label) for i, r in enumerate(toy)]
    toy_balanced = list(resample(toy, "balanced", seed=7))
    ok = balanced == 1_168_990 and hate_only == 584_495 and len(toy_balanced) == 6
    report(8, "resampling arithmetic", ok,
           f"balanced={balanced:,}, hate_only={hate_only:,}, toy={len(toy_balanced)}")
    assert ok


MEMORY_CEILING = 32 * 2**20


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@pytest.mark.slow
def test_criterion_09_weak_labeling_scale(tmp_path):
    model = train_baseline(planted_corpus(2000, seed=1))
    stream = SyntheticStream(1_000_000, seed=9)
    start = time.perf_counter()

    tracemalloc.start()
    first = run_labeling(stream, tmp_path / "a.jsonl", model, batch_size=512)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    second = run_labeling(stream, tmp_path / "b.jsonl", model, batch_size=512)

    ckpt = tmp_path / "c.ckpt"
    interrupted_at = None
    try:
        run_labeling(stream, tmp_path / "c.jsonl", FlakyAnnotator(model, fail_at=1000),
                     batch_size=512, checkpoint_path=ckpt)
    except RemoteUnavailable as exc:
        interrupted_at = exc.committed
    resumed = run_labeling(stream, tmp_path / "c.jsonl", model, batch_size=512,
                           checkpoint_path=ckpt, resume=True)
    elapsed = time.perf_counter() - start

    digests = {_sha256(tmp_path / name) for name in ("a.jsonl", "b.jsonl", "c.jsonl")}
    ok = (first == second == resumed == 1_000_000 and interrupted_at == 999 * 512
          and len(digests) == 1 and peak <= MEMORY_CEILING and elapsed < 300)
    report(9, "weak labeling determinism and scale", ok,
           f"1,000,000 records x3, identical={len(digests) == 1}, resumed after {interrupted_at:,}, "
           f"peak {peak / 2**20:.1f} MiB <= {MEMORY_CEILING // 2**20} MiB, {elapsed:.0f} s total")
    assert ok


def test_criterion_10_baseline_sanity():
    model = train_baseline(planted_corpus(2000, seed=1))
    held_out = planted_corpus(2000, seed=2)
    preds = [label for label, _ in model.classify_batch([text for text, _ in held_out])]
    mf1 = classification_eval([gold for _, gold in held_out], preds).macro_f1
    ok = mf1 >= 0.95 and all(PLANTED in t for t, g in held_out if g is BinaryLabel.HATE)
    report(10, "baseline on planted corpus", ok, f"held-out MF1 {mf1:.4f} >= 0.95")
    assert ok


def test_criterion_11_corpus_stats():
    rows = [{"topic": topic, "threads": threads, "comments": comments}
            for topic, threads, comments in TOPIC_MANIFEST]
    stats = manifest_stats(rows)
    small = corpus_stats(SyntheticStream(400, seed=2))
    ok = (stats.total, stats.threads) == (10_747_745, 258_550) and small.threads == 10
    report(11, "corpus stats from topic manifest", ok,
           f"comments={stats.total:,}, threads={stats.threads:,}")
    assert ok
