"""``vihate`` command line.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to stderr;
data goes to ``--output`` (``-`` or omitted means stdout).

A TOML file given with ``--config`` supplies defaults: top-level keys apply to
every subcommand, a ``[<subcommand>]`` table to that subcommand only. Keys are
option names (``batch_size`` or ``batch-size``). Flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import __version__
from .corpus import (
    SCHEMAS,
    LabeledRecord,
    get_schema,
    make_t5_pairs,
    read_dataset,
    read_raw_comments,
    write_jsonl,
    write_pairs,
)
from .errors import DataError, RemoteUnavailable
from .metrics import classification_eval, format_table, report_from_counts, span_counts, summarize
from .normalize import NormalizeConfig, is_effectively_empty, normalize
from .spans import iob_to_spans, spans_to_iob, tokenize
from .tasks import TASK_ALIASES, Task, decode_prediction, parse_task
from .weaklabel import (
    ENDPOINT_ENV,
    NaiveBayesModel,
    RatioCondition,
    RemoteAnnotator,
    corpus_stats,
    manifest_stats,
    read_manifest,
    resample,
    run_labeling,
    train_baseline,
)

log = logging.getLogger("vihate")

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


def _progress(records: Iterable, every: int, what: str) -> Iterator:
    n = 0
    for n, item in enumerate(records, start=1):
        if every and n % every == 0:
            log.info("%s: %d records", what, n)
        yield item
    log.info("%s: done, %d records", what, n)


def _task(name: str) -> Task:
    try:
        return parse_task(name)
    except ValueError as exc:
        raise UsageError(f"--task: {exc}") from None


def _schema_for(task_name: str) -> str:
    key = task_name.strip().lower()
    if key in SCHEMAS:
        return key
    task = _task(key)
    return {Task.HATE_SPEECH: "vihsd", Task.TOXIC_SPEECH: "victsd", Task.HATE_SPANS: "vihos"}[task]


def _require_file(path, flag: str) -> None:
    if path is None:
        raise UsageError(f"{flag} is required")
    if str(path) != "-" and not Path(path).is_file():
        raise UsageError(f"{flag}: no such file {path}")


def _write_json(obj, path) -> None:
    text = json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_normalize(args) -> int:
    _require_file(args.input, "--input")
    config = NormalizeConfig(args.url_removal, args.username_removal, args.quote_removal)
    dropped = 0

    def cleaned():
        nonlocal dropped
        for raw in _progress(read_raw_comments(args.input, args.strict), args.progress_every, "normalize"):
            text = normalize(raw, config)
            if is_effectively_empty(text) and not args.keep_empty:
                dropped += 1
                continue
            yield LabeledRecord(id=raw.id, text=text, topic=raw.topic, thread=raw.thread)

    n = write_jsonl(cleaned(), args.output)
    log.info("wrote %d records, dropped %d empty after cleaning", n, dropped)
    return 0


def cmd_encode(args) -> int:
    _require_file(args.input, "--input")
    schema = get_schema(args.schema)
    task = _task(args.task) if args.task else schema.task
    if task is None:
        raise UsageError("--task is required for this schema")
    reader = read_dataset(args.input, schema, split=args.split, strict=args.strict)
    fmt = args.format or ("jsonl" if str(args.output).endswith(".jsonl") else "tsv")
    n = write_pairs(make_t5_pairs(_progress(reader, args.progress_every, "encode"), task, args.table_spelling),
                    args.output, fmt)
    log.info("wrote %d %s pairs; splits %s; skipped %d rows", n, task.prefix, dict(reader.split_counts), reader.skipped)
    return 0


def _read_model_outputs(path, strict: bool) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj.get("text"), str) or not isinstance(obj.get("output"), str):
                    raise DataError("needs string fields 'text' and 'output'")
            except (json.JSONDecodeError, AttributeError, DataError) as exc:
                if strict:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
                log.warning("skipping %s:%d: %s", path, lineno, exc)
                continue
            obj.setdefault("id", str(lineno))
            yield obj


def cmd_decode(args) -> int:
    _require_file(args.input, "--input")
    if not args.task:
        raise UsageError("--task is required")
    schema = get_schema(_schema_for(args.task))
    task = schema.task
    statuses = Counter()
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        for obj in _progress(_read_model_outputs(args.input, args.strict), args.progress_every, "decode"):
            pred = decode_prediction(task, obj["output"], obj["text"], schema.labels)
            statuses[pred.parse_status] += 1
            record = LabeledRecord(id=str(obj["id"]), text=obj["text"], label=pred.label, spans=pred.spans)
            row = record.to_json()
            row["parse_status"] = pred.parse_status
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    log.info("parse status counts: %s", dict(statuses))
    return 0


def _evaluate(task_name: str, gold_path, pred_path, strict: bool):
    schema = get_schema(_schema_for(task_name))
    golds = list(read_dataset(gold_path, schema, strict=strict))
    preds = {r.id: r for r in read_dataset(pred_path, schema, strict=strict)}
    missing = [g.id for g in golds if g.id not in preds]
    if missing:
        raise DataError(f"{pred_path}: no prediction for {len(missing)} gold ids, e.g. {missing[:3]}")
    if schema.task.is_span_task:
        counts, n = span_counts((g.spans for g in golds), (preds[g.id].spans for g in golds),
                                (g.text for g in golds))
        return report_from_counts(schema.task, counts, n)
    return classification_eval([g.label for g in golds], [preds[g.id].label for g in golds], schema.task)


def cmd_eval(args) -> int:
    tasks, golds, preds = args.task or [], args.gold or [], args.pred or []
    if not tasks or not len(tasks) == len(golds) == len(preds):
        raise UsageError("give --task, --gold and --pred the same number of times (at least once)")
    for path in golds + preds:
        _require_file(path, "--gold/--pred")
    reports = [_evaluate(t, g, p, args.strict) for t, g, p in zip(tasks, golds, preds)]
    if len({r.task for r in reports}) == len(Task) == len(reports):
        summary = summarize(reports)
        print(format_table(summary.reports, summary.average_mf1, args.name))
        payload = summary.to_dict()
    else:
        print(format_table(reports, None, args.name))
        payload = reports[0].to_dict() if len(reports) == 1 else {"reports": [r.to_dict() for r in reports]}
    if args.output:
        _write_json(payload, args.output)
    return 0


def cmd_weaklabel(args) -> int:
    _require_file(args.input, "--input")
    sources = [x for x in (args.model, args.train, args.remote) if x]
    if len(sources) > 1:
        raise UsageError("choose one of --model, --train, --remote")
    if args.model:
        _require_file(args.model, "--model")
        annotator = NaiveBayesModel.load(args.model)
    elif args.train:
        _require_file(args.train, "--train")
        train = read_dataset(args.train, args.train_schema, strict=args.strict)
        annotator = train_baseline((r.text, r.label) for r in train)
        log.info("trained baseline on %d records", sum(train.split_counts.values()))
    else:
        try:
            annotator = RemoteAnnotator(args.remote, timeout=args.timeout)
        except ValueError as exc:
            raise UsageError(f"{exc}; pass --model, --train or --remote") from None
    if args.save_model:
        if not isinstance(annotator, NaiveBayesModel):
            raise UsageError("--save-model needs a built-in model")
        annotator.save(args.save_model)
    if args.output in (None, "-"):
        raise UsageError("--output must be a file (checkpointed output is truncated on resume)")

    reader = read_dataset(args.input, "pretrain", strict=args.strict)
    every = args.progress_every

    def report(n):
        if every and n // every != (n - args.batch_size) // every:
            log.info("weaklabel: %d records committed", n)

    try:
        n = run_labeling(reader, args.output, annotator, batch_size=args.batch_size,
                         checkpoint_path=args.checkpoint, resume=args.resume, jobs=args.jobs, progress=report)
    except RemoteUnavailable as exc:
        log.error("%s", exc)
        if args.checkpoint:
            log.error("committed %d records (last id %r); rerun with --resume to continue",
                      exc.committed, exc.last_committed_id)
        return 2
    log.info("labeled %d records with %s", n, annotator.annotator_id)
    return 0


def cmd_resample(args) -> int:
    _require_file(args.input, "--input")
    if args.seed is None:
        raise UsageError("--seed is required")
    reader = read_dataset(args.input, "pretrain", strict=args.strict)
    n = write_jsonl(resample(reader, args.condition, args.seed), args.output)
    log.info("resample %s: wrote %d records", args.condition, n)
    return 0


def cmd_stats(args) -> int:
    if bool(args.input) == bool(args.manifest):
        raise UsageError("give exactly one of --input or --manifest")
    if args.manifest:
        _require_file(args.manifest, "--manifest")
        report = manifest_stats(read_manifest(args.manifest))
    else:
        _require_file(args.input, "--input")
        records = read_dataset(args.input, "pretrain", strict=args.strict)
        report = corpus_stats(_progress(records, args.progress_every, "stats"))
    if not report.fraction_defined:
        log.warning("empty corpus: hate fraction undefined, reported as 0")
    _write_json(report.to_dict(), args.output)
    return 0


def cmd_iob(args) -> int:
    _require_file(args.input, "--input")
    if args.direction == "to-iob":
        def rows():
            for record in read_dataset(args.input, "vihos", strict=args.strict):
                seq = spans_to_iob(record.text, record.spans)
                yield {"id": record.id, "text": record.text,
                       "tokens": [t.text for t in seq.tokens], "tags": seq.tags}
    else:
        def rows():
            for obj in _read_jsonl(args.input):
                tokens = tokenize(obj["text"])
                spans = iob_to_spans(tokens, obj["tags"], strict=args.strict)
                yield LabeledRecord(id=str(obj["id"]), text=obj["text"], spans=spans).to_json()

    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        for row in rows():
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file with default option values")
    common.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    common.add_argument("--progress-every", type=int, default=100_000, metavar="N",
                        help="log progress every N records (0 disables)")
    common.add_argument("--strict", action="store_true", help="fail on malformed rows instead of skipping them")
    common.add_argument("--jobs", type=int, default=1, help="maximum concurrent workers")

    parser = _Parser(prog="vihate", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("normalize", parents=[common], help="clean raw comments into JSONL records")
    p.add_argument("--input")
    p.add_argument("--output", default="-")
    p.add_argument("--url-removal", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--username-removal", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--quote-removal", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--keep-empty", action="store_true", help="keep records that are empty after cleaning")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("encode", parents=[common], help="build text-to-text source/target pairs")
    p.add_argument("--input")
    p.add_argument("--output", default="-")
    p.add_argument("--schema", choices=sorted(SCHEMAS), default="vihsd")
    p.add_argument("--task", help=f"task alias ({', '.join(TASK_ALIASES)}); defaults to the schema's task")
    p.add_argument("--split", choices=["train", "dev", "test", "unsplit"], help="split for rows without one")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--table-spelling", action="store_true",
                   help="use the 'toxic-speech-detecion' prefix spelling of the published examples")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="parse model outputs into predictions")
    p.add_argument("--task")
    p.add_argument("--input", help="JSONL with id, text (original) and output (model output)")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", parents=[common], help="score predictions (Acc / WF1 / MF1)")
    p.add_argument("--task", action="append")
    p.add_argument("--gold", action="append")
    p.add_argument("--pred", action="append")
    p.add_argument("--output", help="write the JSON report here")
    p.add_argument("--name", default="model", help="model name in the printed table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("weaklabel", parents=[common], help="label a corpus with a classifier")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--model", help="saved baseline model (JSON)")
    p.add_argument("--train", help="train the baseline on this labeled file first")
    p.add_argument("--train-schema", choices=sorted(SCHEMAS), default="vihsd_binary")
    p.add_argument("--save-model")
    p.add_argument("--remote", help=f"annotator base URL (default ${ENDPOINT_ENV})")
    p.add_argument("--timeout", type=float, default=30.0, help="remote request timeout, seconds")
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--checkpoint", help="checkpoint file, updated after every batch")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_weaklabel)

    p = sub.add_parser("resample", parents=[common], help="resample a labeled corpus to a hate ratio")
    p.add_argument("--input")
    p.add_argument("--output", default="-")
    p.add_argument("--condition", choices=[c.value for c in RatioCondition], default="full")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("stats", parents=[common], help="label / topic / thread counts")
    p.add_argument("--input")
    p.add_argument("--manifest", help="per-topic summary rows (CSV or JSONL)")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("iob", parents=[common], help="convert between spans and IOB tags")
    p.add_argument("--direction", choices=["to-iob", "to-spans"], default="to-iob")
    p.add_argument("--input")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_iob)
    return parser


def _load_config(path, command: str, subparser: argparse.ArgumentParser, given: argparse.Namespace) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--config {path}: {exc}") from None
    actions = {a.dest: a for a in subparser._actions}
    out = {}
    # top-level keys may target other subcommands; unknown ones are ignored
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if not isinstance(value, dict) and dest in actions:
            out[dest] = value
    section = raw.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"--config: [{command}] must be a table")
    for key, value in section.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"--config: unknown option {key!r} for {command}")
        out[dest] = value
    for dest in list(out):
        # repeated flags would otherwise extend the configured list
        if isinstance(actions[dest], argparse._AppendAction) and getattr(given, dest) is not None:
            del out[dest]
    return out


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.config:
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            subparser.set_defaults(**_load_config(args.config, args.command, subparser, args))
            args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"vihate {args.command}: {exc}\n")
        return 1
    except (DataError, OSError, UnicodeDecodeError) as exc:
        log.error("%s", exc)
        return 2


def main() -> None:
    sys.exit(run())
