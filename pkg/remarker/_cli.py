from __future__ import annotations

import argparse
import hashlib
import json
import sys
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, NoReturn

from remarker import _log
from remarker._classifier.base import (
    LabelVocabulary,
    Predictor,
    read_labels,
    write_labels,
)
from remarker._classifier.external import (
    ExternalScoreFile,
    load_external_predictions,
    write_predictions,
)
from remarker._classifier.persist import load_model, save_model
from remarker._classifier.softmax import train
from remarker._config import RunConfig, RunManifest, load_config, resolve_config
from remarker._corpus import (
    FieldMapping,
    compute_stats,
    dump_record,
    labeled,
    write_dataset,
)
from remarker._errors import (
    ArtifactError,
    DataError,
    SchemeMismatchError,
    UsageError,
)
from remarker._eval import (
    STRICT_MODES,
    align,
    compare_models,
    evaluate,
    per_pair_report,
    read_baselines,
    write_report,
)
from remarker._markers import (
    MarkedInstance,
    MarkerScheme,
    insert_markers,
    read_marked_dataset,
)
from remarker._notifiers import NOTIFIERS, make_notifier
from remarker._router import (
    EntityPairKey,
    PairRoutedClassifier,
    is_routed_model,
    partition_dataset,
)
from remarker._utils import atomic_write, resolve_data_path
from remarker._watch import RunWatch

if TYPE_CHECKING:
    from remarker._corpus import Corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_SEED = 42


class _ArgumentParser(argparse.ArgumentParser):
    """Raise :class:`UsageError` instead of exiting so :func:`run` owns exit codes."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _csv(convert: Callable[[str], object]) -> Callable[[str], list[object]]:
    def parse(text: str) -> list[object]:
        try:
            return [convert(part) for part in text.split(",") if part.strip()]
        except (ValueError, DataError) as e:
            raise argparse.ArgumentTypeError(str(e)) from e

    return parse


def _named_path(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=FILE, got {text!r}")
    return name, path


def build_parser() -> argparse.ArgumentParser:
    from remarker import __version__

    parser = _ArgumentParser(
        prog="remarker",
        description=(
            "Relation extraction with typed entity markers: ingest, mark, route, "
            "train, predict and evaluate."
        ),
    )
    parser.add_argument(
        "--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED})"
    )
    parser.add_argument("--config", help="TOML config file ($REMARKER_CONFIG)")
    parser.add_argument("--field-map", help="JSON object of field-mapping overrides")
    parser.add_argument(
        "--labels", help="label vocabulary file ('!' flags the sentinel)"
    )
    parser.add_argument("--quiet", action="store_true", help="only log errors")
    parser.add_argument(
        "--notify",
        action="append",
        default=[],
        choices=sorted(NOTIFIERS),
        help="send start/end/error reports to a chat platform (repeatable)",
    )
    parser.add_argument("--manifest", help="where to write the run manifest")
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name: str, summary: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=summary, description=summary)
        p.set_defaults(handler=_HANDLERS[name])
        return p

    p = add("ingest", "parse and validate a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--lenient", action="store_true", help="skip bad lines")
    p.add_argument("--output", help="rewrite valid records in the default layout")

    p = add("stats", "print relation and entity-pair histograms")
    p.add_argument("--input", required=True)
    p.add_argument("--json", help="also write the statistics as JSON")

    p = add("preprocess", "insert entity markers")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--scheme",
        default=MarkerScheme.TYPED_PUNCT.value,
        help=f"one of {', '.join(s.value for s in MarkerScheme)}",
    )
    p.add_argument("--output", help="output file (default: stdout)")

    p = add("route", "print the entity-pair partition census")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--keys", type=_csv(EntityPairKey.parse), help="e.g. ORG-GPE,PERS-ORG"
    )

    p = add("train", "train a softmax relation classifier")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--model", required=True, help="artifact file (directory with --per-pair)"
    )
    p.add_argument("--per-pair", action="store_true", help="one model per entity pair")
    p.add_argument("--jobs", type=int, default=1, help="concurrent per-pair trainings")
    p.add_argument("--keys", type=_csv(EntityPairKey.parse))
    p.add_argument("--scheme", help="marker scheme for unmarked input (typed-punct)")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--ngrams", type=_csv(int), help="e.g. 1,2")

    p = add("predict", "write predictions of a trained model")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--per-pair", action="store_true", help="the model is a directory")
    p.add_argument("--output", required=True, help="prediction TSV")
    p.add_argument("--probs", action="store_true", help="add probability columns")

    p = add("evaluate", "score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--strict", action="store_true", help="report the strict F1")
    p.add_argument("--strict-mode", choices=STRICT_MODES)
    p.add_argument("--by-pair", action="store_true", help="add per-pair rows")
    p.add_argument("--keys", type=_csv(EntityPairKey.parse))
    p.add_argument("--baseline", help="pair-key<TAB>baseline-F1 file")
    p.add_argument("--report", help="structured JSON report")

    p = add("compare", "compare several prediction files")
    p.add_argument("--gold", required=True)
    p.add_argument(
        "--pred", type=_named_path, action="append", required=True, metavar="NAME=FILE"
    )
    p.add_argument("--per-class", action="store_true", help="add the class grid")
    p.add_argument("--report", help="structured JSON report")
    return parser


@dataclass
class _Context:
    args: argparse.Namespace
    config: RunConfig
    manifest: RunManifest
    watch: RunWatch
    vocabulary: LabelVocabulary | None = None
    primary_output: str | None = None

    @property
    def no_relation(self) -> str:
        if self.vocabulary is not None:
            return self.vocabulary.no_relation
        return self.config.no_relation

    def input(self, path: str) -> Path:
        resolved = resolve_data_path(path)
        self.manifest.inputs[str(resolved)] = hashlib.sha256(
            resolved.read_bytes()
        ).hexdigest()
        return resolved

    def output(self, path: str, primary: bool = True) -> str:
        if primary and self.primary_output is None:
            self.primary_output = path
        self.manifest.outputs.append(path)
        return path

    def read(
        self, path: str, lenient: bool = False
    ) -> tuple[Corpus, list[MarkedInstance] | None]:
        return read_marked_dataset(
            self.input(path),
            self.config.fields,
            strict=self.config.strict and not lenient,
            types=self.config.types,
        )


def _cmd_ingest(ctx: _Context) -> None:
    corpus, _ = ctx.read(ctx.args.input, lenient=ctx.args.lenient)
    if ctx.args.output:
        write_dataset(ctx.output(ctx.args.output), corpus)
    print(f"{len(corpus)} instances, {len(corpus.skipped)} skipped")
    ctx.watch.add_summary(f"{len(corpus)} instances, {len(corpus.skipped)} skipped")


def _cmd_stats(ctx: _Context) -> None:
    corpus, _ = ctx.read(ctx.args.input)
    stats = compute_stats(corpus, ctx.no_relation)
    print(stats.render())
    if ctx.args.json:
        with atomic_write(ctx.output(ctx.args.json)) as f:
            json.dump(stats.to_dict(), f, indent=2)
            f.write("\n")


def _cmd_preprocess(ctx: _Context) -> None:
    scheme = MarkerScheme.from_name(ctx.args.scheme)
    corpus, marked = ctx.read(ctx.args.input)
    if marked is not None:
        raise DataError(f"{ctx.args.input} is already marked ({marked[0].scheme})")
    lines = (
        dump_record(insert_markers(inst, scheme).to_record(ctx.config.fields))
        for inst in corpus
    )
    if ctx.args.output:
        _write_lines(ctx.output(ctx.args.output), lines)
    else:
        for line in lines:
            print(line)


def _cmd_route(ctx: _Context) -> None:
    corpus, _ = ctx.read(ctx.args.input)
    print(partition_dataset(corpus, ctx.config.keys).render_census())


def _marked_input(
    ctx: _Context, path: str, scheme: MarkerScheme | None
) -> list[MarkedInstance]:
    corpus, marked = ctx.read(path)
    if marked is None:
        scheme = scheme or MarkerScheme.TYPED_PUNCT
        _log.info(f"Marking {len(corpus)} instances with {scheme}")
        return [insert_markers(inst, scheme) for inst in corpus]
    if scheme is not None and marked and marked[0].scheme is not scheme:
        raise SchemeMismatchError(
            f"{path} was marked with {marked[0].scheme}, expected {scheme}"
        )
    return marked


def _cmd_train(ctx: _Context) -> None:
    args = ctx.args
    requested = MarkerScheme.from_name(args.scheme) if args.scheme else None
    marked = _marked_input(ctx, args.input, requested)
    data = [(m, str(m.relation)) for m in marked if _require_gold(m)]
    vocab = ctx.vocabulary or LabelVocabulary.from_labels(
        (g for _, g in data), ctx.config.no_relation
    )
    model: Predictor
    if args.per_pair:
        if args.jobs < 1:
            raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
        routed = PairRoutedClassifier.fit(
            data, ctx.config.train, ctx.config.keys, vocab, jobs=args.jobs
        )
        routed.save(ctx.output(args.model))
        model = routed
        final = routed.fallback.history[-1]
        ctx.watch.add_summary(
            f"{len(routed.models)} pair models + fallback, fallback loss {final:.4f}"
        )
    else:
        native = train(data, ctx.config.train, vocab)
        save_model(native, ctx.output(args.model))
        model = native
        ctx.watch.add_summary(
            f"final loss {native.history[-1]:.4f}, "
            f"fingerprint {native.fingerprint()[:12]}"
        )
    _log.info(f"Trained on {len(data)} instances, {len(model.vocabulary)} labels")


def _require_gold(m: MarkedInstance) -> bool:
    if m.relation is None:
        raise DataError("training instance without gold relation", instance_id=m.id)
    return True


def _load_predictor(path: Path, per_pair: bool) -> Predictor:
    if per_pair or is_routed_model(path):
        return PairRoutedClassifier.load(path)
    return load_model(path)


def _cmd_predict(ctx: _Context) -> None:
    args = ctx.args
    model = _load_predictor(resolve_data_path(args.model), args.per_pair)
    marked = _marked_input(ctx, args.input, model.scheme)
    records = model.predict_many(marked)
    out = ctx.output(args.output)
    write_predictions(out, records, model.vocabulary, with_probabilities=args.probs)
    if args.probs:
        write_labels(ctx.output(f"{out}.labels", primary=False), model.vocabulary)
    _log.info(f"Wrote {len(records)} predictions to {out}")


def _cmd_evaluate(ctx: _Context) -> None:
    args = ctx.args
    gold = labeled(ctx.read(args.gold)[0])
    preds = load_external_predictions(ctx.input(args.pred), ctx.vocabulary)
    g, p = align(gold, preds.records, source=preds.name)
    report = evaluate(g, p, ctx.vocabulary, ctx.no_relation, ctx.config.strict_mode)
    print(report.render(strict=args.strict))
    ctx.watch.add_summary(report.headline())
    by_pair = None
    if args.by_pair or args.baseline:
        baselines = read_baselines(ctx.input(args.baseline)) if args.baseline else None
        by_pair = per_pair_report(
            partition_dataset(gold, ctx.config.keys),
            preds.records,
            baselines,
            ctx.vocabulary,
            ctx.no_relation,
        )
        print()
        print(by_pair.render())
    if args.report:
        path = ctx.output(args.report)
        sections = {"by_pair": by_pair} if by_pair else {}
        write_report(path, report, ctx.manifest.to_dict(), **sections)


def _cmd_compare(ctx: _Context) -> None:
    args = ctx.args
    gold = labeled(ctx.read(args.gold)[0])
    names = [name for name, _ in args.pred]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate model names in --pred: {names}")
    sources: list[ExternalScoreFile] = [
        load_external_predictions(ctx.input(path), ctx.vocabulary, name=name)
        for name, path in args.pred
    ]
    comparison = compare_models(
        sources, gold, ctx.vocabulary, ctx.no_relation, per_class=args.per_class
    )
    print(comparison.render())
    if args.per_class:
        print()
        print(comparison.render_class_grid())
    for row in comparison.rows:
        ctx.watch.add_summary(" ".join(row.cells()))
    if args.report:
        write_report(ctx.output(args.report), comparison, ctx.manifest.to_dict())


_HANDLERS: dict[str, Callable[[_Context], None]] = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "preprocess": _cmd_preprocess,
    "route": _cmd_route,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
}


def _write_lines(path: str, lines: Iterable[str]) -> None:
    with atomic_write(path) as f:
        for line in lines:
            f.write(line)
            f.write("\n")


def _resolve(args: argparse.Namespace) -> RunConfig:
    field_map = (
        FieldMapping.from_file(resolve_data_path(args.field_map))
        if args.field_map
        else None
    )
    train_overrides = {
        "seed": args.seed,
        "batch_size": getattr(args, "batch_size", None),
        "epochs": getattr(args, "epochs", None),
        "learning_rate": getattr(args, "lr", None),
        "l2": getattr(args, "l2", None),
        "dim": getattr(args, "dim", None),
        "ngrams": getattr(args, "ngrams", None),
    }
    keys = getattr(args, "keys", None)
    return resolve_config(
        load_config(args.config),
        train_overrides=train_overrides,
        field_map=field_map,
        keys=tuple(keys) if keys else None,
        strict_mode=getattr(args, "strict_mode", None),
    )


_PRIMARY_OUTPUT: dict[str, str] = {
    "ingest": "output",
    "stats": "json",
    "preprocess": "output",
    "train": "model",
    "predict": "output",
    "evaluate": "report",
    "compare": "report",
}


def _execute(args: argparse.Namespace, argv: Sequence[str]) -> None:
    from remarker import __version__

    config = _resolve(args)
    manifest = RunManifest(
        command=args.command,
        config=config.to_dict(),
        version=__version__,
        seed=config.train.seed,
        argv=list(argv),
    )
    notifiers = [make_notifier(name) for name in args.notify]
    watch = RunWatch(f"remarker {args.command}", notifiers, log_errors=False)
    dest = _PRIMARY_OUTPUT.get(args.command)
    ctx = _Context(args, config, manifest, watch)
    # the manifest of a failed run lands where the output would have gone
    ctx.primary_output = getattr(args, dest, None) if dest else None
    with watch:
        try:
            if args.labels:
                ctx.vocabulary = read_labels(resolve_data_path(args.labels))
            args.handler(ctx)
        except BaseException as e:
            manifest.fail(e)
            try:
                _emit_manifest(ctx)
            except OSError as err:
                _log.warn(f"Could not write the run manifest: {err}")
            raise
        manifest.finish()
        _emit_manifest(ctx)
        watch.add_summary(manifest.summary())


def _emit_manifest(ctx: _Context) -> None:
    target = ctx.args.manifest or (
        f"{ctx.primary_output}.manifest.json" if ctx.primary_output else None
    )
    if target is None:
        # stderr even under --quiet: the run left no file to put it next to
        print(json.dumps(ctx.manifest.to_dict(), indent=2), file=sys.stderr)
        return
    ctx.manifest.write(target)


def run(argv: Sequence[str] | None = None) -> int:
    """
    Run the command line and return the process exit status: 0 on success,
    1 for usage errors, 2 for data or file errors and 3 for anything else.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _log.error(f"usage error: {e}")
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else EXIT_OK
    _log.set_verbose(not args.quiet)
    try:
        _execute(args, argv)
    except UsageError as e:
        _log.error(f"usage error: {e}")
        return EXIT_USAGE
    except (DataError, ArtifactError, SchemeMismatchError) as e:
        _log.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except OSError as e:
        _log.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except Exception as e:
        _log.error(f"internal error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL
    return EXIT_OK


def main() -> NoReturn:
    sys.exit(run())
