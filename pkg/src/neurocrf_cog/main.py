"""
Command-line entrypoint for neurocrf-cog.

    neurocrf train --ocr letter.data --word commanding --model-out model.txt
    neurocrf train --events events.csv --user alice --model-out alice.txt
    neurocrf decode --model model.txt --input sequences.txt
    neurocrf calibrate --scores scores/commanding_crf-mlp_0.tsv
    neurocrf benchmark-ocr --data letter.data --lengths 3 --workers 8
    neurocrf benchmark-sessions --events events.csv
    neurocrf stats --results results/results.csv

Exit statuses: 0 success, 2 input error, 3 model/data mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any

import sentry_sdk
from dotenv import load_dotenv
from mini_app_polis import logger as logger_mod

import neurocrf_cog.config as config
from neurocrf_cog.benchmark_ocr import run_benchmark_ocr
from neurocrf_cog.benchmark_sessions import (
    SessionSettings,
    prepare_user_split,
    run_benchmark_sessions,
)
from neurocrf_cog.core import (
    Architecture,
    Dataset,
    DegenerateFitError,
    HyperParams,
    InsufficientDataError,
    InvalidArgumentError,
    ModelDataMismatchError,
    ParseError,
    StructuralError,
    derive_seed,
)
from neurocrf_cog.decoder import viterbi
from neurocrf_cog.evaluation import (
    accuracy_from_rates,
    eer,
    evaluate_model,
    fit_calibration,
    frr_far,
)
from neurocrf_cog.model_io import load_model, read_sequence_file, save_model
from neurocrf_cog.ocr_dataset import (
    load_ocr,
    ocr_dataset_summary,
    partition_word_experiment,
    same_length_peers,
    words_by_instance,
)
from neurocrf_cog.results import (
    ExperimentConfig,
    aggregate_frame,
    load_results,
    per_model_frame,
    read_score_file,
    significance_frame,
)
from neurocrf_cog.sessions import (
    build_ngram_vocab,
    events_by_user,
    load_event_log,
    save_vocab,
    segment_sessions,
    sequences_to_dataset,
    session_alphabet,
    session_length_summary,
)
from neurocrf_cog.training import TrainConfig, train

log = logger_mod.get_logger()

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_MISMATCH = 3

_INPUT_ERRORS = (
    FileNotFoundError,
    ParseError,
    StructuralError,
    InvalidArgumentError,
    InsufficientDataError,
    DegenerateFitError,
)


def _hyper_from_args(args: argparse.Namespace) -> HyperParams:
    return HyperParams(
        learning_rate=args.eta,
        regularization=args.lam,
        max_sgd_examples=args.max_examples,
        rng_seed=args.seed,
    )


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        architectures=tuple(args.arch or Architecture),
        iterations=args.iterations,
        base_seed=args.seed,
        hyper=_hyper_from_args(args),
        workers=args.workers,
        out_dir=args.out_dir,
    )


def _trace_writer(path: str | None):
    if not path:
        return None
    trace_path = Path(path)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    trace_path.write_text("", encoding="utf-8")

    def _write(record: dict[str, Any]) -> None:
        with trace_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    return _write


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    architecture = (args.arch or [Architecture.CRF_MLP])[0]
    hyper = _hyper_from_args(args)
    model_out = Path(args.model_out)
    nonself: Dataset | None = None

    if args.ocr:
        if not args.word:
            raise InvalidArgumentError("--word is required with --ocr")
        dataset = load_ocr(args.ocr)
        words = words_by_instance(dataset)
        if args.word not in words:
            raise InvalidArgumentError(f"Word {args.word!r} does not occur in {args.ocr}")
        seed = derive_seed(args.seed, 0, args.word)
        peers = same_length_peers(words, args.word)
        if peers:
            part = partition_word_experiment(
                words[args.word], peers, config.OCR_TRAIN_RATIO, config.NONSELF_COUNT, seed
            )
            train_ds = dataset.subset(part.train)
            self_test, nonself = dataset.subset(part.self_test), dataset.subset(part.nonself)
        else:
            log.warning("⚠️ No other words of length %d; training without evaluation", len(args.word))
            train_ds = self_test = dataset.subset(words[args.word])
        model_id = args.word
    elif args.events:
        if not args.user:
            raise InvalidArgumentError("--user is required with --events")
        settings = SessionSettings()
        grouped = events_by_user(load_event_log(args.events))
        if args.user not in grouped:
            raise InvalidArgumentError(f"User {args.user!r} does not occur in {args.events}")
        own = prepare_user_split(args.user, grouped[args.user], settings)
        vocab = build_ngram_vocab((e for seq in own.train for e in seq), cap_per_label=settings.ngram_cap)
        alphabet = session_alphabet(own.train)
        save_vocab(vocab, model_out.with_suffix(".vocab.json"))
        train_ds = sequences_to_dataset(own.train, vocab, alphabet, settings.timezone)
        self_test = sequences_to_dataset(own.test, vocab, alphabet, settings.timezone)
        others = []
        for user, user_events in grouped.items():
            if user == args.user:
                continue
            try:
                others.extend(prepare_user_split(user, user_events, settings).test)
            except InsufficientDataError:
                continue
        nonself = sequences_to_dataset(others, vocab, alphabet, settings.timezone) if others else None
        seed = derive_seed(args.seed, 0, args.user)
        model_id = args.user
    else:
        raise InvalidArgumentError("train needs --ocr or --events")

    model, report = train(
        train_ds, TrainConfig(architecture, hyper), seed, on_trace=_trace_writer(args.trace)
    )
    save_model(model, model_out)
    payload: dict[str, Any] = {
        "model_id": model_id,
        "architecture": architecture.value,
        "seed": seed,
        "train": asdict(report),
    }
    if nonself is not None and len(self_test) > 0:
        payload["metrics"] = evaluate_model(model, self_test, nonself).as_dict()
    report_path = model_out.with_suffix(".report.json")
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    for observations in read_sequence_file(args.input):
        result = viterbi(model, observations)
        labels = " ".join(model.alphabet.decode(result.labels))
        print(f"{labels}\t{result.score!r}\t{result.probability!r}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    self_scores, nonself_scores = read_score_file(args.scores)
    calibration = fit_calibration(self_scores, nonself_scores)
    frr, far = frr_far(self_scores, nonself_scores, calibration)
    rows = {
        "slope": calibration.slope,
        "intercept": calibration.intercept,
        "threshold": calibration.threshold,
        "r_square": calibration.r_square,
        "frr": frr,
        "far": far,
        "accuracy": accuracy_from_rates(frr, far),
        "eer": eer(frr, far),
    }
    for key, value in rows.items():
        print(f"{key}\t{value:.6f}")
    return EXIT_OK


def _print_summary(summary) -> None:
    print(
        f"completed={summary.completed} attempted={summary.attempted} "
        f"skipped={summary.skipped} failed={summary.failed}"
    )
    for name, path in sorted(summary.outputs.items()):
        print(f"{name}\t{path}")


def cmd_benchmark_ocr(args: argparse.Namespace) -> int:
    summary = run_benchmark_ocr(args.data, _experiment_config(args), args.lengths or None)
    _print_summary(summary)
    return EXIT_OK


def cmd_benchmark_sessions(args: argparse.Namespace) -> int:
    session_settings = SessionSettings(
        gap_seconds=args.gap_seconds,
        min_user_sequences=args.min_user_sequences,
        timezone=args.timezone,
    )
    summary = run_benchmark_sessions(args.events, _experiment_config(args), session_settings)
    _print_summary(summary)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    if not (args.results or args.ocr or args.events):
        raise InvalidArgumentError("stats needs --results, --ocr or --events")
    if args.results:
        per_model = per_model_frame(load_results(args.results))
        print(aggregate_frame(per_model).to_string(index=False))
        print()
        print(significance_frame(per_model).to_string(index=False))
    if args.ocr:
        print("length\twords\tinstances")
        for row in ocr_dataset_summary(load_ocr(args.ocr)):
            print(f"{row.length}\t{row.words}\t{row.instances}")
    if args.events:
        sessions = [
            s
            for user_events in events_by_user(load_event_log(args.events)).values()
            for s in segment_sessions(user_events, config.SESSION_GAP_SECONDS)
        ]
        print("length\tentropy\tsessions\tunique_labels")
        for row in session_length_summary(sessions):
            entropy = "-" if row.entropy is None else f"{row.entropy:.2f}"
            print(f"{row.length}\t{entropy}\t{row.sessions}\t{row.unique_labels}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--arch",
        action="append",
        type=Architecture.parse,
        help="crf-mlp, crf-rnn or crf-prcpt; repeat for several (default: all for benchmarks)",
    )
    common.add_argument("--seed", type=int, default=config.RNG_SEED)
    common.add_argument("--iterations", type=int, default=config.ITERATIONS)
    common.add_argument("--eta", type=float, default=config.LEARNING_RATE, help="learning rate")
    common.add_argument(
        "--lambda", dest="lam", type=float, default=config.REGULARIZATION, help="weight elimination"
    )
    common.add_argument(
        "--max-examples",
        type=int,
        default=config.MAX_SGD_EXAMPLES,
        help="maximum sequence presentations per training run",
    )
    common.add_argument("--out-dir", default=config.OUTPUT_DIR)
    common.add_argument("--workers", type=int, default=config.WORKERS)
    return common


def _parse_args(argv: list[str]) -> argparse.Namespace:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="neurocrf",
        description="Neural linear-chain CRF models for sequence verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train and save one model")
    p.add_argument("--ocr", help="OCR letter file")
    p.add_argument("--word", help="word to model (with --ocr)")
    p.add_argument("--events", help="event log CSV")
    p.add_argument("--user", help="user to model (with --events)")
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace", help="write training checks as JSON lines")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("decode", help="Viterbi-decode observation sequences")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(handler=cmd_decode)

    p = sub.add_parser("calibrate", help="fit the linear threshold on a score file")
    p.add_argument("--scores", required=True, help="two columns: score class")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("benchmark-ocr", parents=[common], help="per-word OCR benchmark")
    p.add_argument("--data", default=config.OCR_DATA_PATH)
    p.add_argument("--lengths", type=int, nargs="*", help="only words of these lengths")
    p.set_defaults(handler=cmd_benchmark_ocr)

    p = sub.add_parser("benchmark-sessions", parents=[common], help="per-user session benchmark")
    p.add_argument("--events", default=config.EVENT_LOG_PATH)
    p.add_argument("--gap-seconds", type=int, default=config.SESSION_GAP_SECONDS)
    p.add_argument("--min-user-sequences", type=int, default=config.MIN_USER_SEQUENCES)
    p.add_argument("--timezone", default=config.TIMEZONE)
    p.set_defaults(handler=cmd_benchmark_sessions)

    p = sub.add_parser("stats", help="aggregate tables and dataset statistics")
    p.add_argument("--results", help="results.csv from a benchmark run")
    p.add_argument("--ocr", help="OCR letter file")
    p.add_argument("--events", help="event log CSV")
    p.set_defaults(handler=cmd_stats)

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    sentry_sdk.init(dsn=os.getenv("SENTRY_DSN"), environment=os.getenv("SENTRY_ENVIRONMENT", "local"))
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return args.handler(args)
    except ModelDataMismatchError as exc:
        log.error("❌ %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except _INPUT_ERRORS as exc:
        log.error("❌ %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    try:
        raise SystemExit(main())
    except KeyboardInterrupt:
        sys.exit(0)
