"""
Session benchmark over an event log.

Per user: segment into sessions, keep sessions of length 4-6, split
temporally 90/10. The self model's vocabulary and label alphabet come from
that user's training period only. Non-self sequences are the other users'
test sequences, featurized with the self model's vocabulary; their labels
mostly fall on the unknown label, which only matters for token accuracy
and that is measured on the self set.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from prefect import flow, task
from prefect.cache_policies import NO_CACHE
from prefect.task_runners import ThreadPoolTaskRunner
from prefect.utilities.annotations import quote

import neurocrf_cog.config as config
from neurocrf_cog._flow_support import (
    flow_logger,
    log_benchmark_summary,
    make_failure_hook,
    run_guarded,
)
from neurocrf_cog.core import (
    Architecture,
    ExperimentSkip,
    InsufficientDataError,
    InvalidArgumentError,
    derive_seed,
)
from neurocrf_cog.evaluation import evaluate_model
from neurocrf_cog.results import (
    BenchmarkSummary,
    ExperimentConfig,
    ExperimentResult,
    UnitOutcome,
    summarize_outcomes,
    write_benchmark_outputs,
)
from neurocrf_cog.sessions import (
    EventSequence,
    SessionEvent,
    build_ngram_vocab,
    events_by_user,
    load_event_log,
    save_split_manifest,
    save_vocab,
    segment_sessions,
    sequence_id,
    sequences_to_dataset,
    session_alphabet,
    sessions_to_sequences,
    temporal_split,
)
from neurocrf_cog.training import TrainConfig, train

FLOW_NAME = "benchmark-sessions"


@dataclass(frozen=True)
class SessionSettings:
    gap_seconds: int = config.SESSION_GAP_SECONDS
    min_len: int = config.MIN_SESSION_LEN
    max_len: int = config.MAX_SESSION_LEN
    train_fraction: float = config.SESSION_TRAIN_FRACTION
    ngram_cap: int = config.NGRAM_CAP
    min_user_sequences: int = config.MIN_USER_SEQUENCES
    timezone: str = config.TIMEZONE

    def __post_init__(self) -> None:
        if self.min_user_sequences < 2:
            raise InvalidArgumentError("min_user_sequences must be >= 2")


@dataclass(frozen=True)
class UserSplit:
    user: str
    train: tuple[EventSequence, ...]
    test: tuple[EventSequence, ...]


def prepare_user_split(
    user: str, events: list[SessionEvent], session_settings: SessionSettings
) -> UserSplit:
    sessions = segment_sessions(events, session_settings.gap_seconds)
    sequences = sessions_to_sequences(
        sessions, session_settings.min_len, session_settings.max_len
    )
    if len(sequences) < session_settings.min_user_sequences:
        raise InsufficientDataError(
            f"user {user} has {len(sequences)} usable sessions "
            f"(need {session_settings.min_user_sequences})"
        )
    train_seqs, test_seqs = temporal_split(sequences, session_settings.train_fraction)
    return UserSplit(user, tuple(train_seqs), tuple(test_seqs))


def prepare_user_splits(
    events: list[SessionEvent], session_settings: SessionSettings
) -> tuple[dict[str, UserSplit], list[str]]:
    """Splits for every usable user, plus the users skipped."""
    logger = flow_logger()
    splits: dict[str, UserSplit] = {}
    skipped: list[str] = []
    for user, user_events in events_by_user(events).items():
        try:
            splits[user] = prepare_user_split(user, user_events, session_settings)
        except InsufficientDataError as exc:
            logger.warning("⚠️ Skipping %s", exc)
            skipped.append(user)
    return splits, skipped


def run_user_experiment(
    splits: Mapping[str, UserSplit],
    user: str,
    architecture: Architecture,
    iteration: int,
    settings: ExperimentConfig,
    session_settings: SessionSettings,
) -> ExperimentResult:
    own = splits[user]
    others = [seq for other, split in splits.items() if other != user for seq in split.test]
    if not others:
        raise ExperimentSkip(f"no other users to test {user} against")

    vocab = build_ngram_vocab(
        (e for seq in own.train for e in seq), cap_per_label=session_settings.ngram_cap
    )
    alphabet = session_alphabet(own.train)
    tz = session_settings.timezone
    train_ds = sequences_to_dataset(own.train, vocab, alphabet, tz)
    self_test = sequences_to_dataset(own.test, vocab, alphabet, tz)
    nonself = sequences_to_dataset(others, vocab, alphabet, tz)

    seed = derive_seed(settings.base_seed, iteration, user)
    model, _ = train(train_ds, TrainConfig(architecture, settings.hyper), seed)
    report = evaluate_model(model, self_test, nonself)
    return ExperimentResult(user, architecture.value, iteration, seed, report)


def write_user_manifests(
    out_dir: str, splits: Mapping[str, UserSplit], session_settings: SessionSettings
) -> None:
    """Vocabulary and split manifest per user, for reproducing any row."""
    for user, split in splits.items():
        vocab = build_ngram_vocab(
            (e for seq in split.train for e in seq), cap_per_label=session_settings.ngram_cap
        )
        save_vocab(vocab, f"{out_dir}/manifests/{user}.vocab.json")
        save_split_manifest(
            {
                "train": [sequence_id(seq) for seq in split.train],
                "test": [sequence_id(seq) for seq in split.test],
            },
            f"{out_dir}/manifests/{user}.split.csv",
        )


@task(name="session-user-experiment", cache_policy=NO_CACHE)
def user_experiment_task(
    splits: Mapping[str, UserSplit],
    user: str,
    architecture: Architecture,
    iteration: int,
    settings: ExperimentConfig,
    session_settings: SessionSettings,
) -> UnitOutcome:
    return run_guarded(
        f"{user}/{architecture.value}/{iteration}",
        run_user_experiment,
        splits,
        user,
        architecture,
        iteration,
        settings,
        session_settings,
    )


@flow(
    name=FLOW_NAME,
    description="Train and evaluate one self model per user from an event log.",
    on_failure=[make_failure_hook(FLOW_NAME)],
    on_crashed=[make_failure_hook(FLOW_NAME)],
    validate_parameters=False,
)
def benchmark_sessions_flow(
    events_path: str,
    settings: ExperimentConfig | None = None,
    session_settings: SessionSettings | None = None,
) -> BenchmarkSummary:
    logger = flow_logger()
    settings = settings or ExperimentConfig()
    session_settings = session_settings or SessionSettings()
    splits, skipped_users = prepare_user_splits(load_event_log(events_path), session_settings)
    logger.info(
        "🚀 Session benchmark: %d users (%d skipped) × %d architectures × %d iterations",
        len(splits),
        len(skipped_users),
        len(settings.architectures),
        settings.iterations,
    )

    futures = [
        user_experiment_task.submit(
            quote(splits), user, architecture, iteration, quote(settings), quote(session_settings)
        )
        for user in splits
        for architecture in settings.architectures
        for iteration in range(settings.iterations)
    ]
    summary, results = summarize_outcomes(f.result() for f in futures)
    summary.skipped += len(skipped_users)
    summary.skipped_labels.extend(skipped_users)

    if results:
        summary.outputs = write_benchmark_outputs(
            settings.out_dir, results, write_scores=settings.write_scores
        )
        write_user_manifests(settings.out_dir, splits, session_settings)
    else:
        logger.warning("⚠️ No session experiments completed; nothing written")

    log_benchmark_summary(FLOW_NAME, summary)
    return summary


def run_benchmark_sessions(
    events_path: str,
    settings: ExperimentConfig | None = None,
    session_settings: SessionSettings | None = None,
) -> BenchmarkSummary:
    """Run the flow with a thread pool bounded by settings.workers."""
    settings = settings or ExperimentConfig()
    runner = ThreadPoolTaskRunner(max_workers=settings.workers)
    return benchmark_sessions_flow.with_options(task_runner=runner)(
        events_path, settings, session_settings
    )


if __name__ == "__main__":
    run_benchmark_sessions(config.EVENT_LOG_PATH)
