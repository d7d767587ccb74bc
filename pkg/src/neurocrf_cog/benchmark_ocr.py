"""
OCR word benchmark.

One self model is built per word and tested against other words of the
same length: each word's instances are shuffled into 2/3 training and 1/3
self test, and up to 100 instances of same-length words form the non-self
test set. Every (word, architecture, iteration) unit is a Prefect task;
all architectures of one (word, iteration) share the same partition and
initial seed so their rows pair up for significance testing.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

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
from neurocrf_cog.core import Architecture, Dataset, LabeledSequence, derive_seed
from neurocrf_cog.evaluation import evaluate_model
from neurocrf_cog.ocr_dataset import (
    load_ocr,
    partition_word_experiment,
    same_length_peers,
    words_by_instance,
)
from neurocrf_cog.results import (
    BenchmarkSummary,
    ExperimentConfig,
    ExperimentResult,
    UnitOutcome,
    summarize_outcomes,
    write_benchmark_outputs,
)
from neurocrf_cog.training import TrainConfig, train

FLOW_NAME = "benchmark-ocr"


def run_word_experiment(
    dataset: Dataset,
    words: Mapping[str, Sequence[LabeledSequence]],
    word: str,
    architecture: Architecture,
    iteration: int,
    settings: ExperimentConfig,
    *,
    train_ratio: float = config.OCR_TRAIN_RATIO,
    nonself_count: int = config.NONSELF_COUNT,
) -> ExperimentResult:
    seed = derive_seed(settings.base_seed, iteration, word)
    part = partition_word_experiment(
        words[word], same_length_peers(words, word), train_ratio, nonself_count, seed
    )
    model, _ = train(
        dataset.subset(part.train), TrainConfig(architecture, settings.hyper), seed
    )
    report = evaluate_model(
        model, dataset.subset(part.self_test), dataset.subset(part.nonself)
    )
    return ExperimentResult(word, architecture.value, iteration, seed, report)


@task(name="ocr-word-experiment", cache_policy=NO_CACHE)
def word_experiment_task(
    dataset: Dataset,
    words: Mapping[str, Sequence[LabeledSequence]],
    word: str,
    architecture: Architecture,
    iteration: int,
    settings: ExperimentConfig,
) -> UnitOutcome:
    return run_guarded(
        f"{word}/{architecture.value}/{iteration}",
        run_word_experiment,
        dataset,
        words,
        word,
        architecture,
        iteration,
        settings,
    )


@flow(
    name=FLOW_NAME,
    description="Train and evaluate one self model per OCR word for each architecture.",
    on_failure=[make_failure_hook(FLOW_NAME)],
    on_crashed=[make_failure_hook(FLOW_NAME)],
    validate_parameters=False,
)
def benchmark_ocr_flow(
    data_path: str,
    settings: ExperimentConfig | None = None,
    word_lengths: list[int] | None = None,
) -> BenchmarkSummary:
    """
    Run the whole OCR benchmark and write the result tables to
    settings.out_dir. word_lengths restricts the run to words of those
    lengths (the smoke variant uses [3]).
    """
    logger = flow_logger()
    settings = settings or ExperimentConfig()
    dataset = load_ocr(data_path)
    words = words_by_instance(dataset)
    if word_lengths:
        words = {w: seqs for w, seqs in words.items() if len(w) in set(word_lengths)}
    logger.info(
        "🚀 OCR benchmark: %d words × %d architectures × %d iterations",
        len(words),
        len(settings.architectures),
        settings.iterations,
    )

    futures = [
        word_experiment_task.submit(
            quote(dataset), quote(words), word, architecture, iteration, quote(settings)
        )
        for word in words
        for architecture in settings.architectures
        for iteration in range(settings.iterations)
    ]
    summary, results = summarize_outcomes(f.result() for f in futures)

    if results:
        summary.outputs = write_benchmark_outputs(
            settings.out_dir, results, write_scores=settings.write_scores
        )
    else:
        logger.warning("⚠️ No OCR experiments completed; nothing written")

    log_benchmark_summary(FLOW_NAME, summary)
    return summary


def run_benchmark_ocr(
    data_path: str,
    settings: ExperimentConfig | None = None,
    word_lengths: list[int] | None = None,
) -> BenchmarkSummary:
    """Run the flow with a thread pool bounded by settings.workers."""
    settings = settings or ExperimentConfig()
    runner = ThreadPoolTaskRunner(max_workers=settings.workers)
    return benchmark_ocr_flow.with_options(task_runner=runner)(
        data_path, settings, word_lengths
    )


if __name__ == "__main__":
    run_benchmark_ocr(config.OCR_DATA_PATH)
