"""
Error-driven SGD training for one self model.

Each presented sequence is decoded with Viterbi under the current weights;
updates happen only at positions where the decoded label differs from the
gold label. Training stops after max_sgd_examples sequence presentations
or at the first convergence check that finds zero training label errors.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt
from mini_app_polis import logger as logger_mod

from neurocrf_cog.core import (
    Architecture,
    Dataset,
    HyperParams,
    InvalidArgumentError,
    LabeledSequence,
    ModelDescriptor,
    one_hot,
)
from neurocrf_cog.decoder import viterbi
from neurocrf_cog.neural import (
    CrfMlpNets,
    ElmanNet,
    NeuroCrfModel,
    PerceptronNet,
    elman_forward,
    elman_update,
    init_model,
    mlp_update,
    perceptron_accumulate_and_apply,
    perceptron_input,
)

log = logger_mod.get_logger()

Vector = npt.NDArray[np.float64]
PerceptronError = tuple[Vector, Vector, Vector]
TraceCallback = Callable[[dict[str, Any]], None]


@dataclass(frozen=True)
class TrainConfig:
    architecture: Architecture
    hyper: HyperParams = field(default_factory=HyperParams)
    # None means one full cycle through the training set
    convergence_check_period: int | None = None

    def __post_init__(self) -> None:
        if self.convergence_check_period is not None and self.convergence_check_period < 1:
            raise InvalidArgumentError("convergence_check_period must be >= 1")


@dataclass
class TrainReport:
    sequences_consumed: int = 0
    converged: bool = False
    final_train_token_error: float = 0.0
    error_positions: int = 0
    batches_applied: int = 0


@dataclass(frozen=True)
class SequenceScore:
    score: float
    probability: float
    labels: tuple[int, ...]


def _target(label: int, n_labels: int) -> Vector:
    return one_hot(label, n_labels)[:-1]


def _mismatches(decoded: tuple[int, ...], gold: tuple[int, ...]) -> list[int]:
    return [t for t, (a, b) in enumerate(zip(decoded, gold, strict=True)) if a != b]


def _elman_contexts(net: ElmanNet, observations: npt.NDArray[np.float64]) -> list[Vector]:
    """Context fed into each step, from a forward pass over the observations."""
    contexts = []
    context = net.initial_context()
    for x_t in observations:
        contexts.append(context)
        _, context = elman_forward(net, x_t, context)
    return contexts


def _update_mlp(
    model: NeuroCrfModel, seq: LabeledSequence, positions: list[int], hyper: HyperParams
) -> None:
    nets = model.nets
    assert isinstance(nets, CrfMlpNets)
    n_labels = model.num_labels
    start = model.alphabet.start_index
    for t in positions:
        target = _target(seq.labels[t], n_labels)
        mlp_update(nets.obs, seq.observations[t], target, hyper.learning_rate, hyper.regularization)
        # edge pairs use the gold previous label
        prev = seq.labels[t - 1] if t > 0 else start
        mlp_update(
            nets.edge,
            one_hot(prev, n_labels),
            target,
            hyper.learning_rate,
            hyper.regularization,
        )


def _update_rnn(
    model: NeuroCrfModel, seq: LabeledSequence, positions: list[int], hyper: HyperParams
) -> None:
    net = model.nets
    assert isinstance(net, ElmanNet)
    contexts = _elman_contexts(net, seq.observations)
    for t in positions:
        elman_update(
            net,
            seq.observations[t],
            contexts[t],
            _target(seq.labels[t], model.num_labels),
            hyper.learning_rate,
            hyper.regularization,
        )


def _collect_perceptron_errors(
    model: NeuroCrfModel,
    seq: LabeledSequence,
    decoded: tuple[int, ...],
    positions: list[int],
) -> list[PerceptronError]:
    net = model.nets
    assert isinstance(net, PerceptronNet)
    n_labels = model.num_labels
    start = model.alphabet.start_index
    out = []
    for t in positions:
        prev = decoded[t - 1] if t > 0 else start
        out.append(
            (
                perceptron_input(net, seq.observations[t], prev),
                _target(decoded[t], n_labels),
                _target(seq.labels[t], n_labels),
            )
        )
    return out


def count_label_errors(model: NeuroCrfModel, dataset: Dataset) -> tuple[int, int]:
    """(wrong positions, total positions) under the current weights."""
    wrong = total = 0
    for seq in dataset.sequences:
        decoded = viterbi(model, seq.observations).labels
        wrong += len(_mismatches(decoded, seq.labels))
        total += len(seq)
    return wrong, total


def train(
    dataset: Dataset,
    config: TrainConfig,
    seed: int | None = None,
    *,
    on_trace: TraceCallback | None = None,
    error_log: list[list[PerceptronError]] | None = None,
) -> tuple[NeuroCrfModel, TrainReport]:
    """
    Train one model on ``dataset``.

    on_trace receives one record per convergence check. error_log, when
    given, collects every perceptron minibatch exactly as it was applied.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("Cannot train on an empty dataset")
    hyper = config.hyper
    seed = hyper.rng_seed if seed is None else seed
    descriptor = ModelDescriptor.for_dataset(config.architecture, dataset, hyper)
    model = init_model(descriptor, dataset.alphabet, seed)
    rng = np.random.default_rng((seed, 1))
    period = config.convergence_check_period or len(dataset)
    report = TrainReport()
    pending: list[PerceptronError] = []

    def _check() -> bool:
        wrong, total = count_label_errors(model, dataset)
        report.final_train_token_error = wrong / total
        record = {
            "sequences": report.sequences_consumed,
            "token_errors": wrong,
            "token_error_rate": report.final_train_token_error,
            "converged": wrong == 0,
        }
        log.debug("Training check %s", record)
        if on_trace is not None:
            on_trace(record)
        return wrong == 0

    log.info(
        "🚀 Training %s on %d sequences (max %d presentations, seed %d)",
        config.architecture.value,
        len(dataset),
        hyper.max_sgd_examples,
        seed,
    )
    report.converged = _check()
    checked_at = 0

    while not report.converged and report.sequences_consumed < hyper.max_sgd_examples:
        for idx in rng.permutation(len(dataset)):
            if report.sequences_consumed >= hyper.max_sgd_examples:
                break
            seq = dataset.sequences[int(idx)]
            decoded = viterbi(model, seq.observations).labels
            positions = _mismatches(decoded, seq.labels)
            report.error_positions += len(positions)

            if positions:
                match config.architecture:
                    case Architecture.CRF_MLP:
                        _update_mlp(model, seq, positions, hyper)
                    case Architecture.CRF_RNN:
                        _update_rnn(model, seq, positions, hyper)
                    case Architecture.CRF_PRCPT:
                        # the minibatch window spans sequence boundaries
                        for entry in _collect_perceptron_errors(model, seq, decoded, positions):
                            pending.append(entry)
                            if len(pending) == hyper.minibatch:
                                assert isinstance(model.nets, PerceptronNet)
                                perceptron_accumulate_and_apply(
                                    model.nets, pending, hyper.learning_rate
                                )
                                if error_log is not None:
                                    error_log.append(list(pending))
                                report.batches_applied += 1
                                pending = []

            report.sequences_consumed += 1
            if report.sequences_consumed % period == 0:
                checked_at = report.sequences_consumed
                if _check():
                    report.converged = True
                    break

    if not report.converged and checked_at != report.sequences_consumed:
        _check()
    if pending:
        log.debug("Discarding %d pending perceptron errors (partial batch)", len(pending))

    log.info(
        "✅ Trained %s: consumed=%d converged=%s train_token_error=%.4f",
        config.architecture.value,
        report.sequences_consumed,
        report.converged,
        report.final_train_token_error,
    )
    return model, report


def score_sequence(model: NeuroCrfModel, observations: npt.ArrayLike) -> SequenceScore:
    """Raw (pre-softmax) Viterbi score used for calibration, plus labels."""
    result = viterbi(model, observations)
    return SequenceScore(score=result.score, probability=result.probability, labels=result.labels)
