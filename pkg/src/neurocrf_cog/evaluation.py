"""
Score calibration and the verification metrics.

A self model is judged by how well its raw Viterbi scores separate its own
test sequences from other classes' sequences. The decision threshold is the
score where an ordinary least-squares line of class (self = 1,
non-self = 0) on score crosses 0.5. Calibration is fit on the same scores
it is evaluated on.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from mini_app_polis import logger as logger_mod
from scipy import stats

import neurocrf_cog.config as config
from neurocrf_cog.core import (
    Architecture,
    Dataset,
    DegenerateFitError,
    InvalidArgumentError,
    ModelDataMismatchError,
)
from neurocrf_cog.neural import NeuroCrfModel
from neurocrf_cog.training import score_sequence

log = logger_mod.get_logger()


@dataclass(frozen=True)
class CalibrationModel:
    slope: float
    intercept: float
    threshold: float
    r_square: float

    def accept_mask(self, scores: np.ndarray) -> np.ndarray:
        # ties at the threshold are accepted
        if self.slope > 0:
            return scores >= self.threshold
        return scores <= self.threshold

    def accepts(self, score: float) -> bool:
        return bool(self.accept_mask(np.float64(score)))


@dataclass(frozen=True)
class MetricsReport:
    frr: float
    far: float
    accuracy: float
    r_square: float
    token_accuracy: float
    f_score: float
    eer: float
    degenerate: bool = False
    calibration: CalibrationModel | None = field(default=None, repr=False)
    self_scores: tuple[float, ...] = field(default=(), repr=False, compare=False)
    nonself_scores: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def as_dict(self) -> dict[str, float | bool]:
        return {
            "frr": self.frr,
            "far": self.far,
            "accuracy": self.accuracy,
            "r_square": self.r_square,
            "token_accuracy": self.token_accuracy,
            "f_score": self.f_score,
            "eer": self.eer,
            "degenerate": self.degenerate,
        }


def _as_scores(values: Sequence[float], what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(f"{what} must be a non-empty list of scores")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{what} contains non-finite scores")
    return arr


def fit_calibration(
    self_scores: Sequence[float], nonself_scores: Sequence[float]
) -> CalibrationModel:
    pos = _as_scores(self_scores, "self_scores")
    neg = _as_scores(nonself_scores, "nonself_scores")
    x = np.concatenate([pos, neg])
    y = np.concatenate([np.ones_like(pos), np.zeros_like(neg)])
    if np.ptp(x) == 0:
        raise DegenerateFitError("All scores are identical; no threshold exists")
    fit = stats.linregress(x, y)
    if fit.slope == 0 or not np.isfinite(fit.slope):
        raise DegenerateFitError("Calibration line is flat; no threshold exists")
    threshold = (0.5 - fit.intercept) / fit.slope
    return CalibrationModel(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        threshold=float(threshold),
        r_square=float(fit.rvalue**2),
    )


def frr_far(
    self_scores: Sequence[float],
    nonself_scores: Sequence[float],
    calibration: CalibrationModel,
) -> tuple[float, float]:
    if calibration.slope == 0:
        raise InvalidArgumentError("calibration slope must be non-zero")
    pos = _as_scores(self_scores, "self_scores")
    neg = _as_scores(nonself_scores, "nonself_scores")
    frr = 100.0 * float(np.mean(~calibration.accept_mask(pos)))
    far = 100.0 * float(np.mean(calibration.accept_mask(neg)))
    return frr, far


def _check_rate(value: float, name: str) -> None:
    if not 0.0 <= value <= 100.0:
        raise InvalidArgumentError(f"{name} must be within [0, 100], got {value}")


def accuracy_from_rates(frr: float, far: float) -> float:
    _check_rate(frr, "frr")
    _check_rate(far, "far")
    return 100.0 - (frr + far) / 2.0


def eer(frr: float, far: float) -> float:
    """Equal error rate estimate at the fitted threshold."""
    _check_rate(frr, "frr")
    _check_rate(far, "far")
    return (frr + far) / 2.0


def token_accuracy(
    decoded_sequences: Sequence[Sequence[int]], gold_sequences: Sequence[Sequence[int]]
) -> float:
    if len(decoded_sequences) != len(gold_sequences):
        raise InvalidArgumentError("decoded and gold sequence counts differ")
    correct = total = 0
    for decoded, gold in zip(decoded_sequences, gold_sequences, strict=True):
        if len(decoded) != len(gold):
            raise InvalidArgumentError("decoded and gold sequences differ in length")
        correct += sum(1 for a, b in zip(decoded, gold, strict=True) if a == b)
        total += len(gold)
    if total == 0:
        raise InvalidArgumentError("token accuracy is undefined for no positions")
    return 100.0 * correct / total


def f_score(accuracy: float, token_acc: float) -> float:
    """Harmonic mean of sequence and token accuracy, as a fraction."""
    _check_rate(accuracy, "accuracy")
    _check_rate(token_acc, "token_accuracy")
    a, b = accuracy / 100.0, token_acc / 100.0
    if a + b == 0:
        raise InvalidArgumentError("f_score is undefined when both rates are zero")
    return 2.0 * a * b / (a + b)


def metrics_from_scores(
    self_scores: Sequence[float],
    nonself_scores: Sequence[float],
    token_acc: float,
) -> MetricsReport:
    """Calibrate on the scores and derive every metric from them."""
    try:
        calibration: CalibrationModel | None = fit_calibration(self_scores, nonself_scores)
    except DegenerateFitError as exc:
        log.warning("⚠️ Degenerate calibration, accepting everything: %s", exc)
        calibration = None

    if calibration is None:
        frr, far, r_square = 0.0, 100.0, 0.0
    else:
        frr, far = frr_far(self_scores, nonself_scores, calibration)
        r_square = calibration.r_square

    accuracy = accuracy_from_rates(frr, far)
    return MetricsReport(
        frr=frr,
        far=far,
        accuracy=accuracy,
        r_square=r_square,
        token_accuracy=token_acc,
        f_score=f_score(accuracy, token_acc),
        eer=eer(frr, far),
        degenerate=calibration is None,
        calibration=calibration,
        self_scores=tuple(float(s) for s in self_scores),
        nonself_scores=tuple(float(s) for s in nonself_scores),
    )


def evaluate_model(
    model: NeuroCrfModel, self_test: Dataset, nonself_test: Dataset
) -> MetricsReport:
    if len(self_test) == 0 or len(nonself_test) == 0:
        raise InvalidArgumentError("evaluate_model needs non-empty self and non-self sets")
    for name, ds in (("self_test", self_test), ("nonself_test", nonself_test)):
        if ds.feature_dim != model.feature_dim:
            raise ModelDataMismatchError(
                f"{name} has dimension {ds.feature_dim}, model expects {model.feature_dim}"
            )

    self_results = [score_sequence(model, seq.observations) for seq in self_test.sequences]
    nonself_scores = [score_sequence(model, seq.observations).score for seq in nonself_test.sequences]
    token_acc = token_accuracy(
        [r.labels for r in self_results], [seq.labels for seq in self_test.sequences]
    )
    report = metrics_from_scores([r.score for r in self_results], nonself_scores, token_acc)
    log.debug(
        "Evaluated %s: frr=%.2f far=%.2f acc=%.2f r2=%.3f tok=%.2f",
        model.architecture.value,
        report.frr,
        report.far,
        report.accuracy,
        report.r_square,
        report.token_accuracy,
    )
    return report


def metrics_row(model_id: str, architecture: Architecture | str, report: MetricsReport) -> str:
    """One results-table line in the canonical column order."""
    arch = architecture.value if isinstance(architecture, Architecture) else architecture
    values = {
        "model_id": model_id,
        "architecture": arch,
        "frr": f"{report.frr:.4f}",
        "far": f"{report.far:.4f}",
        "accuracy": f"{report.accuracy:.4f}",
        "r_square": f"{report.r_square:.6f}",
        "token_accuracy": f"{report.token_accuracy:.4f}",
        "f_score": f"{report.f_score:.6f}",
    }
    return ",".join(values[col] for col in config.RESULTS_COLUMNS)
