import numpy as np
import pytest

import neurocrf_cog.evaluation as evaluation
from neurocrf_cog.core import (
    Architecture,
    Dataset,
    DegenerateFitError,
    HyperParams,
    InvalidArgumentError,
    LabelAlphabet,
    LabeledSequence,
    ModelDataMismatchError,
    ModelDescriptor,
)
from neurocrf_cog.neural import init_model


def test_symmetric_separation_puts_threshold_in_the_middle() -> None:
    cal = evaluation.fit_calibration([2.0, 3.0], [0.0, 1.0])
    assert cal.threshold == pytest.approx(1.5)
    assert cal.slope > 0
    assert cal.r_square == pytest.approx(0.8)
    assert evaluation.frr_far([2.0, 3.0], [0.0, 1.0], cal) == (0.0, 0.0)


def test_score_exactly_at_threshold_is_accepted() -> None:
    rising = evaluation.CalibrationModel(slope=1.0, intercept=-1.0, threshold=1.5, r_square=0.5)
    falling = evaluation.CalibrationModel(slope=-1.0, intercept=2.0, threshold=1.5, r_square=0.5)
    assert rising.accepts(1.5)
    assert not rising.accepts(1.4)
    assert falling.accepts(1.5)
    assert not falling.accepts(1.6)


def test_accept_mask_matches_scalar_rule_in_both_orientations() -> None:
    scores = np.array([1.0, 1.5, 2.0])
    rising = evaluation.CalibrationModel(slope=1.0, intercept=-1.0, threshold=1.5, r_square=0.5)
    falling = evaluation.CalibrationModel(slope=-1.0, intercept=2.0, threshold=1.5, r_square=0.5)
    assert rising.accept_mask(scores).tolist() == [False, True, True]
    assert falling.accept_mask(scores).tolist() == [True, True, False]
    assert evaluation.frr_far([1.0, 1.5], [2.0, 1.5], falling) == (0.0, 50.0)


def test_identically_distributed_scores_give_chance_rates() -> None:
    rng = np.random.default_rng(11)
    pos = rng.normal(5.0, 2.0, size=2000)
    neg = rng.normal(5.0, 2.0, size=2000)
    report = evaluation.metrics_from_scores(pos, neg, 100.0)
    assert report.r_square < 0.1
    assert 90.0 <= report.frr + report.far <= 110.0


def test_well_separated_scores_fit_closely() -> None:
    rng = np.random.default_rng(12)
    pos = rng.normal(10.0, 0.1, size=50)
    neg = rng.normal(0.0, 0.1, size=200)
    report = evaluation.metrics_from_scores(pos, neg, 100.0)
    assert report.r_square >= 0.9
    assert (report.frr, report.far) == (0.0, 0.0)


def test_scores_without_within_class_spread_fit_exactly() -> None:
    cal = evaluation.fit_calibration([3.0] * 4, [1.0] * 16)
    assert cal.r_square == pytest.approx(1.0)
    assert 1.0 < cal.threshold < 3.0


def test_rates_are_invariant_to_affine_score_changes() -> None:
    rng = np.random.default_rng(0)
    pos = rng.normal(1.0, 1.0, size=40)
    neg = rng.normal(-0.5, 1.0, size=60)
    base = evaluation.frr_far(pos, neg, evaluation.fit_calibration(pos, neg))
    for scale, shift in [(3.0, 7.0), (0.01, -2.0), (250.0, 0.0)]:
        p, n = scale * pos + shift, scale * neg + shift
        assert evaluation.frr_far(p, n, evaluation.fit_calibration(p, n)) == pytest.approx(base)


def test_reversed_scores_still_separate() -> None:
    # self scores lower than non-self ones give a negative slope
    cal = evaluation.fit_calibration([0.0, 1.0], [2.0, 3.0])
    assert cal.slope < 0
    assert evaluation.frr_far([0.0, 1.0], [2.0, 3.0], cal) == (0.0, 0.0)


def test_accuracy_and_eer_match_published_rows() -> None:
    assert evaluation.accuracy_from_rates(11.81, 12.37) == pytest.approx(87.91, abs=0.01)
    assert evaluation.accuracy_from_rates(3.61, 3.83) == pytest.approx(96.28, abs=0.01)
    assert evaluation.eer(11.81, 12.37) == pytest.approx(12.09)
    assert evaluation.accuracy_from_rates(0.0, 0.0) == 100.0
    with pytest.raises(InvalidArgumentError):
        evaluation.accuracy_from_rates(101.0, 0.0)


def test_f_score_is_harmonic_mean_of_fractions() -> None:
    assert evaluation.f_score(87.90, 93.03) == pytest.approx(0.90, abs=0.01)
    assert evaluation.f_score(96.27, 46.89) == pytest.approx(0.63, abs=0.02)
    assert evaluation.f_score(100.0, 100.0) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        evaluation.f_score(0.0, 0.0)


def test_identical_scores_are_degenerate() -> None:
    with pytest.raises(DegenerateFitError):
        evaluation.fit_calibration([1.0, 1.0], [1.0])

    report = evaluation.metrics_from_scores([1.0, 1.0], [1.0, 1.0], 80.0)
    assert report.degenerate
    assert report.calibration is None
    assert (report.frr, report.far, report.r_square) == (0.0, 100.0, 0.0)
    assert report.accuracy == 50.0
    assert report.eer == 50.0


def test_calibration_rejects_empty_or_nan_scores() -> None:
    with pytest.raises(InvalidArgumentError):
        evaluation.fit_calibration([], [1.0])
    with pytest.raises(InvalidArgumentError):
        evaluation.fit_calibration([1.0, float("nan")], [0.0])


def test_token_accuracy_counts_positions() -> None:
    assert evaluation.token_accuracy([(0, 1, 1), (2,)], [(0, 1, 0), (2,)]) == 75.0
    with pytest.raises(InvalidArgumentError):
        evaluation.token_accuracy([(0, 1)], [(0,)])
    with pytest.raises(InvalidArgumentError):
        evaluation.token_accuracy([], [])


def test_metrics_from_scores_fills_every_field() -> None:
    report = evaluation.metrics_from_scores([2.0, 3.0], [0.0, 1.0], 90.0)
    assert not report.degenerate
    assert report.accuracy == 100.0
    assert report.f_score == pytest.approx(2 * 1.0 * 0.9 / 1.9)
    assert report.self_scores == (2.0, 3.0)
    assert set(report.as_dict()) == {
        "frr", "far", "accuracy", "r_square", "token_accuracy", "f_score", "eer", "degenerate",
    }


def test_metrics_row_uses_column_order() -> None:
    report = evaluation.metrics_from_scores([2.0, 3.0], [0.0, 1.0], 90.0)
    row = evaluation.metrics_row("cat", Architecture.CRF_MLP, report)
    assert row == "cat,crf-mlp,0.0000,0.0000,100.0000,0.800000,90.0000,0.947368"


def _dataset(d, n_seqs=3, seed=0):
    rng = np.random.default_rng(seed)
    seqs = tuple(
        LabeledSequence(rng.integers(0, 2, size=(3, d)), tuple(int(y) for y in rng.integers(0, 2, 3)))
        for _ in range(n_seqs)
    )
    return Dataset(LabelAlphabet(("a", "b")), seqs, d)


def test_evaluate_model_scores_both_sets() -> None:
    desc = ModelDescriptor(Architecture.CRF_PRCPT, 4, 2, hyperparameters=HyperParams(init_stddev=0.5))
    model = init_model(desc, LabelAlphabet(("a", "b")), 0)
    report = evaluation.evaluate_model(model, _dataset(4, seed=1), _dataset(4, seed=2))
    assert len(report.self_scores) == 3
    assert len(report.nonself_scores) == 3
    assert 0.0 <= report.token_accuracy <= 100.0
    assert 0.0 <= report.accuracy <= 100.0


def test_evaluate_model_rejects_dimension_mismatch() -> None:
    desc = ModelDescriptor(Architecture.CRF_PRCPT, 4, 2)
    model = init_model(desc, LabelAlphabet(("a", "b")), 0)
    with pytest.raises(ModelDataMismatchError):
        evaluation.evaluate_model(model, _dataset(4), _dataset(5))
