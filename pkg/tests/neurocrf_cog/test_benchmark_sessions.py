import json

import pandas as pd
import pytest
from prefect.testing.utilities import prefect_test_harness

import neurocrf_cog.benchmark_sessions as bench
from neurocrf_cog.core import (
    Architecture,
    ExperimentSkip,
    HyperParams,
    InsufficientDataError,
    InvalidArgumentError,
)
from neurocrf_cog.results import ExperimentConfig
from neurocrf_cog.sessions import SessionEvent, save_event_log
from neurocrf_cog.synthetic_events import EPOCH_START, generate_synthetic_event_log


def _lonely_user(n_sessions=3) -> list[SessionEvent]:
    return [
        SessionEvent("zz_lonely", EPOCH_START + d * 86_400 + i * 60, f"t{i}", "hello there")
        for d in range(n_sessions)
        for i in range(4)
    ]


def _events() -> list[SessionEvent]:
    events = generate_synthetic_event_log(
        3, seed=0, sessions_per_user=20, short_session_share=0.0
    )
    return events + _lonely_user()


def _settings(tmp_path, **overrides) -> ExperimentConfig:
    kwargs = {
        "architectures": (Architecture.CRF_MLP,),
        "iterations": 1,
        "hyper": HyperParams(max_sgd_examples=30),
        "workers": 2,
        "out_dir": str(tmp_path / "out"),
    }
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def test_session_settings_validation() -> None:
    with pytest.raises(InvalidArgumentError):
        bench.SessionSettings(min_user_sequences=1)


def test_prepare_user_splits_skips_sparse_users() -> None:
    splits, skipped = bench.prepare_user_splits(_events(), bench.SessionSettings())
    assert list(splits) == ["user00", "user01", "user02"]
    assert skipped == ["zz_lonely"]
    split = splits["user00"]
    assert (len(split.train), len(split.test)) == (18, 2)
    assert max(s[0].timestamp for s in split.train) < min(s[0].timestamp for s in split.test)


def test_prepare_user_split_raises_for_too_few_sessions() -> None:
    with pytest.raises(InsufficientDataError, match="3 usable sessions"):
        bench.prepare_user_split("zz_lonely", _lonely_user(), bench.SessionSettings())


def test_user_experiment_tests_against_other_users(tmp_path) -> None:
    splits, _ = bench.prepare_user_splits(_events(), bench.SessionSettings())
    result = bench.run_user_experiment(
        splits, "user01", Architecture.CRF_MLP, 0, _settings(tmp_path), bench.SessionSettings()
    )
    assert result.model_id == "user01"
    assert len(result.report.self_scores) == 2
    assert len(result.report.nonself_scores) == 4


def test_user_experiment_without_other_users_is_skipped(tmp_path) -> None:
    splits, _ = bench.prepare_user_splits(_events(), bench.SessionSettings())
    only = {"user00": splits["user00"]}
    with pytest.raises(ExperimentSkip):
        bench.run_user_experiment(
            only, "user00", Architecture.CRF_MLP, 0, _settings(tmp_path), bench.SessionSettings()
        )


def test_user_manifests_describe_training_period(tmp_path) -> None:
    splits, _ = bench.prepare_user_splits(_events(), bench.SessionSettings())
    bench.write_user_manifests(str(tmp_path), splits, bench.SessionSettings())

    vocab = json.loads((tmp_path / "manifests" / "user02.vocab.json").read_text())
    assert set(vocab["per_label"]) == {"user02_topic0", "user02_topic1", "user02_topic2"}
    split = pd.read_csv(tmp_path / "manifests" / "user02.split.csv")
    assert split.split.value_counts().to_dict() == {"train": 18, "test": 2}
    assert all(item.startswith("user02:") for item in split["item"])


def test_session_flow_counts_skipped_user(tmp_path) -> None:
    path = save_event_log(_events(), tmp_path / "events.csv")
    settings = _settings(tmp_path)
    with prefect_test_harness():
        summary = bench.run_benchmark_sessions(str(path), settings)

    assert summary.attempted == 3
    assert summary.completed == 3
    assert summary.failed == 0
    assert summary.skipped == 1
    assert summary.skipped_labels == ["zz_lonely"]

    frame = pd.read_csv(summary.outputs["results"])
    assert frame.model_id.tolist() == ["user00", "user01", "user02"]
    assert (tmp_path / "out" / "manifests" / "user00.split.csv").exists()


def test_synthetic_splits_hold_fixed_length_sequences() -> None:
    splits, skipped = bench.prepare_user_splits(
        generate_synthetic_event_log(5, seed=0), bench.SessionSettings()
    )
    assert skipped == []
    assert len(splits) == 5
    assert {len(seq) for split in splits.values() for seq in (*split.train, *split.test)} == {6}


def test_synthetic_corpus_ranks_mlp_above_perceptron(tmp_path) -> None:
    session_settings = bench.SessionSettings()
    splits, _ = bench.prepare_user_splits(generate_synthetic_event_log(5, seed=0), session_settings)
    settings = _settings(
        tmp_path,
        architectures=(Architecture.CRF_MLP, Architecture.CRF_PRCPT),
        hyper=HyperParams(),
    )
    mean_accuracy = {}
    for architecture in settings.architectures:
        accuracies = [
            bench.run_user_experiment(
                splits, user, architecture, 0, settings, session_settings
            ).report.accuracy
            for user in splits
        ]
        mean_accuracy[architecture] = sum(accuracies) / len(accuracies)

    assert mean_accuracy[Architecture.CRF_MLP] > 90.0
    assert mean_accuracy[Architecture.CRF_PRCPT] <= mean_accuracy[Architecture.CRF_MLP] - 15.0
