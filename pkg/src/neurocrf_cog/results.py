"""
Benchmark result tables.

Rows are one (model, architecture, iteration) experiment each. Aggregates
average per model first and then take mean ± standard deviation across
models, so every model counts once whatever its iteration count.
Significance is a paired two-sided t-test over per-model averages for
each pair of architectures.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from mini_app_polis import logger as logger_mod
from scipy import stats

import neurocrf_cog.config as config
from neurocrf_cog.core import Architecture, HyperParams, InvalidArgumentError, ParseError
from neurocrf_cog.evaluation import MetricsReport

log = logger_mod.get_logger()

METRICS = ["frr", "far", "accuracy", "r_square", "token_accuracy", "f_score", "eer"]
KEY_COLUMNS = ["model_id", "architecture", "iteration"]
RESULT_COLUMNS = [*KEY_COLUMNS, "seed", *METRICS, "degenerate"]
SIGNIFICANCE_METRICS = ["accuracy", "token_accuracy"]


@dataclass(frozen=True)
class ExperimentConfig:
    architectures: tuple[Architecture, ...] = tuple(Architecture)
    iterations: int = config.ITERATIONS
    base_seed: int = config.RNG_SEED
    hyper: HyperParams = field(default_factory=HyperParams)
    workers: int = config.WORKERS
    out_dir: str = config.OUTPUT_DIR
    write_scores: bool = True

    def __post_init__(self) -> None:
        if not self.architectures:
            raise InvalidArgumentError("At least one architecture is required")
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentResult:
    model_id: str
    architecture: str
    iteration: int
    seed: int
    report: MetricsReport


@dataclass(frozen=True)
class UnitOutcome:
    label: str
    status: str  # "ok", "skipped" or "failed"
    result: ExperimentResult | None = None
    reason: str = ""


@dataclass
class BenchmarkSummary:
    """Counters for one benchmark run."""

    attempted: int = 0
    completed: int = 0
    skipped: int = 0
    failed: int = 0
    skipped_labels: list[str] = field(default_factory=list)
    failed_labels: list[str] = field(default_factory=list)
    outputs: dict[str, Path] = field(default_factory=dict)


def summarize_outcomes(
    outcomes: Iterable[UnitOutcome],
) -> tuple[BenchmarkSummary, list[ExperimentResult]]:
    summary = BenchmarkSummary()
    results = []
    for outcome in outcomes:
        summary.attempted += 1
        if outcome.status == "ok" and outcome.result is not None:
            summary.completed += 1
            results.append(outcome.result)
        elif outcome.status == "skipped":
            summary.skipped += 1
            summary.skipped_labels.append(outcome.label)
        else:
            summary.failed += 1
            summary.failed_labels.append(outcome.label)
    return summary, results


def results_frame(results: Iterable[ExperimentResult]) -> pd.DataFrame:
    """Canonically sorted rows, independent of completion order."""
    rows = [
        {
            "model_id": r.model_id,
            "architecture": r.architecture,
            "iteration": r.iteration,
            "seed": r.seed,
            **r.report.as_dict(),
        }
        for r in results
    ]
    frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    return frame.sort_values(["architecture", "model_id", "iteration"], kind="stable").reset_index(
        drop=True
    )


def load_results(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"model_id": str, "architecture": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(str(exc), path=str(path)) from None
    needed = ["model_id", "architecture", *[c for c in config.RESULTS_COLUMNS if c in METRICS]]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", path=str(path), line=1)
    return frame


def per_model_frame(frame: pd.DataFrame) -> pd.DataFrame:
    metrics = [m for m in METRICS if m in frame.columns]
    return (
        frame.groupby(["architecture", "model_id"], sort=True)[metrics]
        .mean()
        .reset_index()
    )


def aggregate_frame(per_model: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample std per architecture over per-model averages."""
    metrics = [m for m in METRICS if m in per_model.columns]
    grouped = per_model.groupby("architecture", sort=True)
    out = grouped.size().rename("n_models").to_frame()
    for metric in metrics:
        out[f"{metric}_mean"] = grouped[metric].mean()
        # a single model has no spread
        out[f"{metric}_std"] = grouped[metric].std(ddof=1).fillna(0.0)
    return out.reset_index()


def significance_frame(
    per_model: pd.DataFrame, metrics: Sequence[str] = SIGNIFICANCE_METRICS
) -> pd.DataFrame:
    rows = []
    architectures = sorted(per_model["architecture"].unique())
    for metric in metrics:
        wide = per_model.pivot(index="model_id", columns="architecture", values=metric)
        for arch_a, arch_b in itertools.combinations(architectures, 2):
            paired = wide[[arch_a, arch_b]].dropna()
            n = len(paired)
            statistic = p_value = float("nan")
            if n >= 2 and not np.allclose(paired[arch_a].to_numpy(), paired[arch_b].to_numpy()):
                test = stats.ttest_rel(paired[arch_a], paired[arch_b])
                statistic, p_value = float(test.statistic), float(test.pvalue)
            rows.append(
                {
                    "metric": metric,
                    "arch_a": arch_a,
                    "arch_b": arch_b,
                    "n": n,
                    "t_statistic": statistic,
                    "p_value": p_value,
                }
            )
    return pd.DataFrame(
        rows, columns=["metric", "arch_a", "arch_b", "n", "t_statistic", "p_value"]
    )


def seed_manifest_frame(frame: pd.DataFrame) -> pd.DataFrame:
    return frame[[*KEY_COLUMNS, "seed"]].copy()


def score_file_name(model_id: str, architecture: str, iteration: int) -> str:
    safe = re.sub(r"[^\w.-]", "_", model_id)
    return f"{safe}_{architecture}_{iteration}.tsv"


def write_score_file(
    path: str | Path, self_scores: Sequence[float], nonself_scores: Sequence[float]
) -> Path:
    """Two columns, score and class (1 = self, 0 = non-self)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# score\tclass"]
    lines += [f"{float(s)!r}\t1" for s in self_scores]
    lines += [f"{float(s)!r}\t0" for s in nonself_scores]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_score_file(path: str | Path) -> tuple[list[float], list[float]]:
    """Read (score, class) pairs; blank lines and # comments are skipped."""
    path = Path(path)
    self_scores: list[float] = []
    nonself_scores: list[float] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("expected two columns: score class", path=str(path), line=lineno)
        try:
            score, cls = float(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"bad value in {raw!r}", path=str(path), line=lineno) from None
        if cls not in (0, 1):
            raise ParseError(f"class must be 0 or 1, got {cls}", path=str(path), line=lineno)
        (self_scores if cls == 1 else nonself_scores).append(score)
    return self_scores, nonself_scores


def write_benchmark_outputs(
    out_dir: str | Path, results: Sequence[ExperimentResult], *, write_scores: bool = True
) -> dict[str, Path]:
    if not results:
        raise InvalidArgumentError("No experiment results to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    frame = results_frame(results)
    per_model = per_model_frame(frame)
    paths = {
        "results": out / "results.csv",
        "per_model": out / "per_model.csv",
        "aggregate": out / "aggregate.csv",
        "significance": out / "significance.csv",
        "seeds": out / "seeds.csv",
    }
    frame.to_csv(paths["results"], index=False)
    per_model.to_csv(paths["per_model"], index=False)
    aggregate_frame(per_model).to_csv(paths["aggregate"], index=False)
    significance_frame(per_model).to_csv(paths["significance"], index=False)
    seed_manifest_frame(frame).to_csv(paths["seeds"], index=False)

    if write_scores:
        for r in results:
            write_score_file(
                out / "scores" / score_file_name(r.model_id, r.architecture, r.iteration),
                r.report.self_scores,
                r.report.nonself_scores,
            )
    log.info("✅ Wrote %d result rows to %s", len(frame), out)
    return paths
