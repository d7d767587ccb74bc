"""
Shared plumbing for the two benchmark flows: which logger to use, how one
experiment unit is guarded, how a whole benchmark run is summarised, and
what happens when a flow run fails or crashes.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import Any

import sentry_sdk
from mini_app_polis import logger as logger_mod
from prefect import get_run_logger
from prefect.exceptions import MissingContextError

from neurocrf_cog.core import ExperimentSkip, InsufficientDataError
from neurocrf_cog.results import BenchmarkSummary, ExperimentResult, UnitOutcome

_log = logger_mod.get_logger()


def flow_logger() -> Any:
    """Prefect's run logger inside a flow or task, the package logger elsewhere."""
    try:
        return get_run_logger()
    except MissingContextError:
        return _log


def flow_run_name() -> str:
    """Name of the current Prefect flow run, or "local" outside one."""
    from prefect.runtime import flow_run

    return getattr(flow_run, "name", None) or "local"


def format_benchmark_summary(summary: BenchmarkSummary) -> str:
    parts = [f"{summary.completed}/{summary.attempted} experiments completed"]
    if summary.skipped:
        parts.append(f"skipped={summary.skipped} ({', '.join(summary.skipped_labels)})")
    if summary.failed:
        parts.append(f"failed={summary.failed} ({', '.join(summary.failed_labels)})")
    if "results" in summary.outputs:
        parts.append(f"results={summary.outputs['results']}")
    return "; ".join(parts)


def log_benchmark_summary(flow_name: str, summary: BenchmarkSummary) -> str:
    """One line per benchmark run; a warning when any experiment unit failed."""
    logger = flow_logger()
    line = format_benchmark_summary(summary)
    if summary.failed:
        logger.warning("⚠️ %s [%s]: %s", flow_name, flow_run_name(), line)
    else:
        logger.info("✅ %s [%s]: %s", flow_name, flow_run_name(), line)
    return line


def make_failure_hook(flow_name: str) -> Callable[..., None]:
    """
    Prefect on_failure/on_crashed hook: log the final state and report it to
    Sentry. The hook never raises, so the flow's own failure stays visible.
    """

    def _hook(flow, flow_run, state) -> None:  # noqa: ARG001
        logger = flow_logger()
        state_name = str(getattr(state, "name", "Failed"))
        try:
            logger.error("❌ %s run %s ended %s", flow_name, flow_run_name(), state_name)
            sentry_sdk.capture_message(
                f"{flow_name} run {flow_run_name()} ended {state_name}", level="error"
            )
        except Exception:
            logger.exception("Failure hook for %s could not report", flow_name)

    return _hook


def run_guarded(
    label: str, fn: Callable[..., ExperimentResult], *args: Any, **kwargs: Any
) -> UnitOutcome:
    """Run one experiment unit; skips and failures become outcomes, not exceptions."""
    logger = flow_logger()
    try:
        result = fn(*args, **kwargs)
    except (ExperimentSkip, InsufficientDataError) as exc:
        logger.warning("⚠️ Skipping %s: %s", label, exc)
        return UnitOutcome(label=label, status="skipped", reason=str(exc))
    except Exception as exc:
        logger.exception("❌ Experiment %s failed", label)
        sentry_sdk.capture_exception(exc)
        return UnitOutcome(label=label, status="failed", reason=f"{type(exc).__name__}: {exc}")
    logger.info(
        "✅ %s: acc=%.2f tok=%.2f r2=%.3f",
        label,
        result.report.accuracy,
        result.report.token_accuracy,
        result.report.r_square,
    )
    return UnitOutcome(label=label, status="ok", result=result)
