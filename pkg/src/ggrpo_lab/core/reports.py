"""Run artifacts: metrics.csv, per-figure CSVs, summary.txt and the effective config."""

import logging
from pathlib import Path
from typing import List, Sequence

import polars as pl

from .config import dump_config
from .converters import global_frame, metrics_frame
from .formatters import format_float, write_csv
from .models import (
    ComparisonReport,
    EstimatorSummary,
    ExperimentConfig,
    StepMetrics,
    TaskSpec,
)
from .shaping import fit_task_envelopes
from .simulator import summarize_run

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "step",
    "task_id",
    "mean_reward",
    "adv_mean",
    "adv_var",
    "w2",
    "entropy",
    "mean_length",
    "filtered_groups",
    "surrogate",
    "total_loss",
    "grad_norm",
]
GLOBAL_TASK_ID = "*"

LENGTH_COLUMNS = ["step", "task_id", "mean_length", "length_reward", "l_low", "l_high"]
ENTROPY_COLUMNS = ["step", "task_id", "entropy", "h_min", "h_max", "entropy_penalty", "in_band"]
REWARD_COLUMNS = [
    "step",
    "task_id",
    "mean_reward",
    "accuracy",
    "length_reward",
    "format_reward",
    "structure_reward",
]
COMPARISON_COLUMNS = [
    "estimator",
    "task_id",
    "final_reward",
    "w2_final",
    "adv_max",
    "outlier_delta",
    "outlier_adv_max_delta",
    "equity_mean",
    "equity_max",
    "equity_above_threshold",
]


def metrics_table(metrics: Sequence[StepMetrics]) -> pl.DataFrame:
    """Rows per (step, task) followed by one global row per step (task_id '*')."""
    frame = metrics_frame(metrics)
    task_rows = frame.with_columns(
        pl.lit(None, dtype=pl.Float64).alias(c) for c in ("surrogate", "total_loss", "grad_norm")
    ).select(METRICS_COLUMNS)

    global_rows = (
        frame.group_by("step", maintain_order=True)
        .agg(
            pl.col("mean_reward").mean(),
            pl.col("entropy").mean(),
            pl.col("mean_length").mean(),
            pl.col("filtered_groups").sum(),
        )
        .join(global_frame(metrics), on="step", how="inner")
        .with_columns(
            pl.lit(GLOBAL_TASK_ID).alias("task_id"),
            *(pl.lit(None, dtype=pl.Float64).alias(c) for c in ("adv_mean", "adv_var", "w2")),
        )
        .select(METRICS_COLUMNS)
    )
    return pl.concat([task_rows, global_rows]).sort("step", maintain_order=True)


def _with_task_params(frame: pl.DataFrame, tasks: Sequence[TaskSpec]) -> pl.DataFrame:
    params = {
        "l_low": {t.task_id: t.envelope.l_low for t in tasks},
        "l_high": {t.task_id: t.envelope.l_high for t in tasks},
        "h_min": {t.task_id: t.entropy_bounds.h_min for t in tasks},
        "h_max": {t.task_id: t.entropy_bounds.h_max for t in tasks},
    }
    dtypes = {"l_low": pl.Int64, "l_high": pl.Int64, "h_min": pl.Float64, "h_max": pl.Float64}
    return frame.with_columns(
        pl.col("task_id").replace_strict(mapping, return_dtype=dtypes[name]).alias(name)
        for name, mapping in params.items()
    )


def render_summary(
    config: ExperimentConfig, summaries: Sequence[EstimatorSummary], steps_run: int
) -> str:
    lines = ["# effective config", dump_config(config).rstrip(), "", "# results", f"steps: {steps_run}"]
    for summary in summaries:
        lines.append(f"estimator: {summary.estimator.value}")
        for task_id, reward in summary.final_reward.items():
            lines.append(
                f"  {task_id}: final_reward={format_float(reward)} "
                f"w2_final={format_float(summary.w2_final[task_id])} "
                f"adv_max={format_float(summary.adv_max[task_id])}"
            )
            if summary.outlier_delta is not None:
                lines.append(
                    f"  {task_id}: outlier_delta={format_float(summary.outlier_delta[task_id])} "
                    f"outlier_adv_max_delta="
                    f"{format_float(summary.outlier_adv_max_delta[task_id])}"
                )
        if summary.equity_mean is None:
            lines.append("  equity_ratio: undefined")
        else:
            lines.append(
                f"  equity_ratio: mean={format_float(summary.equity_mean)} "
                f"max={format_float(summary.equity_max)} "
                f"above_5={format_float(summary.equity_above_threshold)}"
            )
    return "\n".join(lines) + "\n"


def write_metrics(
    metrics: Sequence[StepMetrics],
    tasks: Sequence[TaskSpec],
    out_dir: Path,
    emit_plots_data: bool = True,
) -> List[Path]:
    """metrics.csv plus, optionally, the length, entropy and reward curve CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_csv(metrics_table(metrics), out_dir / "metrics.csv")]
    if emit_plots_data:
        frame = _with_task_params(metrics_frame(metrics), tasks)
        written.append(write_csv(frame.select(LENGTH_COLUMNS), out_dir / "length_dynamics.csv"))
        written.append(write_csv(frame.select(ENTROPY_COLUMNS), out_dir / "entropy_dynamics.csv"))
        written.append(write_csv(frame.select(REWARD_COLUMNS), out_dir / "reward_curves.csv"))
    for path in written:
        logger.info("Wrote %s", path)
    return written


def write_run_artifacts(
    metrics: Sequence[StepMetrics], config: ExperimentConfig, out_dir: Path
) -> List[Path]:
    """Everything a `run` in train mode leaves on disk."""
    tasks = fit_task_envelopes(config.tasks, config.trainer.max_len)
    written = write_metrics(metrics, tasks, out_dir, config.emit_plots_data)
    summary = summarize_run(config.trainer.estimator, metrics)
    written.append(_write_text(out_dir / "summary.txt", render_summary(config, [summary], len(metrics))))
    written.append(_write_text(out_dir / "effective_config.yaml", dump_config(config)))
    return written


def comparison_table(report: ComparisonReport) -> pl.DataFrame:
    rows = []
    for name, summary in report.summaries.items():
        for task_id, reward in summary.final_reward.items():
            rows.append(
                {
                    "estimator": name,
                    "task_id": task_id,
                    "final_reward": reward,
                    "w2_final": summary.w2_final[task_id],
                    "adv_max": summary.adv_max[task_id],
                    "outlier_delta": (summary.outlier_delta or {}).get(task_id),
                    "outlier_adv_max_delta": (summary.outlier_adv_max_delta or {}).get(task_id),
                    "equity_mean": summary.equity_mean,
                    "equity_max": summary.equity_max,
                    "equity_above_threshold": summary.equity_above_threshold,
                }
            )
    schema = {c: pl.Float64 for c in COMPARISON_COLUMNS}
    schema.update(estimator=pl.Utf8, task_id=pl.Utf8)
    return pl.DataFrame(rows, schema=schema).select(COMPARISON_COLUMNS)


def write_comparison_artifacts(
    report: ComparisonReport, config: ExperimentConfig, out_dir: Path
) -> List[Path]:
    """One subdirectory per estimator plus comparison.csv and summary.txt."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    tasks = fit_task_envelopes(config.tasks, config.trainer.max_len)
    for name, metrics in report.runs.items():
        written.extend(write_metrics(metrics, tasks, out_dir / name, config.emit_plots_data))
    written.append(write_csv(comparison_table(report), out_dir / "comparison.csv"))
    steps_run = len(next(iter(report.runs.values()), []))
    text = render_summary(config, list(report.summaries.values()), steps_run)
    written.append(_write_text(out_dir / "summary.txt", text))
    written.append(_write_text(out_dir / "effective_config.yaml", dump_config(config)))
    return written


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", path)
    return path
