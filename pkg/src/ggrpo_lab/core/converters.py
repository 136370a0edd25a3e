"""Conversions from StepMetrics streams to Polars frames and per-run aggregates."""

from typing import Dict, List, Optional, Sequence

import polars as pl

from .models import StepMetrics

TASK_SCHEMA: Dict[str, pl.DataType] = {
    "step": pl.Int64,
    "task_id": pl.Utf8,
    "mean_reward": pl.Float64,
    "accuracy": pl.Float64,
    "length_reward": pl.Float64,
    "format_reward": pl.Float64,
    "structure_reward": pl.Float64,
    "adv_mean": pl.Float64,
    "adv_var": pl.Float64,
    "adv_max": pl.Float64,
    "w2": pl.Float64,
    "entropy": pl.Float64,
    "entropy_penalty": pl.Float64,
    "in_band": pl.Boolean,
    "mean_length": pl.Float64,
    "groups": pl.Int64,
    "filtered_groups": pl.Int64,
    "ema_sigma": pl.Float64,
}

GLOBAL_SCHEMA: Dict[str, pl.DataType] = {
    "step": pl.Int64,
    "surrogate": pl.Float64,
    "total_loss": pl.Float64,
    "grad_norm": pl.Float64,
}

TRAILING_WINDOW = 20


def metrics_frame(metrics: Sequence[StepMetrics]) -> pl.DataFrame:
    """One row per (step, task) with every per-task field."""
    rows = [{"step": m.step, **t.model_dump()} for m in metrics for t in m.tasks]
    return pl.DataFrame(rows, schema=TASK_SCHEMA)


def global_frame(metrics: Sequence[StepMetrics]) -> pl.DataFrame:
    """One row per step with the objective values and gradient norm."""
    rows = [
        {"step": m.step, "surrogate": m.surrogate, "total_loss": m.total_loss, "grad_norm": m.grad_norm}
        for m in metrics
    ]
    return pl.DataFrame(rows, schema=GLOBAL_SCHEMA)


def equity_ratios(frame: pl.DataFrame) -> pl.DataFrame:
    """Per step, the largest task advantage variance over the smallest.

    Null when some task has zero advantage variance at that step (fully filtered
    or constant), since the ratio is then undefined.
    """
    return (
        frame.group_by("step", maintain_order=True)
        .agg(
            pl.col("adv_var").max().alias("max_var"),
            pl.col("adv_var").min().alias("min_var"),
        )
        .with_columns(
            pl.when(pl.col("min_var") > 0.0)
            .then(pl.col("max_var") / pl.col("min_var"))
            .otherwise(None)
            .alias("equity_ratio")
        )
        .sort("step")
    )


def window_mean(
    frame: pl.DataFrame, column: str, window: int = TRAILING_WINDOW, leading: bool = False
) -> Dict[str, float]:
    """Mean of `column` per task over the first (leading) or last `window` steps."""
    if frame.is_empty():
        return {}
    picked = pl.col(column).head(window) if leading else pl.col(column).tail(window)
    out = (
        frame.sort("step")
        .group_by("task_id", maintain_order=True)
        .agg(picked.mean().alias(column))
    )
    return dict(zip(out["task_id"].to_list(), out[column].to_list()))


def task_column(frame: pl.DataFrame, task_id: str, column: str) -> List[float]:
    """Trajectory of one column for one task, ordered by step."""
    return frame.filter(pl.col("task_id") == task_id).sort("step")[column].to_list()


def column_max(frame: pl.DataFrame, column: str) -> Dict[str, float]:
    """Maximum of `column` per task over the whole run."""
    if frame.is_empty():
        return {}
    out = frame.group_by("task_id", maintain_order=True).agg(pl.col(column).max())
    return dict(zip(out["task_id"].to_list(), out[column].to_list()))


def ratio_stats(ratios: pl.DataFrame, threshold: float = 5.0) -> Dict[str, Optional[float]]:
    """Mean, max and the fraction of defined steps above `threshold` of the equity ratio."""
    defined = ratios["equity_ratio"].drop_nulls()
    if defined.is_empty():
        return {"equity_mean": None, "equity_max": None, "equity_above_threshold": 0.0}
    return {
        "equity_mean": float(defined.mean()),
        "equity_max": float(defined.max()),
        "equity_above_threshold": float((defined > threshold).mean()),
    }
