"""Seeded training and estimator comparison runs."""

from typing import Annotated, Any, Dict

from mcp.types import ToolAnnotations
from pydantic import Field

from ..server import mcp
from ..core import ExperimentConfig, compare_estimators, format_result, train
from ..core.simulator import summarize_run


@mcp.tool(
    name="run_experiment",
    description="""Run a seeded tabular-policy experiment and return its summary.

The config uses the same keys as the YAML experiment files (trainer, tasks,
mode). Nothing is written to disk. Runs are deterministic for a fixed seed.

Modes:
    - train: one run with trainer.estimator
    - compare: one run per estimator (grpo, drgrpo, emagrpo, ggrpo, gdpo), plus
      outlier-free reruns when compare_outlier_sensitivity is true

Example:
    config={"trainer": {"steps": 50, "group_size": 8, "batch_groups": 4,
                        "max_len": 1, "estimator": "ggrpo"},
            "tasks": [{"task_id": "math", "topology": "binary", "target": [2]}]}
    Result: {"ggrpo": {"final_reward": {"math": ...}, "equity_mean": 1.0, ...}}""",
    annotations=ToolAnnotations(
        title="Run Experiment",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def run_experiment(
    config: Annotated[Dict[str, Any], Field(description="Experiment config (trainer, tasks, mode)")],
) -> str:
    """Train or compare and summarize."""
    try:
        cfg = ExperimentConfig.model_validate(config)
        if cfg.mode == "compare":
            report = compare_estimators(
                cfg.trainer, cfg.tasks, outlier_sensitivity=cfg.compare_outlier_sensitivity
            )
            summaries = report.summaries
        else:
            metrics = train(cfg.trainer, cfg.tasks)
            summaries = {cfg.trainer.estimator.value: summarize_run(cfg.trainer.estimator, metrics)}

        return format_result(
            {name: s.model_dump(mode="json") for name, s in summaries.items()},
            {"mode": cfg.mode, "steps": cfg.trainer.steps, "tasks": [t.task_id for t in cfg.tasks]},
        )
    except Exception as e:
        raise ValueError(f"Experiment failed: {str(e)}") from e
