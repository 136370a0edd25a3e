"""Advantage estimation and distribution-matching tools."""

from typing import Annotated, Dict, List, Literal, Optional

from mcp.types import ToolAnnotations
from pydantic import BaseModel, Field

from ..server import mcp
from ..core import (
    AdvantageEstimator,
    CompositeRewardWeights,
    EmaState,
    RolloutGroup,
    SortedSample,
    advantage_batch as estimate_batch,
    advantage_summary,
    dr_grpo_advantage,
    ema_grpo_advantage,
    format_result,
    g_grpo_advantage,
    grpo_advantage,
    normal_cdf,
    normal_quantiles,
    wasserstein2_to_normal,
)


class GroupInput(BaseModel):
    """One prompt group as sent by a client."""

    task_id: str = Field(description="Task label; G-GRPO pools groups with the same label")
    rewards: List[float] = Field(description="Scalar reward per response", min_length=2)
    reward_components: Optional[List[List[float]]] = Field(
        default=None,
        description="Per-response (accuracy, length, format, structure) channels, needed for gdpo",
    )

    def to_group(self, index: int) -> RolloutGroup:
        return RolloutGroup(
            task_id=self.task_id,
            query_id=f"q{index}",
            rewards=self.rewards,
            response_lengths=[1] * len(self.rewards),
            reward_components=self.reward_components,
        )


@mcp.tool(
    name="advantage",
    description="""Compute per-response advantages for one prompt group.

Estimators:
    - grpo: (R - mean) / (std + epsilon)
    - drgrpo: R - mean
    - emagrpo: (R - mean) / (ema_sigma + epsilon), sigma smoothed with ema_alpha
    - ggrpo: Phi^-1((rank - 0.5) / N) with tied ranks averaged

Examples:

G-GRPO:
    rewards=[10, 20, 30, 40], estimator="ggrpo"
    Result: [-1.1503, -0.3186, 0.3186, 1.1503]

TIES:
    rewards=[0, 0, 1, 1], estimator="ggrpo"
    Result: [-0.7345, -0.7345, 0.7345, 0.7345]

DR.GRPO:
    rewards=[1, 0], estimator="drgrpo"
    Result: [0.5, -0.5]

EMA-GRPO WITH PRIOR SIGMA:
    rewards=[0, 2], estimator="emagrpo", ema_sigma=2, ema_alpha=0.5
    Result: [-0.6667, 0.6667] (sigma becomes 1.5)""",
    annotations=ToolAnnotations(
        title="Group Advantage",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def advantage(
    rewards: Annotated[List[float], Field(description="Rewards of one group (e.g., [10,20,30,40])", min_length=2)],
    estimator: Annotated[
        Literal["grpo", "drgrpo", "emagrpo", "ggrpo"],
        Field(description="Advantage estimator"),
    ] = "ggrpo",
    epsilon: Annotated[float, Field(description="Stability constant added to the scale", ge=0.0)] = 1e-6,
    ema_sigma: Annotated[
        Optional[float],
        Field(description="Previous smoothed std for emagrpo (omit for a first observation)", ge=0.0),
    ] = None,
    ema_alpha: Annotated[float, Field(description="EMA decay for emagrpo", ge=0.0, lt=1.0)] = 0.9,
) -> str:
    """Single-group advantages."""
    try:
        group = RolloutGroup(task_id="tool", rewards=rewards, response_lengths=[1] * len(rewards))
        metadata: Dict[str, object] = {"estimator": estimator}

        if estimator == "grpo":
            values = grpo_advantage(group, epsilon).values
        elif estimator == "drgrpo":
            values = dr_grpo_advantage(group).values
        elif estimator == "emagrpo":
            state = EmaState(
                task_id="tool",
                sigma=ema_sigma or 0.0,
                decay=ema_alpha,
                initialized=ema_sigma is not None,
            )
            vector, state = ema_grpo_advantage(group, state, epsilon)
            values = vector.values
            metadata["ema_sigma"] = state.sigma
        else:
            values = g_grpo_advantage(rewards).tolist()

        metadata["summary"] = advantage_summary(values).model_dump()
        return format_result(values, metadata)
    except Exception as e:
        raise ValueError(f"Advantage computation failed: {str(e)}") from e


@mcp.tool(
    name="advantage_batch",
    description="""Compute advantages for a batch of groups from one or more tasks.

With estimator="ggrpo" and pooled=true, all rewards sharing a task_id are ranked
together, so every task's advantages follow the same N(0,1) quantiles whatever
its reward scale. gdpo needs reward_components on every group.

Example:

SCALE EQUITY:
    groups=[{"task_id":"a","rewards":[0.1,0.4]}, {"task_id":"b","rewards":[10,40]}],
    estimator="ggrpo"
    Result: [[-0.6745, 0.6745], [-0.6745, 0.6745]]""",
    annotations=ToolAnnotations(
        title="Batch Advantage",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def advantage_batch(
    groups: Annotated[List[GroupInput], Field(description="Groups with task labels and rewards", min_length=1)],
    estimator: Annotated[
        Literal["grpo", "drgrpo", "emagrpo", "ggrpo", "gdpo"],
        Field(description="Advantage estimator"),
    ] = "ggrpo",
    pooled: Annotated[bool, Field(description="Pool same-task rewards before ranking (ggrpo)")] = True,
    epsilon: Annotated[float, Field(description="Stability constant", ge=0.0)] = 1e-6,
    ema_alpha: Annotated[float, Field(description="EMA decay for emagrpo", ge=0.0, lt=1.0)] = 0.9,
    weights: Annotated[
        Optional[Dict[str, float]],
        Field(description="gdpo channel weights, e.g. {'accuracy_w': 1, 'length_w': 0.1}"),
    ] = None,
) -> str:
    """Batch advantages in input order."""
    try:
        batch = [g.to_group(i) for i, g in enumerate(groups)]
        vectors = estimate_batch(
            batch,
            AdvantageEstimator(estimator),
            pooled=pooled,
            epsilon=epsilon,
            ema_alpha=ema_alpha,
            weights=CompositeRewardWeights(**weights) if weights else None,
        )
        per_task: Dict[str, List[float]] = {}
        for group, vector in zip(batch, vectors):
            per_task.setdefault(group.task_id, []).extend(vector.values)

        return format_result(
            [v.values for v in vectors],
            {
                "estimator": estimator,
                "pooled": pooled,
                "task_summaries": {
                    task: advantage_summary(values).model_dump() for task, values in per_task.items()
                },
            },
        )
    except Exception as e:
        raise ValueError(f"Batch advantage computation failed: {str(e)}") from e


@mcp.tool(
    name="normal_quantile",
    description="""Standard normal quantile Phi^-1(p) or CDF Phi(x), elementwise.

Examples:

QUANTILE:
    values=[0.125, 0.5, 0.875], operation="quantile"
    Result: [-1.1503, 0.0, 1.1503]

CDF:
    values=[0, 1.959964], operation="cdf"
    Result: [0.5, 0.975]""",
    annotations=ToolAnnotations(
        title="Normal Quantile",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def normal_quantile(
    values: Annotated[List[float], Field(description="Probabilities in (0,1) for quantile, reals for cdf", min_length=1)],
    operation: Annotated[Literal["quantile", "cdf"], Field(description="quantile or cdf")] = "quantile",
) -> str:
    """Phi^-1 or Phi."""
    try:
        if operation == "quantile":
            result = normal_quantiles(values).tolist()
        else:
            result = [normal_cdf(x) for x in values]
        return format_result(result, {"operation": operation})
    except Exception as e:
        raise ValueError(f"Normal {operation} failed: {str(e)}") from e


@mcp.tool(
    name="wasserstein_to_normal",
    description="""Closed-form 2-Wasserstein distance between a sample and N(0,1).

Sorts the sample and compares order statistics to the quantiles
Phi^-1((i - 0.5) / N). G-GRPO advantages of distinct rewards score 0.

Example:
    values=[-1.1503, -0.3186, 0.3186, 1.1503]
    Result: ~0""",
    annotations=ToolAnnotations(
        title="W2 to Standard Normal",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def wasserstein_to_normal(
    values: Annotated[List[float], Field(description="Sample values (any order)", min_length=1)],
) -> str:
    """W2 distance to N(0,1)."""
    try:
        return format_result(wasserstein2_to_normal(SortedSample.of(values)), {"count": len(values)})
    except Exception as e:
        raise ValueError(f"W2 computation failed: {str(e)}") from e
