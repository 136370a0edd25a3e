"""Reward shaping tools: length envelope, entropy band and composite reward."""

from typing import Annotated, Literal, Optional

from mcp.types import ToolAnnotations
from pydantic import Field

from ..server import mcp
from ..core import (
    CompositeRewardWeights,
    EntropyBounds,
    LengthEnvelope,
    composite_reward as weighted_composite,
    default_entropy_bounds,
    default_envelope,
    entropy_penalty as band_penalty,
    format_result,
    length_reward as trapezoid,
    reward_components,
)

Kind = Literal["reasoning", "vision", "hybrid"]


def _envelope(
    kind: Kind,
    l_min: Optional[int],
    l_low: Optional[int],
    l_high: Optional[int],
    l_max: Optional[int],
) -> LengthEnvelope:
    """Kind defaults overridden by any explicit threshold."""
    base = default_envelope(kind)
    overrides = {
        k: v
        for k, v in {"l_min": l_min, "l_low": l_low, "l_high": l_high, "l_max": l_max}.items()
        if v is not None
    }
    return LengthEnvelope(**{**base.model_dump(), **overrides})


@mcp.tool(
    name="length_reward",
    description="""Trapezoidal response-length reward.

0 below l_min or above l_max, linear ramp up to l_low, 1 on [l_low, l_high],
linear ramp down to l_max. Thresholds default to the task kind's envelope:
reasoning (400, 800, 2000, 4096), vision (10, 30, 200, 1024), hybrid (100, 300, 1200, 4096).

Examples:

PLATEAU:
    length=1000, l_min=400, l_low=800, l_high=2000, l_max=4096
    Result: 1.0

RAMP UP:
    length=600, same envelope
    Result: 0.5

VISION DEFAULTS:
    length=20, kind="vision"
    Result: 0.5""",
    annotations=ToolAnnotations(
        title="Length Reward",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def length_reward(
    length: Annotated[int, Field(description="Response length in tokens", ge=0)],
    kind: Annotated[Kind, Field(description="Task kind supplying default thresholds")] = "reasoning",
    l_min: Annotated[Optional[int], Field(description="Absolute minimum length")] = None,
    l_low: Annotated[Optional[int], Field(description="Start of the plateau")] = None,
    l_high: Annotated[Optional[int], Field(description="End of the plateau")] = None,
    l_max: Annotated[Optional[int], Field(description="Absolute maximum length")] = None,
) -> str:
    """Trapezoid length reward."""
    try:
        env = _envelope(kind, l_min, l_low, l_high, l_max)
        return format_result(trapezoid(length, env), {"envelope": env.model_dump()})
    except Exception as e:
        raise ValueError(f"Length reward failed: {str(e)}") from e


@mcp.tool(
    name="entropy_penalty",
    description="""Hinge penalty keeping mean token entropy inside [h_min, h_max].

penalty = max(0, H - h_max) + max(0, h_min - H); weighted = lambda_ent * penalty.
Bounds default to the task kind's band: reasoning (0.15, 0.9), vision (0.05, 0.5),
hybrid (0.1, 0.7).

Examples:

IN BAND:
    entropy=0.5, h_min=0.2, h_max=0.8
    Result: 0.0

ABOVE:
    entropy=1.0, h_min=0.2, h_max=0.8
    Result: 0.2 (weighted 0.002 with lambda_ent=0.01)""",
    annotations=ToolAnnotations(
        title="Entropy Band Penalty",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def entropy_penalty(
    entropy: Annotated[float, Field(description="Mean token entropy in nats", ge=0.0)],
    kind: Annotated[Kind, Field(description="Task kind supplying default bounds")] = "reasoning",
    h_min: Annotated[Optional[float], Field(description="Entropy floor")] = None,
    h_max: Annotated[Optional[float], Field(description="Entropy ceiling")] = None,
    lambda_ent: Annotated[float, Field(description="Penalty weight", ge=0.0)] = 0.01,
) -> str:
    """Entropy band penalty."""
    try:
        base = default_entropy_bounds(kind, lambda_ent)
        bounds = EntropyBounds(
            h_min=base.h_min if h_min is None else h_min,
            h_max=base.h_max if h_max is None else h_max,
            lambda_ent=lambda_ent,
        )
        penalty = band_penalty(entropy, bounds)
        return format_result(
            penalty,
            {
                "weighted": bounds.lambda_ent * penalty,
                "in_band": penalty == 0.0,
                "bounds": bounds.model_dump(),
            },
        )
    except Exception as e:
        raise ValueError(f"Entropy penalty failed: {str(e)}") from e


@mcp.tool(
    name="composite_reward",
    description="""Weighted reward from accuracy, length, format and structure channels.

R = accuracy_w * accuracy + length_w * length_reward(length) + format_w * format_ok
    + structure_w * structure_ok

Example:
    accuracy=1, length=1000, format_ok=true, structure_ok=false (reasoning envelope)
    Result: 1.2 (1 + 0.1 * 1 + 0.1 * 1 + 0.1 * 0)""",
    annotations=ToolAnnotations(
        title="Composite Reward",
        readOnlyHint=True,
        idempotentHint=True,
    ),
)
async def composite_reward(
    accuracy: Annotated[float, Field(description="Task accuracy score")],
    length: Annotated[int, Field(description="Response length in tokens", ge=0)],
    format_ok: Annotated[bool, Field(description="Response follows the required format")],
    structure_ok: Annotated[
        Optional[bool], Field(description="Structured output is valid (omit when not applicable)")
    ] = None,
    kind: Annotated[Kind, Field(description="Task kind supplying the length envelope")] = "reasoning",
    accuracy_w: Annotated[float, Field(ge=0.0)] = 1.0,
    length_w: Annotated[float, Field(ge=0.0)] = 0.1,
    format_w: Annotated[float, Field(ge=0.0)] = 0.1,
    structure_w: Annotated[float, Field(ge=0.0)] = 0.1,
) -> str:
    """Composite reward and its channels."""
    try:
        env = default_envelope(kind)
        weights = CompositeRewardWeights(
            accuracy_w=accuracy_w, length_w=length_w, format_w=format_w, structure_w=structure_w
        )
        channels = reward_components(accuracy, length, format_ok, structure_ok, env)
        return format_result(
            weighted_composite(accuracy, length, format_ok, structure_ok, env, weights),
            {"channels": dict(zip(("accuracy", "length", "format", "structure"), channels))},
        )
    except Exception as e:
        raise ValueError(f"Composite reward failed: {str(e)}") from e
