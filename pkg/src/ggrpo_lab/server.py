"""G-GRPO lab MCP server: advantage estimators, reward shaping and seeded experiments."""

import json
from typing import Annotated, Any, Dict, Literal

from fastmcp import FastMCP
from fastmcp.tools import Tool
from fastmcp.tools.tool_transform import forward
from mcp.types import TextContent
from pydantic import Field

# Version is defined here to avoid circular import with __init__.py
__version__ = "0.1.0"

OutputMode = Literal["full", "compact", "value"]


def transform_response(data: Dict[str, Any], mode: OutputMode) -> Dict[str, Any]:
    """Reshape a tool response for the requested verbosity.

    full keeps everything, compact drops null fields and value keeps only the
    result (and the context label when one was given).
    """
    if mode == "compact":
        return {k: v for k, v in data.items() if v is not None}
    if mode == "value":
        out = {"value": data.get("result")}
        if "context" in data:
            out["context"] = data["context"]
        return out
    return data


class CustomMCP(FastMCP):
    """FastMCP subclass that gives every tool optional `context` and `output_mode` arguments.

    Tools are wrapped at registration time with `Tool.from_tool`, so individual
    tool functions stay free of labelling and formatting code.
    """

    def add_tool(self, tool: Tool) -> Tool:
        async def labelled(
            context: Annotated[
                str | None,
                Field(
                    description=(
                        "Optional label for this computation "
                        "(e.g., 'math task batch 3', 'scale-100 ablation'). "
                        "Echoed in the response."
                    )
                ),
            ] = None,
            output_mode: Annotated[
                OutputMode,
                Field(description="Response shape: full (default), compact, or value"),
            ] = "full",
            **kwargs: Any,
        ) -> str:
            tool_result = await forward(**kwargs)
            content = tool_result.content[0] if tool_result.content else None
            if not isinstance(content, TextContent):
                raise ValueError(f"Expected TextContent from tool, got {type(content)}")

            try:
                data = json.loads(content.text)
            except (json.JSONDecodeError, TypeError):
                return content.text

            if context is not None:
                data["context"] = context
            data = transform_response(data, output_mode)
            if output_mode == "compact":
                return json.dumps(data, separators=(",", ":"), default=str)
            return json.dumps(data, indent=2, default=str)

        wrapped = Tool.from_tool(
            tool=tool,
            transform_fn=labelled,
            name=tool.name,
            description=tool.description,
        )
        return super().add_tool(wrapped)


mcp = CustomMCP(
    "ggrpo-lab",
    version=__version__,
    instructions="""Group-relative advantage estimation and reward shaping for RL fine-tuning experiments.

**Tools:**
• advantage / advantage_batch: GRPO, Dr.GRPO, EMA-GRPO, GDPO and G-GRPO (rank to N(0,1) quantiles)
• normal_quantile, wasserstein_to_normal: the distribution-matching primitives
• length_reward, entropy_penalty, composite_reward: trapezoidal length reward, entropy band, weighted channels
• run_experiment: seeded tabular-policy training run returning the per-task summary

**Use when:** comparing how estimators scale advantages across tasks with different reward
scales or topologies, checking robustness to reward outliers, or tuning shaping parameters.""",
)


# ============================================================================
# MCP Prompts
# ============================================================================


@mcp.prompt()
def estimator_comparison(
    scenario: Annotated[
        Literal["scale_equity", "outliers", "binary_vs_continuous"],
        Field(description="Which estimator property to demonstrate"),
    ] = "scale_equity",
) -> str:
    """Walkthroughs contrasting the advantage estimators."""
    workflows = {
        "scale_equity": """Advantage scale across tasks

advantage_batch(groups=[
  {"task_id": "small", "rewards": [0.1, 0.4, 0.2, 0.9]},
  {"task_id": "large", "rewards": [10, 40, 20, 90]}
], estimator="drgrpo") → advantages 100x apart
Same call with estimator="ggrpo" → identical advantages for both tasks""",
        "outliers": """Outlier robustness

advantage(rewards=[0.1, 0.2, 0.3, 1e6], estimator="drgrpo") → max advantage ~7.5e5
advantage(rewards=[0.1, 0.2, 0.3, 1e6], estimator="ggrpo") → max advantage 1.1503 (Phi^-1(7/8))""",
        "binary_vs_continuous": """Binary vs continuous rewards

advantage(rewards=[0, 0, 1, 1], estimator="ggrpo") → [-0.7345, -0.7345, 0.7345, 0.7345]
advantage(rewards=[0.1, 0.3, 0.6, 0.8], estimator="ggrpo") → [-1.1503, -0.3186, 0.3186, 1.1503]""",
    }
    return workflows[scenario]


# ============================================================================
# MCP Resources
# ============================================================================


@mcp.resource("docs://estimators")
def estimators_guide() -> str:
    """Formulas and properties of the available advantage estimators."""
    return """Advantage Estimators

grpo     (R - mean) / (std + eps)                 scale-free per group, unstable for tiny std
drgrpo   R - mean                                 keeps the reward scale, no division
emagrpo  (R - mean) / (ema_sigma + eps)           smoothed per-task scale; sigma_t = a*sigma_{t-1} + (1-a)*std
gdpo     sum_k w_k * standardize(channel_k)       each reward channel normalized separately
ggrpo    Phi^-1((rank - 0.5) / N), ties averaged  output law is N(0,1) whatever the reward law

ggrpo properties: zero-sum, invariant to strictly increasing reward transforms,
bounded by Phi^-1((N - 0.5) / N) regardless of outlier magnitude.
Batch mode pools same-task rewards before ranking (pooled=true).
"""


# Import and register all tools (must be after mcp instance creation for decorators)
from .tools import advantage, experiment, shaping  # noqa: E402

__all__ = ["mcp", "advantage", "shaping", "experiment"]


def main():
    """Entry point for the ggrpo-lab-mcp script."""
    mcp.run()


if __name__ == "__main__":
    main()
