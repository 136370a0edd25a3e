"""MCP tools for the G-GRPO lab server."""

# Tools are registered via decorators in their respective modules
# Import modules to trigger registration
from . import advantage
from . import shaping
from . import experiment

__all__ = ["advantage", "shaping", "experiment"]
