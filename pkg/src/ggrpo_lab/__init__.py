"""G-GRPO lab: distribution-matched group-relative advantages and RL shaping experiments."""

from .server import mcp, main, __version__

__all__ = ["mcp", "main", "__version__"]
