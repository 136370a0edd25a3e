"""Pytest configuration and shared fixtures."""

import pytest
from fastmcp import Client

from ggrpo_lab import mcp
from ggrpo_lab.core.models import CompositeRewardWeights, TaskSpec, TrainerConfig


@pytest.fixture
async def mcp_client():
    """Create in-memory MCP client for testing."""
    async with Client(mcp) as client:
        yield client


@pytest.fixture
def accuracy_only():
    """Reward weights that score accuracy alone."""
    return CompositeRewardWeights(accuracy_w=1.0, length_w=0.0, format_w=0.0, structure_w=0.0)


@pytest.fixture
def bandit_config(accuracy_only):
    """Single-token bandit over four symbols."""
    return TrainerConfig(
        group_size=8,
        batch_groups=4,
        steps=5,
        learning_rate=0.5,
        vocab_size=4,
        max_len=1,
        reward_weights=accuracy_only,
    )


@pytest.fixture
def binary_task():
    return TaskSpec(task_id="math", topology="binary", target=[2])


@pytest.fixture
def scaled_pair():
    """Two dense tasks whose rewards differ only in scale."""
    return [
        TaskSpec(task_id="small", topology="scaled-continuous", target=[1, 2], reward_scale=1.0),
        TaskSpec(task_id="large", topology="scaled-continuous", target=[1, 2], reward_scale=100.0),
    ]
