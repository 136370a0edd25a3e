"""Group-relative advantage estimators.

GRPO standardizes rewards inside a prompt group, Dr.GRPO only centers them,
EMA-GRPO divides by a running per-task standard deviation, GDPO standardizes each
reward channel separately before summing, and G-GRPO maps the task's empirical
reward distribution onto N(0, 1) with the 1D optimal transport map:
rank -> mid-rank probability -> normal quantile -> tie average.
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import UsageError
from .models import (
    AdvantageEstimator,
    AdvantageVector,
    CompositeRewardWeights,
    EmaState,
    RolloutGroup,
    SortedSample,
)
from .quantiles import rank_quantiles, wasserstein2_to_normal
from .validators import validate_finite, validate_min_size

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-6


def _is_constant(r: np.ndarray) -> bool:
    return bool(np.all(r == r[0]))


def _group_moments(r: np.ndarray) -> Tuple[float, float]:
    """Group mean and population standard deviation."""
    return float(np.mean(r)), float(np.std(r))


def _check_epsilon(epsilon: float) -> None:
    if epsilon < 0:
        raise UsageError(f"epsilon must be non-negative. Got {epsilon}")


def grpo_advantage(group: RolloutGroup, epsilon: float = DEFAULT_EPSILON) -> AdvantageVector:
    """(R_i - mean) / (std + epsilon) with the population standard deviation."""
    _check_epsilon(epsilon)
    r = np.asarray(group.rewards, dtype=np.float64)
    if _is_constant(r):
        return AdvantageVector(values=[0.0] * r.size, estimator=AdvantageEstimator.GRPO)
    mu, sigma = _group_moments(r)
    return AdvantageVector(
        values=((r - mu) / (sigma + epsilon)).tolist(), estimator=AdvantageEstimator.GRPO
    )


def dr_grpo_advantage(group: RolloutGroup) -> AdvantageVector:
    """R_i - mean: centering only, no scale normalization."""
    r = np.asarray(group.rewards, dtype=np.float64)
    if _is_constant(r):
        return AdvantageVector(values=[0.0] * r.size, estimator=AdvantageEstimator.DR_GRPO)
    return AdvantageVector(values=(r - np.mean(r)).tolist(), estimator=AdvantageEstimator.DR_GRPO)


def ema_grpo_advantage(
    group: RolloutGroup, state: EmaState, epsilon: float = DEFAULT_EPSILON
) -> Tuple[AdvantageVector, EmaState]:
    """Center by the group mean, scale by the task's smoothed standard deviation.

    The first observation seeds sigma with the group's standard deviation; later
    ones blend sigma = alpha * sigma_prev + (1 - alpha) * sigma_group. The input
    state is never mutated; the updated state is returned.
    """
    if state.task_id != group.task_id:
        raise UsageError(
            f"EMA state belongs to task '{state.task_id}' but the group is from "
            f"task '{group.task_id}'"
        )
    _check_epsilon(epsilon)

    r = np.asarray(group.rewards, dtype=np.float64)
    mu, sigma_group = _group_moments(r)
    if state.initialized:
        sigma = state.decay * state.sigma + (1.0 - state.decay) * sigma_group
    else:
        sigma = sigma_group
    new_state = state.model_copy(update={"sigma": sigma, "initialized": True})

    if _is_constant(r):
        values = [0.0] * r.size
    else:
        values = ((r - mu) / (sigma + epsilon)).tolist()
    return AdvantageVector(values=values, estimator=AdvantageEstimator.EMA_GRPO), new_state


def gdpo_advantage(
    group: RolloutGroup,
    weights: Optional[CompositeRewardWeights] = None,
    epsilon: float = DEFAULT_EPSILON,
) -> AdvantageVector:
    """Decoupled normalization: standardize every reward channel, then weight and sum."""
    if group.reward_components is None:
        raise UsageError("GDPO needs per-response reward_components on the group")
    _check_epsilon(epsilon)
    weights = weights or CompositeRewardWeights()

    comps = np.asarray(group.reward_components, dtype=np.float64)
    mu = comps.mean(axis=0)
    sigma = comps.std(axis=0)
    constant = np.all(comps == comps[0], axis=0)
    normalized = np.where(constant, 0.0, (comps - mu) / (sigma + epsilon))
    values = normalized @ np.asarray(weights.as_tuple(), dtype=np.float64)
    return AdvantageVector(values=values.tolist(), estimator=AdvantageEstimator.GDPO)


def g_grpo_advantage(rewards: Sequence[float] | np.ndarray) -> np.ndarray:
    """Map rewards onto N(0, 1) quantiles by rank, averaging quantiles over ties.

    Returns advantages in the original input order. Ties are exact float
    equality. Tie averages use a correctly rounded sum, so a tie set and its
    mirror image get exactly opposite values.
    """
    r = validate_finite(rewards, "rewards")
    validate_min_size(r, 2, "G-GRPO advantage (a single sample has no relative signal)")
    n = r.size

    order = np.argsort(r, kind="stable")
    quantiles = rank_quantiles(n)

    _, counts = np.unique(r[order], return_counts=True)
    if counts.size < n:
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        for start, count in zip(starts[counts > 1], counts[counts > 1]):
            block = quantiles[start : start + count]
            quantiles[start : start + count] = math.fsum(block) / count

    advantages = np.empty(n, dtype=np.float64)
    advantages[order] = quantiles
    return advantages


def ema_advantage_batch(
    groups: Sequence[RolloutGroup],
    states: Mapping[str, EmaState],
    alpha: float = 0.9,
    epsilon: float = DEFAULT_EPSILON,
) -> Tuple[List[AdvantageVector], Dict[str, EmaState]]:
    """Apply EMA-GRPO group by group in batch order.

    Tasks without a state start from a fresh uninitialized one with decay alpha.
    Returns the vectors and a new state mapping; `states` is left untouched.
    """
    updated: Dict[str, EmaState] = dict(states)
    vectors: List[AdvantageVector] = []
    for group in groups:
        state = updated.get(group.task_id) or EmaState(task_id=group.task_id, decay=alpha)
        vector, updated[group.task_id] = ema_grpo_advantage(group, state, epsilon)
        vectors.append(vector)
    return vectors, updated


def _g_grpo_pooled(groups: Sequence[RolloutGroup]) -> List[AdvantageVector]:
    by_task: Dict[str, List[int]] = {}
    for index, group in enumerate(groups):
        by_task.setdefault(group.task_id, []).append(index)

    out: List[Optional[AdvantageVector]] = [None] * len(groups)
    for task_id, indices in by_task.items():
        pooled = np.concatenate([np.asarray(groups[i].rewards, dtype=np.float64) for i in indices])
        advantages = g_grpo_advantage(pooled)
        offset = 0
        for i in indices:
            size = groups[i].size
            out[i] = AdvantageVector(
                values=advantages[offset : offset + size].tolist(),
                estimator=AdvantageEstimator.G_GRPO,
            )
            offset += size
        logger.debug("G-GRPO pooled %d rewards for task %s", pooled.size, task_id)
    return [v for v in out if v is not None]


def advantage_batch(
    groups: Sequence[RolloutGroup],
    estimator: AdvantageEstimator | str,
    pooled: bool = True,
    epsilon: float = DEFAULT_EPSILON,
    ema_states: Optional[Mapping[str, EmaState]] = None,
    ema_alpha: float = 0.9,
    weights: Optional[CompositeRewardWeights] = None,
) -> List[AdvantageVector]:
    """Dispatch a batch of groups to one estimator.

    Output order and lengths mirror the input. For G-GRPO with `pooled`, ranks
    are computed over the union of every same-task reward in the batch and
    scattered back to their groups; without it each group is ranked alone.
    EMA-GRPO starts from `ema_states` (fresh states when omitted); use
    `ema_advantage_batch` to also receive the updated states.
    """
    if not groups:
        raise UsageError("advantage_batch needs at least one group")
    estimator = AdvantageEstimator(estimator)

    if estimator is AdvantageEstimator.GRPO:
        return [grpo_advantage(g, epsilon) for g in groups]
    if estimator is AdvantageEstimator.DR_GRPO:
        return [dr_grpo_advantage(g) for g in groups]
    if estimator is AdvantageEstimator.GDPO:
        return [gdpo_advantage(g, weights, epsilon) for g in groups]
    if estimator is AdvantageEstimator.EMA_GRPO:
        vectors, _ = ema_advantage_batch(groups, ema_states or {}, ema_alpha, epsilon)
        return vectors
    if pooled:
        return _g_grpo_pooled(groups)
    return [
        AdvantageVector(values=g_grpo_advantage(g.rewards).tolist(), estimator=estimator)
        for g in groups
    ]


class AdvantageSummary(BaseModel):
    """Moments and distance-to-normal of one advantage multiset."""

    count: int = Field(ge=0)
    mean: float
    variance: float = Field(ge=0.0)
    maximum: float
    minimum: float
    w2: float = Field(ge=0.0)


def advantage_summary(values: Sequence[float] | np.ndarray) -> AdvantageSummary:
    """Mean, population variance, extremes and W2 to N(0, 1); zeros when empty."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return AdvantageSummary(count=0, mean=0.0, variance=0.0, maximum=0.0, minimum=0.0, w2=0.0)
    return AdvantageSummary(
        count=int(arr.size),
        mean=float(np.mean(arr)),
        variance=float(np.var(arr)),
        maximum=float(np.max(arr)),
        minimum=float(np.min(arr)),
        w2=wasserstein2_to_normal(SortedSample(values=np.sort(arr).tolist())),
    )
