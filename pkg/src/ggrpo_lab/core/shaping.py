"""Task-level reward shaping: trapezoidal length reward, entropy band, composite reward."""

from typing import Dict, List, Optional, Sequence, Tuple

from .errors import UsageError
from .models import CompositeRewardWeights, EntropyBounds, LengthEnvelope, TaskKind, TaskSpec
from .validators import validate_finite_scalar

# Token-count envelopes per task kind, sized for a 4096-token generation cap.
DEFAULT_ENVELOPES: Dict[str, Tuple[int, int, int, int]] = {
    "reasoning": (400, 800, 2000, 4096),
    "vision": (10, 30, 200, 1024),
    "hybrid": (100, 300, 1200, 4096),
}

# Entropy bands (nats per token) per task kind.
DEFAULT_ENTROPY_BANDS: Dict[str, Tuple[float, float]] = {
    "reasoning": (0.15, 0.9),
    "vision": (0.05, 0.5),
    "hybrid": (0.1, 0.7),
}

DEFAULT_LAMBDA_ENT = 0.01


def default_envelope(kind: TaskKind) -> LengthEnvelope:
    """Default length envelope for a task kind."""
    l_min, l_low, l_high, l_max = DEFAULT_ENVELOPES[kind]
    return LengthEnvelope(l_min=l_min, l_low=l_low, l_high=l_high, l_max=l_max)


def fitted_envelope(kind: TaskKind, max_len: int) -> LengthEnvelope:
    """The kind's default envelope rescaled so l_max sits just past max_len.

    Thresholds keep their fraction of l_max, rounded, then nudged apart so the
    ordering l_min < l_low <= l_high < l_max survives at tiny scales.
    """
    if max_len < 1:
        raise UsageError(f"max_len must be at least 1. Got {max_len}")
    *inner, full = DEFAULT_ENVELOPES[kind]
    l_max = max(max_len + 1, 3)
    lo, low, high = (round(x / full * l_max) for x in inner)
    l_min = min(max(1, lo), l_max - 2)
    l_low = min(max(l_min + 1, low), l_max - 1)
    l_high = min(max(l_low, high), l_max - 1)
    return LengthEnvelope(l_min=l_min, l_low=l_low, l_high=l_high, l_max=l_max)


def fit_task_envelopes(tasks: Sequence[TaskSpec], max_len: int) -> List[TaskSpec]:
    """Swap kind-default envelopes for ones that fit responses of at most max_len tokens.

    Explicit envelopes are kept as given.
    """
    return [
        task.model_copy(update={"envelope": fitted_envelope(task.kind, max_len)})
        if task.envelope == default_envelope(task.kind)
        else task
        for task in tasks
    ]


def default_entropy_bounds(kind: TaskKind, lambda_ent: float = DEFAULT_LAMBDA_ENT) -> EntropyBounds:
    """Default entropy band for a task kind."""
    h_min, h_max = DEFAULT_ENTROPY_BANDS[kind]
    return EntropyBounds(h_min=h_min, h_max=h_max, lambda_ent=lambda_ent)


def length_reward(length: int, env: LengthEnvelope) -> float:
    """Trapezoid: 0 outside [l_min, l_max], linear ramps, 1 on [l_low, l_high].

    The ramps evaluate to exactly 0 at l_min and l_max, so the seams agree with
    the zero branch and the function is continuous.
    """
    if length < 0:
        raise UsageError(f"Response length must be non-negative. Got {length}")
    if length < env.l_min or length > env.l_max:
        return 0.0
    if length < env.l_low:
        return (length - env.l_min) / (env.l_low - env.l_min)
    if length <= env.l_high:
        return 1.0
    return (env.l_max - length) / (env.l_max - env.l_high)


def entropy_penalty(h_task: float, bounds: EntropyBounds) -> float:
    """Hinge distance of the task entropy from [h_min, h_max] (unweighted)."""
    h = validate_finite_scalar(h_task, "h_task")
    return max(0.0, h - bounds.h_max) + max(0.0, bounds.h_min - h)


def entropy_penalty_slope(h_task: float, bounds: EntropyBounds) -> float:
    """Subgradient of entropy_penalty in h: -1 below the band, +1 above, 0 inside."""
    if h_task > bounds.h_max:
        return 1.0
    if h_task < bounds.h_min:
        return -1.0
    return 0.0


def reward_components(
    accuracy: float,
    length: int,
    format_ok: bool,
    structure_ok: Optional[bool],
    env: LengthEnvelope,
) -> Tuple[float, float, float, float]:
    """Unweighted (accuracy, length, format, structure) channels; absent structure scores 0."""
    accuracy = validate_finite_scalar(accuracy, "accuracy")
    return (
        accuracy,
        length_reward(length, env),
        1.0 if format_ok else 0.0,
        1.0 if structure_ok else 0.0,
    )


def composite_reward(
    accuracy: float,
    length: int,
    format_ok: bool,
    structure_ok: Optional[bool],
    env: LengthEnvelope,
    weights: CompositeRewardWeights,
) -> float:
    """Weighted sum of the accuracy, length, format and structure channels."""
    return weighted_reward(reward_components(accuracy, length, format_ok, structure_ok, env), weights)


def weighted_reward(channels: Sequence[float], weights: CompositeRewardWeights) -> float:
    """Dot product of the four reward channels with their weights."""
    return sum(w * c for w, c in zip(weights.as_tuple(), channels))
