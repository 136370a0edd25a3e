"""Library core: normal quantiles, advantage estimators, shaping, policy and simulator."""

from .errors import ConfigError, ConfigValueError, DomainError, GGRPOError, UsageError
from .models import (
    AdvantageEstimator,
    AdvantageVector,
    ClipConfig,
    ComparisonReport,
    CompositeRewardWeights,
    EmaState,
    EntropyBounds,
    EstimatorSummary,
    ExperimentConfig,
    LengthEnvelope,
    Rollout,
    RolloutGroup,
    SortedSample,
    StepMetrics,
    TaskSpec,
    TaskStepMetrics,
    TrainerConfig,
)
from .quantiles import (
    empirical_cdf,
    normal_cdf,
    normal_quantile,
    normal_quantiles,
    rank_quantiles,
    wasserstein2_to_normal,
)
from .advantage import (
    AdvantageSummary,
    advantage_batch,
    advantage_summary,
    dr_grpo_advantage,
    ema_advantage_batch,
    ema_grpo_advantage,
    g_grpo_advantage,
    gdpo_advantage,
    grpo_advantage,
)
from .shaping import (
    composite_reward,
    default_entropy_bounds,
    default_envelope,
    entropy_penalty,
    entropy_penalty_slope,
    fit_task_envelopes,
    fitted_envelope,
    length_reward,
    reward_components,
    weighted_reward,
)
from .policy import (
    PolicyTable,
    clipped_surrogate,
    entropy_gradient,
    finite_difference_gradient,
    log_prob,
    mean_token_entropy,
    sample_rollout,
    surrogate_gradient,
    token_ratio,
    total_loss,
)
from .simulator import Trainer, compare_estimators, dynamic_filter, score_rollout, train
from .formatters import format_json, format_result

__all__ = [
    # Errors
    "GGRPOError",
    "DomainError",
    "UsageError",
    "ConfigError",
    "ConfigValueError",
    # Models
    "AdvantageEstimator",
    "AdvantageVector",
    "ClipConfig",
    "ComparisonReport",
    "CompositeRewardWeights",
    "EmaState",
    "EntropyBounds",
    "EstimatorSummary",
    "ExperimentConfig",
    "LengthEnvelope",
    "Rollout",
    "RolloutGroup",
    "SortedSample",
    "StepMetrics",
    "TaskSpec",
    "TaskStepMetrics",
    "TrainerConfig",
    # Quantiles
    "empirical_cdf",
    "normal_cdf",
    "normal_quantile",
    "normal_quantiles",
    "rank_quantiles",
    "wasserstein2_to_normal",
    # Advantage
    "AdvantageSummary",
    "advantage_batch",
    "advantage_summary",
    "dr_grpo_advantage",
    "ema_advantage_batch",
    "ema_grpo_advantage",
    "g_grpo_advantage",
    "gdpo_advantage",
    "grpo_advantage",
    # Shaping
    "composite_reward",
    "default_entropy_bounds",
    "default_envelope",
    "entropy_penalty",
    "entropy_penalty_slope",
    "fit_task_envelopes",
    "fitted_envelope",
    "length_reward",
    "reward_components",
    "weighted_reward",
    # Policy
    "PolicyTable",
    "clipped_surrogate",
    "entropy_gradient",
    "finite_difference_gradient",
    "log_prob",
    "mean_token_entropy",
    "sample_rollout",
    "surrogate_gradient",
    "token_ratio",
    "total_loss",
    # Simulator
    "Trainer",
    "compare_estimators",
    "dynamic_filter",
    "score_rollout",
    "train",
    # Formatters
    "format_json",
    "format_result",
]
