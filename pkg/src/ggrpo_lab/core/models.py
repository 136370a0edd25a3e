"""Pydantic domain models with invariant validation.

Every record that crosses a module boundary (rollout groups, advantage vectors,
shaping parameters, experiment configuration, step metrics) is defined here so the
library, the MCP tools and the CLI share one set of checks.
"""

import math
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ConfigValueError


class AdvantageEstimator(str, Enum):
    """Advantage estimator selector (string valued so configs stay readable)."""

    GRPO = "grpo"
    DR_GRPO = "drgrpo"
    EMA_GRPO = "emagrpo"
    G_GRPO = "ggrpo"
    GDPO = "gdpo"


TaskKind = Literal["reasoning", "vision", "hybrid"]
Topology = Literal["binary", "continuous-iou", "heavy-tail", "bimodal-split", "scaled-continuous"]

# Order of the reward channels in RolloutGroup.reward_components.
REWARD_CHANNELS = ("accuracy", "length", "format", "structure")


def _check_finite(values: List[float], name: str) -> List[float]:
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{name} must all be finite")
    return values


class SortedSample(BaseModel):
    """Finite, non-decreasing real sample (the support of an empirical CDF)."""

    model_config = ConfigDict(frozen=True)

    values: List[float] = Field(description="Sample values in non-decreasing order")

    @field_validator("values")
    @classmethod
    def validate_sorted(cls, v: List[float]) -> List[float]:
        _check_finite(v, "Sample values")
        if any(a > b for a, b in zip(v, v[1:])):
            raise ValueError("Sample values must be sorted in non-decreasing order")
        return v

    @property
    def count(self) -> int:
        return len(self.values)

    @classmethod
    def of(cls, values) -> "SortedSample":
        """Build a sample from unsorted values."""
        return cls(values=sorted(float(v) for v in values))


class RolloutGroup(BaseModel):
    """One query's G sampled responses with their scalar rewards."""

    model_config = ConfigDict(frozen=True)

    task_id: str = Field(description="Task label the query belongs to", min_length=1)
    query_id: str = Field(default="q0", description="Query label")
    rewards: List[float] = Field(description="Scalar reward per response", min_length=2)
    response_lengths: List[int] = Field(description="Token count per response")
    reward_components: Optional[List[List[float]]] = Field(
        default=None,
        description="Per-response unweighted reward channels (accuracy, length, format, structure)",
    )

    @field_validator("rewards")
    @classmethod
    def validate_rewards(cls, v: List[float]) -> List[float]:
        return _check_finite(v, "Rewards")

    @field_validator("response_lengths")
    @classmethod
    def validate_lengths(cls, v: List[int]) -> List[int]:
        if any(n < 1 for n in v):
            raise ValueError("Response lengths must be positive")
        return v

    @model_validator(mode="after")
    def validate_alignment(self) -> "RolloutGroup":
        if len(self.response_lengths) != len(self.rewards):
            raise ValueError(
                f"rewards and response_lengths must have the same length. "
                f"Got {len(self.rewards)} and {len(self.response_lengths)}"
            )
        if self.reward_components is not None:
            if len(self.reward_components) != len(self.rewards):
                raise ValueError("reward_components needs one row per response")
            if any(len(row) != len(REWARD_CHANNELS) for row in self.reward_components):
                raise ValueError(f"Each reward_components row needs {len(REWARD_CHANNELS)} channels")
            for row in self.reward_components:
                _check_finite(row, "Reward components")
        return self

    @property
    def size(self) -> int:
        return len(self.rewards)


class AdvantageVector(BaseModel):
    """Per-response advantages produced by one estimator."""

    model_config = ConfigDict(frozen=True)

    values: List[float] = Field(description="Advantage per response, in input order")
    estimator: AdvantageEstimator = Field(description="Estimator that produced the values")


class EmaState(BaseModel):
    """Per-task exponential moving average of the group reward standard deviation."""

    model_config = ConfigDict(frozen=True)

    task_id: str = Field(description="Task the running estimate belongs to")
    sigma: float = Field(default=0.0, ge=0.0, description="Current smoothed standard deviation")
    decay: float = Field(default=0.9, ge=0.0, lt=1.0, description="Smoothing factor alpha")
    initialized: bool = Field(default=False, description="False until the first observation")


class LengthEnvelope(BaseModel):
    """Trapezoidal response-length reward thresholds (token counts)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    l_min: int = Field(gt=0, description="Absolute minimum valid length")
    l_low: int = Field(gt=0, description="Start of the optimal plateau")
    l_high: int = Field(gt=0, description="End of the optimal plateau")
    l_max: int = Field(gt=0, description="Absolute maximum valid length")

    @model_validator(mode="after")
    def validate_order(self) -> "LengthEnvelope":
        if not (self.l_min < self.l_low <= self.l_high < self.l_max):
            raise ValueError(
                "Envelope must satisfy l_min < l_low <= l_high < l_max. "
                f"Got ({self.l_min}, {self.l_low}, {self.l_high}, {self.l_max})"
            )
        return self


class EntropyBounds(BaseModel):
    """Exploration band in nats per token plus the penalty weight."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    h_min: float = Field(ge=0.0, description="Entropy floor (collapse guard)")
    h_max: float = Field(ge=0.0, description="Entropy ceiling (explosion guard)")
    lambda_ent: float = Field(default=0.01, ge=0.0, description="Penalty weight")

    @model_validator(mode="after")
    def validate_band(self) -> "EntropyBounds":
        if self.h_min > self.h_max:
            raise ValueError(f"h_min must not exceed h_max. Got ({self.h_min}, {self.h_max})")
        return self


class CompositeRewardWeights(BaseModel):
    """Weights of the accuracy, length, format and structure reward channels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    accuracy_w: float = Field(default=1.0, ge=0.0)
    length_w: float = Field(default=0.1, ge=0.0)
    format_w: float = Field(default=0.1, ge=0.0)
    structure_w: float = Field(default=0.1, ge=0.0)

    @model_validator(mode="after")
    def validate_positive(self) -> "CompositeRewardWeights":
        if max(self.accuracy_w, self.length_w, self.format_w, self.structure_w) <= 0.0:
            raise ValueError("At least one reward weight must be strictly positive")
        return self

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.accuracy_w, self.length_w, self.format_w, self.structure_w)


class ClipConfig(BaseModel):
    """Clipping range of the surrogate objective."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=0.2, gt=0.0, lt=1.0)


class Rollout(BaseModel):
    """One sampled response with the behavior policy's per-token log-probabilities."""

    model_config = ConfigDict(frozen=True)

    task_id: str
    tokens: List[int] = Field(min_length=1)
    behavior_logprobs: List[float]
    reward: Optional[float] = None

    @model_validator(mode="after")
    def validate_logprobs(self) -> "Rollout":
        if len(self.behavior_logprobs) != len(self.tokens):
            raise ValueError("behavior_logprobs needs one entry per token")
        if any(lp > 0.0 or math.isnan(lp) for lp in self.behavior_logprobs):
            raise ValueError("behavior_logprobs must all be <= 0")
        return self


class TaskSpec(BaseModel):
    """Synthetic task: reward topology, hidden target and shaping parameters."""

    model_config = ConfigDict(extra="forbid")

    task_id: str = Field(min_length=1)
    topology: Topology = "binary"
    kind: TaskKind = "reasoning"
    target: List[int] = Field(min_length=1, description="Hidden ground-truth symbol sequence")
    reward_scale: float = Field(default=1.0, gt=0.0)
    outlier_prob: float = Field(default=0.0, ge=0.0, lt=0.5)
    outlier_magnitude: float = Field(default=100.0, gt=0.0)
    structured: bool = Field(default=False, description="Whether the structure reward applies")
    envelope: Optional[LengthEnvelope] = None
    entropy_bounds: Optional[EntropyBounds] = None

    @field_validator("target")
    @classmethod
    def validate_target(cls, v: List[int]) -> List[int]:
        if any(s < 0 for s in v):
            raise ValueError("Target symbols must be non-negative")
        return v

    @model_validator(mode="after")
    def fill_kind_defaults(self) -> "TaskSpec":
        from .shaping import default_entropy_bounds, default_envelope

        if self.envelope is None:
            self.envelope = default_envelope(self.kind)
        if self.entropy_bounds is None:
            self.entropy_bounds = default_entropy_bounds(self.kind)
        return self


class TrainerConfig(BaseModel):
    """Training-loop hyperparameters (desk-scale defaults)."""

    model_config = ConfigDict(extra="forbid")

    group_size: int = Field(default=8, ge=2)
    batch_groups: int = Field(default=16, ge=1)
    steps: int = Field(default=500, ge=0)
    learning_rate: float = Field(default=0.05, gt=0.0)
    clip_epsilon: float = Field(default=0.2, gt=0.0, lt=1.0)
    ema_alpha: float = Field(default=0.9, ge=0.0, lt=1.0)
    stability_epsilon: float = Field(default=1e-6, gt=0.0)
    estimator: AdvantageEstimator = AdvantageEstimator.G_GRPO
    dynamic_filter: bool = True
    seed: int = Field(default=7, ge=0)
    vocab_size: int = Field(default=4, ge=2)
    context_order: Literal[0, 1] = 0
    max_len: int = Field(default=4, ge=1)
    end_symbol: Optional[int] = None
    init_logit_scale: float = Field(default=0.0, ge=0.0)
    inner_steps: int = Field(default=1, ge=1)
    lambda_ent: float = Field(default=0.01, ge=0.0)
    reward_weights: CompositeRewardWeights = Field(default_factory=CompositeRewardWeights)
    ggrpo_pooling: Literal["task", "group"] = "task"
    log_every: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def validate_end_symbol(self) -> "TrainerConfig":
        if self.end_symbol is not None and not (0 <= self.end_symbol < self.vocab_size):
            raise ValueError(
                f"end_symbol must index the vocabulary [0, {self.vocab_size}). Got {self.end_symbol}"
            )
        return self


class ExperimentConfig(BaseModel):
    """Top-level experiment file: trainer settings, tasks and output options."""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["train", "compare"] = "train"
    output_dir: Optional[str] = None
    emit_plots_data: bool = True
    compare_outlier_sensitivity: bool = True
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    tasks: List[TaskSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def validate_tasks(self) -> "ExperimentConfig":
        ids = [t.task_id for t in self.tasks]
        for i, task_id in enumerate(ids):
            if task_id in ids[:i]:
                raise ConfigValueError(
                    f"task_id values must be unique. Got {ids}", ("tasks", i, "task_id")
                )
        for i, task in enumerate(self.tasks):
            bad = [s for s in task.target if s >= self.trainer.vocab_size or s == self.trainer.end_symbol]
            if bad:
                raise ConfigValueError(
                    f"Task '{task.task_id}' target uses symbols {bad} outside the "
                    f"content vocabulary (vocab_size={self.trainer.vocab_size}, "
                    f"end_symbol={self.trainer.end_symbol})",
                    ("tasks", i, "target"),
                )
        if self.trainer.batch_groups % len(self.tasks):
            raise ConfigValueError(
                f"batch_groups ({self.trainer.batch_groups}) must be a multiple of the number "
                f"of tasks ({len(self.tasks)}) so every task gets the same number of groups",
                ("trainer", "batch_groups"),
            )
        return self


class TaskStepMetrics(BaseModel):
    """Per-task observations for one training step."""

    task_id: str
    mean_reward: float
    accuracy: float
    length_reward: float
    format_reward: float
    structure_reward: float
    adv_mean: float
    adv_var: float = Field(ge=0.0)
    adv_max: float
    w2: float = Field(ge=0.0)
    entropy: float = Field(ge=0.0)
    entropy_penalty: float = Field(ge=0.0)
    in_band: bool
    mean_length: float
    groups: int = Field(ge=0)
    filtered_groups: int = Field(ge=0)
    ema_sigma: Optional[float] = None


class StepMetrics(BaseModel):
    """Everything recorded for one training step."""

    step: int = Field(ge=0)
    tasks: List[TaskStepMetrics]
    surrogate: float
    total_loss: float
    grad_norm: float = Field(ge=0.0)
    ema_states: Dict[str, EmaState] = Field(default_factory=dict)

    def task(self, task_id: str) -> TaskStepMetrics:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


class EstimatorSummary(BaseModel):
    """Headline numbers of one estimator's run inside a comparison."""

    estimator: AdvantageEstimator
    final_reward: Dict[str, float] = Field(description="Trailing-window mean reward per task")
    equity_mean: Optional[float] = Field(description="Mean per-step advantage-variance ratio")
    equity_max: Optional[float] = Field(description="Largest per-step advantage-variance ratio")
    equity_above_threshold: float = Field(
        ge=0.0, le=1.0, description="Fraction of defined steps with ratio above 5"
    )
    w2_final: Dict[str, float] = Field(description="Advantage W2 to N(0, 1) at the last step")
    adv_max: Dict[str, float] = Field(description="Largest advantage per task over the run")
    outlier_delta: Optional[Dict[str, float]] = Field(
        default=None, description="Final reward with outliers minus the outlier-free run"
    )
    outlier_adv_max_delta: Optional[Dict[str, float]] = Field(
        default=None, description="Advantage maximum with outliers minus the outlier-free run"
    )


class ComparisonReport(BaseModel):
    """All estimators run under identical seeds."""

    summaries: Dict[str, EstimatorSummary]
    runs: Dict[str, List[StepMetrics]]
    clean_runs: Dict[str, List[StepMetrics]] = Field(default_factory=dict)
