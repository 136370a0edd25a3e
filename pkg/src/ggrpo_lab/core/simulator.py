"""Synthetic multi-task environments and the seeded training loop.

Each task hides a target symbol sequence and scores sampled responses under one
reward topology. The trainer samples round-robin groups from a shared
PolicyTable, shapes rewards, filters uniform groups, computes advantages with
the configured estimator and takes a gradient ascent step on the clipped
surrogate minus the entropy-band penalty.

Every random draw comes from a NumPy generator seeded with
[seed, step, group, response, stream], so runs are bit-reproducible.
"""

import logging
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .advantage import advantage_batch, advantage_summary, ema_advantage_batch
from .converters import (
    column_max,
    equity_ratios,
    metrics_frame,
    ratio_stats,
    task_column,
    window_mean,
)
from .errors import UsageError
from .models import (
    AdvantageEstimator,
    AdvantageVector,
    ClipConfig,
    ComparisonReport,
    EmaState,
    EntropyBounds,
    EstimatorSummary,
    Rollout,
    RolloutGroup,
    StepMetrics,
    TaskSpec,
    TaskStepMetrics,
    TrainerConfig,
)
from .policy import (
    PolicyTable,
    clipped_surrogate,
    entropy_gradient,
    mean_token_entropy,
    sample_rollout,
    surrogate_gradient,
    total_loss,
)
from .shaping import (
    entropy_penalty,
    entropy_penalty_slope,
    fit_task_envelopes,
    reward_components,
    weighted_reward,
)

logger = logging.getLogger(__name__)

# Substream tags appended to the per-response seed.
_SAMPLE_STREAM = 0
_SCORE_STREAM = 1


def content_tokens(rollout: Rollout, end_symbol: Optional[int] = None) -> List[int]:
    """Response tokens without the terminating end symbol."""
    tokens = list(rollout.tokens)
    if end_symbol is not None and tokens and tokens[-1] == end_symbol:
        tokens.pop()
    return tokens


def multiset_iou(tokens: Sequence[int], target: Sequence[int]) -> float:
    """|y ∩ target| / |y ∪ target| over token multisets."""
    a, b = Counter(tokens), Counter(target)
    union = sum((a | b).values())
    if union == 0:
        return 0.0
    return sum((a & b).values()) / union


def score_rollout(
    task: TaskSpec, rollout: Rollout, seed, end_symbol: Optional[int] = None
) -> float:
    """Accuracy reward of one response under the task's topology."""
    rng = np.random.default_rng(seed)
    tokens = content_tokens(rollout, end_symbol)
    exact = tokens == list(task.target)

    match task.topology:
        case "binary":
            return 1.0 if exact else 0.0
        case "continuous-iou":
            return multiset_iou(tokens, task.target)
        case "heavy-tail":
            spike = task.outlier_magnitude if rng.random() < task.outlier_prob else 0.0
            return multiset_iou(tokens, task.target) + spike
        case "bimodal-split":
            return task.reward_scale if exact else 0.0
        case "scaled-continuous":
            return task.reward_scale * (0.5 * multiset_iou(tokens, task.target) + 0.5 * rng.random())
    raise UsageError(f"Unknown topology '{task.topology}'")


def is_uniform(group: RolloutGroup) -> bool:
    return all(r == group.rewards[0] for r in group.rewards)


def dynamic_filter(groups: Sequence[RolloutGroup]) -> Tuple[List[RolloutGroup], int]:
    """Drop groups whose rewards are all equal; survivors keep their order."""
    survivors = [g for g in groups if not is_uniform(g)]
    return survivors, len(groups) - len(survivors)


def validate_tasks(config: TrainerConfig, tasks: Sequence[TaskSpec]) -> None:
    """Checks that need both the trainer settings and the task list."""
    if not tasks:
        raise UsageError("Training needs at least one task")
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise UsageError(f"task_id values must be unique. Got {ids}")
    if config.batch_groups % len(tasks):
        raise UsageError(
            f"batch_groups ({config.batch_groups}) must be a multiple of the number "
            f"of tasks ({len(tasks)}) so every task gets the same number of groups"
        )
    for task in tasks:
        bad = [s for s in task.target if s >= config.vocab_size or s == config.end_symbol]
        if bad:
            raise UsageError(f"Task '{task.task_id}' target uses symbols {bad} outside the vocabulary")


class _SampledGroup:
    __slots__ = ("task", "group", "rollouts")

    def __init__(self, task: TaskSpec, group: RolloutGroup, rollouts: List[Rollout]):
        self.task = task
        self.group = group
        self.rollouts = rollouts


class Trainer:
    """Owns the policy and the per-task EMA states of one training run."""

    def __init__(self, config: TrainerConfig, tasks: Sequence[TaskSpec]):
        validate_tasks(config, tasks)
        self.config = config
        self.tasks = fit_task_envelopes(tasks, config.max_len)
        self.policy = PolicyTable.ramp(
            [t.task_id for t in self.tasks],
            config.vocab_size,
            config.context_order,
            config.end_symbol,
            config.init_logit_scale,
        )
        self.clip = ClipConfig(epsilon=config.clip_epsilon)
        # trainer.lambda_ent weights every task's band penalty
        self.bounds: Dict[str, EntropyBounds] = {
            t.task_id: t.entropy_bounds.model_copy(update={"lambda_ent": config.lambda_ent})
            for t in self.tasks
        }
        self.ema_states: Dict[str, EmaState] = {}

    def run(self) -> List[StepMetrics]:
        cfg = self.config
        logger.info(
            "Training %d steps with %s on tasks %s",
            cfg.steps,
            cfg.estimator.value,
            [t.task_id for t in self.tasks],
        )
        history = []
        for step in range(cfg.steps):
            metrics = self.step(step)
            history.append(metrics)
            logger.debug("step %d surrogate=%.6g grad_norm=%.6g", step, metrics.surrogate, metrics.grad_norm)
            if (step + 1) % cfg.log_every == 0 or step + 1 == cfg.steps:
                logger.info(
                    "step %d mean reward %s",
                    step,
                    {t.task_id: round(t.mean_reward, 4) for t in metrics.tasks},
                )
        return history

    def _sample(self, step: int, old: PolicyTable) -> List[_SampledGroup]:
        cfg = self.config
        sampled = []
        for g in range(cfg.batch_groups):
            task = self.tasks[g % len(self.tasks)]
            rollouts, rewards, lengths, components = [], [], [], []
            for i in range(cfg.group_size):
                seed = [cfg.seed, step, g, i]
                rollout = sample_rollout(old, task.task_id, cfg.max_len, seed + [_SAMPLE_STREAM])
                accuracy = score_rollout(task, rollout, seed + [_SCORE_STREAM], cfg.end_symbol)
                if cfg.end_symbol is None:
                    format_ok = len(rollout.tokens) == cfg.max_len
                else:
                    format_ok = rollout.tokens[-1] == cfg.end_symbol
                structure_ok = None
                if task.structured:
                    structure_ok = len(content_tokens(rollout, cfg.end_symbol)) == len(task.target)
                channels = reward_components(
                    accuracy, len(rollout.tokens), format_ok, structure_ok, task.envelope
                )
                reward = weighted_reward(channels, cfg.reward_weights)
                rollouts.append(rollout.model_copy(update={"reward": reward}))
                rewards.append(reward)
                lengths.append(len(rollout.tokens))
                components.append(list(channels))
            group = RolloutGroup(
                task_id=task.task_id,
                query_id=f"q{step}-{g}",
                rewards=rewards,
                response_lengths=lengths,
                reward_components=components,
            )
            sampled.append(_SampledGroup(task, group, rollouts))
        return sampled

    def _advantages(self, groups: List[RolloutGroup]) -> List[AdvantageVector]:
        cfg = self.config
        if not groups:
            return []
        if cfg.estimator is AdvantageEstimator.EMA_GRPO:
            vectors, self.ema_states = ema_advantage_batch(
                groups, self.ema_states, cfg.ema_alpha, cfg.stability_epsilon
            )
            return vectors
        return advantage_batch(
            groups,
            cfg.estimator,
            pooled=cfg.ggrpo_pooling == "task",
            epsilon=cfg.stability_epsilon,
            weights=cfg.reward_weights,
        )

    def _objective(
        self,
        policy: PolicyTable,
        survivors: List[_SampledGroup],
        advantages: List[AdvantageVector],
        by_task: Dict[str, List[Rollout]],
    ) -> Tuple[float, Dict[str, float], np.ndarray]:
        """Surrogate, per-task entropies and the ascent direction at `policy`."""
        grad = np.zeros_like(policy.logits)
        surrogate = 0.0
        if survivors:
            for item, adv in zip(survivors, advantages):
                surrogate += clipped_surrogate(policy, item.rollouts, adv, self.clip)
                grad += surrogate_gradient(policy, item.rollouts, adv, self.clip)
            surrogate /= len(survivors)
            grad /= len(survivors)

        entropies = {}
        for task_id, rollouts in by_task.items():
            h = mean_token_entropy(policy, rollouts)
            entropies[task_id] = h
            bounds = self.bounds[task_id]
            slope = entropy_penalty_slope(h, bounds)
            if slope and bounds.lambda_ent:
                grad -= bounds.lambda_ent * slope * entropy_gradient(policy, rollouts)
        return surrogate, entropies, grad

    def step(self, step: int) -> StepMetrics:
        """Sample, score, filter, estimate, update; metrics describe the pre-update policy."""
        cfg = self.config
        old = self.policy.copy()
        sampled = self._sample(step, old)

        if cfg.dynamic_filter:
            kept, removed = dynamic_filter([item.group for item in sampled])
            kept_ids = {id(g) for g in kept}
            survivors = [item for item in sampled if id(item.group) in kept_ids]
            logger.debug("step %d filtered %d uniform groups", step, removed)
        else:
            survivors = list(sampled)
        advantages = self._advantages([item.group for item in survivors])

        by_task: Dict[str, List[Rollout]] = {t.task_id: [] for t in self.tasks}
        for item in sampled:
            by_task[item.task.task_id].extend(item.rollouts)

        surrogate, entropies, grad = self._objective(self.policy, survivors, advantages, by_task)
        grad_norm = float(np.linalg.norm(grad))
        loss = total_loss(surrogate, entropies, self.bounds)
        for inner in range(cfg.inner_steps):
            if inner:
                _, _, grad = self._objective(self.policy, survivors, advantages, by_task)
            self.policy.logits += cfg.learning_rate * grad

        tasks = [
            self._task_metrics(task, sampled, survivors, advantages, entropies[task.task_id])
            for task in self.tasks
        ]
        return StepMetrics(
            step=step,
            tasks=tasks,
            surrogate=surrogate,
            total_loss=loss,
            grad_norm=grad_norm,
            ema_states=dict(self.ema_states),
        )

    def _task_metrics(
        self,
        task: TaskSpec,
        sampled: List[_SampledGroup],
        survivors: List[_SampledGroup],
        advantages: List[AdvantageVector],
        entropy: float,
    ) -> TaskStepMetrics:
        groups = [item.group for item in sampled if item.task.task_id == task.task_id]
        kept = [
            adv.values
            for item, adv in zip(survivors, advantages)
            if item.task.task_id == task.task_id
        ]
        rewards = np.concatenate([g.rewards for g in groups])
        lengths = np.concatenate([g.response_lengths for g in groups])
        channels = np.concatenate([g.reward_components for g in groups]).mean(axis=0)
        summary = advantage_summary(np.concatenate(kept) if kept else [])
        penalty = entropy_penalty(entropy, self.bounds[task.task_id])
        state = self.ema_states.get(task.task_id)

        return TaskStepMetrics(
            task_id=task.task_id,
            mean_reward=float(rewards.mean()),
            accuracy=float(channels[0]),
            length_reward=float(channels[1]),
            format_reward=float(channels[2]),
            structure_reward=float(channels[3]),
            adv_mean=summary.mean,
            adv_var=summary.variance,
            adv_max=summary.maximum,
            w2=summary.w2,
            entropy=entropy,
            entropy_penalty=penalty,
            in_band=penalty == 0.0,
            mean_length=float(lengths.mean()),
            groups=len(groups),
            filtered_groups=len(groups) - len(kept),
            ema_sigma=state.sigma if state is not None else None,
        )


def train(config: TrainerConfig, tasks: Sequence[TaskSpec]) -> List[StepMetrics]:
    """Run `config.steps` seeded training steps; steps=0 returns no metrics."""
    return Trainer(config, tasks).run()


def summarize_run(
    estimator: AdvantageEstimator,
    metrics: Sequence[StepMetrics],
    clean: Optional[Sequence[StepMetrics]] = None,
) -> EstimatorSummary:
    """Final rewards, equity ratios, W2 endpoints and outlier deltas of one run."""
    frame = metrics_frame(metrics)
    final = window_mean(frame, "mean_reward")
    adv_max = column_max(frame, "adv_max")
    w2_final = {t: task_column(frame, t, "w2")[-1] for t in final}

    outlier_delta = outlier_adv_max_delta = None
    if clean is not None:
        clean_frame = metrics_frame(clean)
        clean_final = window_mean(clean_frame, "mean_reward")
        clean_max = column_max(clean_frame, "adv_max")
        outlier_delta = {t: final[t] - clean_final[t] for t in final}
        outlier_adv_max_delta = {t: adv_max[t] - clean_max[t] for t in adv_max}

    return EstimatorSummary(
        estimator=estimator,
        final_reward=final,
        w2_final=w2_final,
        adv_max=adv_max,
        outlier_delta=outlier_delta,
        outlier_adv_max_delta=outlier_adv_max_delta,
        **ratio_stats(equity_ratios(frame)),
    )


def compare_estimators(
    config: TrainerConfig,
    tasks: Sequence[TaskSpec],
    estimators: Optional[Sequence[AdvantageEstimator | str]] = None,
    outlier_sensitivity: bool = True,
) -> ComparisonReport:
    """Train once per estimator with identical seeds and summarize each run.

    With `outlier_sensitivity` every estimator is also run with outlier_prob 0
    on all tasks, and the summaries carry the with-minus-without deltas.
    """
    validate_tasks(config, tasks)
    estimators = [AdvantageEstimator(e) for e in (estimators or AdvantageEstimator)]
    clean_tasks = [t.model_copy(update={"outlier_prob": 0.0}) for t in tasks]

    runs: Dict[str, List[StepMetrics]] = {}
    clean_runs: Dict[str, List[StepMetrics]] = {}
    summaries: Dict[str, EstimatorSummary] = {}
    for estimator in estimators:
        cfg = config.model_copy(update={"estimator": estimator})
        logger.info("Comparing estimator %s", estimator.value)
        runs[estimator.value] = train(cfg, tasks)
        if outlier_sensitivity:
            clean_runs[estimator.value] = train(cfg, clean_tasks)
        summaries[estimator.value] = summarize_run(
            estimator, runs[estimator.value], clean_runs.get(estimator.value)
        )
    return ComparisonReport(summaries=summaries, runs=runs, clean_runs=clean_runs)
