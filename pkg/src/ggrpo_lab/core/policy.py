"""Tabular autoregressive categorical policy and the clipped surrogate objective.

The policy keeps one logit table per task, indexed by (context state, symbol).
With context_order 0 there is a single state (a bandit per task); with order 1
state 0 is the start of a response and state k + 1 means the previous symbol
was k. Because the parameterization is a plain softmax table, the surrogate
gradient has an exact closed form that finite differences can check.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .errors import UsageError
from .models import AdvantageVector, ClipConfig, EntropyBounds, Rollout
from .shaping import entropy_penalty
from .validators import validate_same_length

logger = logging.getLogger(__name__)

Seed = int | Sequence[int]


class PolicyTable:
    """Softmax policy pi_theta over a small vocabulary, one table per task."""

    def __init__(
        self,
        task_ids: Sequence[str],
        vocab_size: int,
        context_order: int = 0,
        end_symbol: Optional[int] = None,
        logits: Optional[np.ndarray] = None,
    ):
        if not task_ids:
            raise UsageError("PolicyTable needs at least one task")
        if vocab_size < 1:
            raise UsageError(f"vocab_size must be positive. Got {vocab_size}")
        if context_order not in (0, 1):
            raise UsageError(f"context_order must be 0 or 1. Got {context_order}")
        if end_symbol is not None and not 0 <= end_symbol < vocab_size:
            raise UsageError(f"end_symbol {end_symbol} is outside the vocabulary")

        self.task_ids: List[str] = list(task_ids)
        self._task_index = {task_id: i for i, task_id in enumerate(self.task_ids)}
        self.vocab_size = vocab_size
        self.context_order = context_order
        self.end_symbol = end_symbol
        self.n_states = 1 if context_order == 0 else vocab_size + 1

        shape = (len(self.task_ids), self.n_states, vocab_size)
        if logits is None:
            self.logits = np.zeros(shape, dtype=np.float64)
        else:
            logits = np.array(logits, dtype=np.float64)
            if logits.shape != shape:
                raise UsageError(f"logits must have shape {shape}. Got {logits.shape}")
            if not np.all(np.isfinite(logits)):
                raise UsageError("logits must all be finite")
            self.logits = logits

    @classmethod
    def ramp(
        cls,
        task_ids: Sequence[str],
        vocab_size: int,
        context_order: int = 0,
        end_symbol: Optional[int] = None,
        scale: float = 0.0,
    ) -> "PolicyTable":
        """Deterministic initialization with logit -scale * k on symbol k (uniform at 0)."""
        policy = cls(task_ids, vocab_size, context_order, end_symbol)
        policy.logits[...] = -scale * np.arange(vocab_size, dtype=np.float64)
        return policy

    def copy(self) -> "PolicyTable":
        return self.with_logits(self.logits)

    def with_logits(self, logits: np.ndarray) -> "PolicyTable":
        """Same architecture, new parameters."""
        return PolicyTable(
            self.task_ids, self.vocab_size, self.context_order, self.end_symbol, logits
        )

    def task_index(self, task_id: str) -> int:
        try:
            return self._task_index[task_id]
        except KeyError:
            raise UsageError(f"Unknown task '{task_id}'. Known tasks: {self.task_ids}") from None

    def next_state(self, state: int, symbol: int) -> int:
        return 0 if self.context_order == 0 else symbol + 1

    def log_probs(self) -> np.ndarray:
        """log pi_theta(symbol | task, state) for every table entry."""
        return special.log_softmax(self.logits, axis=-1)

    def probabilities(self) -> np.ndarray:
        return special.softmax(self.logits, axis=-1)

    def states_of(self, tokens: Sequence[int]) -> np.ndarray:
        """Context state visited before emitting each token."""
        states = [0]
        for symbol in tokens[:-1]:
            states.append(self.next_state(states[-1], symbol))
        return np.asarray(states, dtype=np.intp)


def log_prob(policy: PolicyTable, task_id: str, state: int, symbol: int) -> float:
    """log pi_theta(symbol | task, state)."""
    return float(policy.log_probs()[policy.task_index(task_id), state, symbol])


def sample_rollout(policy: PolicyTable, task_id: str, max_len: int, seed: Seed) -> Rollout:
    """Sample one response until the end symbol or max_len.

    Records the sampling-time log-probabilities as the behavior policy's.
    Deterministic for a fixed seed (an int or a sequence of ints).
    """
    if max_len < 1:
        raise UsageError(f"max_len must be at least 1. Got {max_len}")
    rng = np.random.default_rng(seed)
    logp = policy.log_probs()[policy.task_index(task_id)]
    cdf = np.cumsum(np.exp(logp), axis=-1)

    state = 0
    tokens: List[int] = []
    logprobs: List[float] = []
    for _ in range(max_len):
        row = cdf[state]
        symbol = int(np.searchsorted(row, rng.random() * row[-1], side="right"))
        symbol = min(symbol, policy.vocab_size - 1)
        tokens.append(symbol)
        logprobs.append(min(0.0, float(logp[state, symbol])))
        if symbol == policy.end_symbol:
            break
        state = policy.next_state(state, symbol)
    return Rollout(task_id=task_id, tokens=tokens, behavior_logprobs=logprobs)


def _current_logprobs(
    policy: PolicyTable, rollout: Rollout, logp: np.ndarray
) -> Tuple[int, np.ndarray, np.ndarray]:
    task = policy.task_index(rollout.task_id)
    states = policy.states_of(rollout.tokens)
    tokens = np.asarray(rollout.tokens, dtype=np.intp)
    return task, states, logp[task, states, tokens]


def token_ratio(policy: PolicyTable, rollout: Rollout, t: int) -> float:
    """Importance ratio pi_theta / pi_theta_old of token t."""
    if not 0 <= t < len(rollout.tokens):
        raise UsageError(f"Token index {t} out of range for a {len(rollout.tokens)}-token rollout")
    _, _, current = _current_logprobs(policy, rollout, policy.log_probs())
    return float(np.exp(current[t] - rollout.behavior_logprobs[t]))


def _advantage_values(
    rollouts: Sequence[Rollout], advantages: AdvantageVector | Sequence[float]
) -> np.ndarray:
    values = advantages.values if isinstance(advantages, AdvantageVector) else advantages
    validate_same_length(rollouts, values, "rollouts", "advantages")
    if not rollouts:
        raise UsageError("Surrogate needs at least one rollout")
    return np.asarray(values, dtype=np.float64)


def clipped_surrogate(
    policy: PolicyTable,
    rollouts: Sequence[Rollout],
    advantages: AdvantageVector | Sequence[float],
    cfg: ClipConfig,
) -> float:
    """(1/G) sum_i (1/|y_i|) sum_t min(r * A_i, clip(r, 1-eps, 1+eps) * A_i).

    This is the objective to maximize.
    """
    adv = _advantage_values(rollouts, advantages)
    logp = policy.log_probs()
    total = 0.0
    for rollout, a in zip(rollouts, adv):
        _, _, current = _current_logprobs(policy, rollout, logp)
        ratio = np.exp(current - np.asarray(rollout.behavior_logprobs))
        clipped = np.clip(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon)
        total += float(np.mean(np.minimum(ratio * a, clipped * a)))
    return total / len(rollouts)


def surrogate_gradient(
    policy: PolicyTable,
    rollouts: Sequence[Rollout],
    advantages: AdvantageVector | Sequence[float],
    cfg: ClipConfig,
) -> np.ndarray:
    """Analytic gradient of clipped_surrogate with respect to the logits.

    A token contributes A_i * r * grad log pi when the unclipped branch is the
    minimum (ties included) and nothing otherwise.
    """
    adv = _advantage_values(rollouts, advantages)
    logp = policy.log_probs()
    probs = np.exp(logp)
    grad = np.zeros_like(policy.logits)
    group_size = len(rollouts)

    for rollout, a in zip(rollouts, adv):
        if a == 0.0:
            continue
        task, states, current = _current_logprobs(policy, rollout, logp)
        tokens = np.asarray(rollout.tokens, dtype=np.intp)
        ratio = np.exp(current - np.asarray(rollout.behavior_logprobs))
        clipped = np.clip(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon)
        active = ratio * a <= clipped * a
        coef = np.where(active, a * ratio, 0.0) / (len(tokens) * group_size)

        table = grad[task]
        np.add.at(table, (states, tokens), coef)
        np.add.at(table, states, -coef[:, None] * probs[task, states])
    return grad


def _context_entropies(policy: PolicyTable) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    logp = policy.log_probs()
    probs = np.exp(logp)
    entropies = np.maximum(-(probs * logp).sum(axis=-1), 0.0)
    return logp, probs, entropies


def _visited_contexts(
    policy: PolicyTable, rollouts: Sequence[Rollout]
) -> Tuple[np.ndarray, np.ndarray]:
    if not rollouts:
        raise UsageError("Entropy needs at least one rollout")
    tasks, states = [], []
    for rollout in rollouts:
        visited = policy.states_of(rollout.tokens)
        states.append(visited)
        tasks.append(np.full(visited.size, policy.task_index(rollout.task_id), dtype=np.intp))
    return np.concatenate(tasks), np.concatenate(states)


def mean_token_entropy(policy: PolicyTable, rollouts: Sequence[Rollout]) -> float:
    """Mean over all tokens of the full categorical entropy at the visited context (nats)."""
    tasks, states = _visited_contexts(policy, rollouts)
    _, _, entropies = _context_entropies(policy)
    return float(np.mean(entropies[tasks, states]))


def entropy_gradient(policy: PolicyTable, rollouts: Sequence[Rollout]) -> np.ndarray:
    """Gradient of mean_token_entropy with respect to the logits.

    dH(s)/dz_k = -p_k (log p_k + H(s)), weighted by how often context s was visited.
    """
    tasks, states = _visited_contexts(policy, rollouts)
    logp, probs, entropies = _context_entropies(policy)
    per_context = -probs * (logp + entropies[..., None])

    visits = np.zeros(policy.logits.shape[:2], dtype=np.float64)
    np.add.at(visits, (tasks, states), 1.0)
    return per_context * (visits / tasks.size)[..., None]


def total_loss(
    surrogate: float,
    h_per_task: dict[str, float],
    bounds_per_task: dict[str, EntropyBounds],
) -> float:
    """-surrogate + sum over tasks of lambda_ent * entropy_penalty (to be minimized)."""
    missing = sorted(set(h_per_task) - set(bounds_per_task))
    if missing:
        raise UsageError(f"No entropy bounds for tasks {missing}")
    penalty = sum(
        bounds_per_task[task].lambda_ent * entropy_penalty(h, bounds_per_task[task])
        for task, h in h_per_task.items()
    )
    return -surrogate + penalty


def finite_difference_gradient(
    fn: Callable[[PolicyTable], float], policy: PolicyTable, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function of the policy's logits."""
    grad = np.zeros_like(policy.logits)
    flat = policy.logits.reshape(-1)
    for j in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[j] += step
        minus[j] -= step
        f_plus = fn(policy.with_logits(plus.reshape(policy.logits.shape)))
        f_minus = fn(policy.with_logits(minus.reshape(policy.logits.shape)))
        grad.reshape(-1)[j] = (f_plus - f_minus) / (2.0 * step)
    return grad
