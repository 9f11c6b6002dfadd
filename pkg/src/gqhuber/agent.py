"""Tabular distributional Q-learning over quantile return representations.

The return distribution at each (state, action) is a uniform mixture of N
Diracs at learned values theta^(1..N), located at the midpoint fractions
tau_hat_i = (2i - 1) / (2N).  Training minimizes a pairwise asymmetric loss

    L = (1/N) sum_i sum_j |tau_hat_i - 1{u_ij < 0}| cost(u_ij),
    u_ij = y_j - theta_i,

by plain gradient descent on the visited (state, action) row, where ``cost``
is any kernel from :mod:`gqhuber.losses` and the targets y_j come from the
distributional Bellman backup y_j = r + gamma * theta_j(s', a').
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from .gaussian_w1 import w1_empirical
from .losses import LossSpec, cost, cost_grad
from .noise import NoiseStats, current_b, observe_batch
from .records import RunRecord

_EVAL_STEP_CAP = 100_000


class RiskMetric(enum.Enum):
    MEAN = "mean"
    CVAR95 = "cvar95"


class NonFiniteLossError(RuntimeError):
    """Raised when a training step produces a NaN or infinite loss."""


def midpoint_fractions(n: int) -> np.ndarray:
    """tau_hat_i = (2i - 1) / (2N) for i = 1..N."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)


@dataclass(frozen=True, eq=False)
class QuantileDistribution:
    """N quantile values with their midpoint fractions.

    Monotonicity of ``values`` is not enforced; quantile crossing is a
    known artifact of quantile regression and is surfaced through the
    ``crossings`` diagnostic instead.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"values must be a nonempty 1-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def fractions_mid(self) -> np.ndarray:
        return midpoint_fractions(self.values.size)

    @property
    def crossings(self) -> int:
        """Number of adjacent value pairs that are out of order."""
        return int(np.sum(np.diff(self.values) < 0))

    def sorted_values(self) -> np.ndarray:
        return np.sort(self.values)


class QuantileTable:
    """Dense (n_states, n_actions, n_quantiles) array of quantile values."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-d (S, A, N), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        self.values = values

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, n_quantiles: int) -> "QuantileTable":
        if min(n_states, n_actions, n_quantiles) < 1:
            raise ValueError("n_states, n_actions and n_quantiles must all be >= 1")
        return cls(np.zeros((n_states, n_actions, n_quantiles)))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    @property
    def n_quantiles(self) -> int:
        return self.values.shape[2]

    def dist(self, state: int, action: int) -> QuantileDistribution:
        return QuantileDistribution(self.values[state, action])

    def copy(self) -> "QuantileTable":
        return QuantileTable(self.values.copy())


@dataclass(frozen=True)
class TrainConfig:
    loss: LossSpec
    learning_rate: float
    discount: float
    epochs: int
    steps_per_epoch: int
    exploration_epsilon: float
    seed: int
    risk_metric: RiskMetric = RiskMetric.MEAN
    n_quantiles: int = 32
    eval_episodes: int = 0
    record_timing: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.steps_per_epoch < 1:
            raise ValueError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")
        if not (0.0 <= self.exploration_epsilon <= 1.0):
            raise ValueError(f"exploration_epsilon must lie in [0, 1], got {self.exploration_epsilon}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.n_quantiles < 1:
            raise ValueError(f"n_quantiles must be >= 1, got {self.n_quantiles}")
        if self.eval_episodes < 0:
            raise ValueError(f"eval_episodes must be >= 0, got {self.eval_episodes}")


def bellman_target(reward: float, next_dist, discount: float, terminal: bool) -> np.ndarray:
    """y_j = reward + discount * theta_j(s', a'), or a constant row at terminals."""
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    values = next_dist.values if isinstance(next_dist, QuantileDistribution) else np.asarray(next_dist, dtype=float)
    if terminal:
        return np.full(values.size, float(reward))
    return reward + discount * values


def _pairwise(values: np.ndarray, fractions: np.ndarray, targets: np.ndarray, loss: LossSpec):
    u = targets[None, :] - values[:, None]
    # indicator is 0 at u = 0: strict inequality
    weights = np.abs(fractions[:, None] - (u < 0.0))
    return u, weights


def _as_pred(pred):
    if isinstance(pred, QuantileDistribution):
        return pred.values, pred.fractions_mid
    values = np.asarray(pred, dtype=float)
    return values, midpoint_fractions(values.size)


def _check_targets(targets, n: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (n,):
        raise ValueError(f"targets must have shape ({n},), got {targets.shape}")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    return targets


def pairwise_loss(pred, targets, loss: LossSpec) -> float:
    """Mean over targets, summed over quantiles, of the weighted kernel cost."""
    values, fractions = _as_pred(pred)
    targets = _check_targets(targets, values.size)
    u, weights = _pairwise(values, fractions, targets, loss)
    return float((weights * cost(loss, u)).sum() / targets.size)


def pairwise_grad(pred, targets, loss: LossSpec) -> np.ndarray:
    """d pairwise_loss / d theta_i; note du/dtheta = -1."""
    values, fractions = _as_pred(pred)
    targets = _check_targets(targets, values.size)
    u, weights = _pairwise(values, fractions, targets, loss)
    return -(weights * cost_grad(loss, u)).sum(axis=1) / targets.size


def _tail_size(n: int) -> int:
    # floor(0.05 n) as exact integer math
    return n // 20


def policy_value(dist, metric: RiskMetric) -> float:
    """Mean or CVaR95 of a quantile distribution (or any 1-d value set).

    CVaR95 follows the lower-tail convention: the mean of the worst 5% of
    values, so more negative means riskier.  Requires at least 20 values
    so the tail holds at least one.
    """
    values = dist.values if isinstance(dist, QuantileDistribution) else np.asarray(dist, dtype=float)
    if metric is RiskMetric.MEAN:
        return float(values.mean())
    if metric is RiskMetric.CVAR95:
        if values.size < 20:
            raise ValueError(f"CVaR95 needs >= 20 values, got {values.size}")
        return float(np.sort(values)[: _tail_size(values.size)].mean())
    raise ValueError(f"unknown risk metric {metric!r}")


def empirical_risk(returns, metric: RiskMetric) -> float:
    """policy_value applied to sampled episode returns."""
    return policy_value(np.asarray(returns, dtype=float), metric)


def _action_values(row: np.ndarray, metric: RiskMetric) -> np.ndarray:
    if metric is RiskMetric.MEAN:
        return row.mean(axis=1)
    if row.shape[1] < 20:
        raise ValueError(f"CVaR95 needs >= 20 quantiles, got {row.shape[1]}")
    return np.sort(row, axis=1)[:, : _tail_size(row.shape[1])].mean(axis=1)


def greedy_action(table: QuantileTable, state: int, metric: RiskMetric) -> int:
    """Action with the best policy value; ties break to the lowest index."""
    return int(np.argmax(_action_values(table.values[state], metric)))


def _update_row(table, s, a, reward, s_next, terminal, spec, config, target_table, fractions, policy):
    src = target_table if target_table is not None else table
    if terminal:
        y = np.full(table.n_quantiles, float(reward))
    else:
        if policy is not None:
            a_next = int(policy[s_next])
        else:
            a_next = greedy_action(src, s_next, config.risk_metric)
        y = reward + config.discount * src.values[s_next, a_next]
    values = table.values[s, a]
    u, weights = _pairwise(values, fractions, y, spec)
    loss = float((weights * cost(spec, u)).sum() / y.size)
    grad = -(weights * cost_grad(spec, u)).sum(axis=1) / y.size
    table.values[s, a] = values - config.learning_rate * grad
    return loss, y


def td_step(table: QuantileTable, transition, config: TrainConfig, target_table=None) -> QuantileTable:
    """One gradient update on the (s, a) row; mutates and returns ``table``.

    ``transition`` is (state, action, reward, next_state, terminal).  When
    ``target_table`` is given, bootstrap values and the greedy next action
    come from it; otherwise from ``table`` itself.
    """
    s, a, reward, s_next, terminal = transition
    n_s, n_a = table.n_states, table.n_actions
    if not (0 <= s < n_s and 0 <= s_next < n_s and 0 <= a < n_a):
        raise IndexError(f"invalid transition indices (s={s}, a={a}, s'={s_next})")
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    fractions = midpoint_fractions(table.n_quantiles)
    _update_row(table, s, a, reward, s_next, terminal, config.loss, config, target_table, fractions, None)
    return table


def _eval_returns(table, env, episodes, config, rng, policy):
    env.seed(rng)
    returns = np.empty(episodes)
    for ep in range(episodes):
        state = env.reset()
        total = 0.0
        weight = 1.0
        for _ in range(_EVAL_STEP_CAP):
            if policy is not None:
                action = int(policy[state])
            else:
                action = greedy_action(table, state, config.risk_metric)
            state, reward, terminal = env.step(action)
            total += weight * reward
            weight *= config.discount
            if terminal:
                break
        else:
            raise RuntimeError(f"evaluation episode exceeded {_EVAL_STEP_CAP} steps")
        returns[ep] = total
    return returns


def train(env, config: TrainConfig, stats: NoiseStats, *, oracle_values=None,
          oracle_state: int = 0, oracle_action: int = 0, eval_env=None, policy=None):
    """Run epochs x steps_per_epoch transitions and collect per-epoch metrics.

    Exploration is epsilon-greedy on the configured risk metric; the
    bootstrap table is a frozen copy refreshed at each epoch start.  Every
    step feeds its predicted quantile row and Bellman target row to the
    noise estimator; when ``config.loss.adaptive`` is set the loss threshold
    is refreshed from the estimator once per epoch.

    ``oracle_values`` (sorted, length n_quantiles) enables the W1-to-oracle
    column, measured at (oracle_state, oracle_action).  ``policy`` fixes the
    behavior and bootstrap policy (state -> action), turning control into
    fixed-policy evaluation.  ``eval_env`` is required when
    ``config.eval_episodes > 0``: the risk column then comes from greedy
    rollouts on it instead of from the learned start-state distribution.

    Returns (table, records).
    """
    if config.eval_episodes > 0 and eval_env is None:
        raise ValueError("eval_episodes > 0 requires an eval_env")
    if oracle_values is not None:
        oracle_values = np.asarray(oracle_values, dtype=float)
        if oracle_values.shape != (config.n_quantiles,):
            raise ValueError(
                f"oracle_values must have shape ({config.n_quantiles},), got {oracle_values.shape}")

    root = np.random.SeedSequence(config.seed)
    explore_ss, env_ss, eval_ss = root.spawn(3)
    rng = np.random.default_rng(explore_ss)
    env.seed(np.random.default_rng(env_ss))

    table = QuantileTable.zeros(env.n_states, env.n_actions, config.n_quantiles)
    fractions = midpoint_fractions(config.n_quantiles)
    records = []
    state = env.reset()

    for epoch in range(config.epochs):
        t0 = time.perf_counter() if config.record_timing else 0.0
        spec = config.loss
        if spec.adaptive:
            spec = spec.with_threshold(current_b(stats))
        target_table = table.copy()
        loss_sum = 0.0
        for step in range(config.steps_per_epoch):
            if policy is not None:
                action = int(policy[state])
            elif rng.random() < config.exploration_epsilon:
                action = int(rng.integers(env.n_actions))
            else:
                action = greedy_action(table, state, config.risk_metric)
            next_state, reward, terminal = env.step(action)
            predicted = table.values[state, action].copy()
            loss, y = _update_row(table, state, action, reward, next_state, terminal,
                                  spec, config, target_table, fractions, policy)
            if not math.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss {loss} at epoch {epoch} step {step} "
                    f"(s={state}, a={action}, r={reward}, threshold={spec.threshold})")
            stats = observe_batch(stats, predicted, y)
            loss_sum += loss
            state = env.reset() if terminal else next_state

        if oracle_values is None:
            w1 = None
        else:
            w1 = w1_empirical(np.sort(table.values[oracle_state, oracle_action]), oracle_values)
        if config.eval_episodes > 0:
            eval_rng = np.random.default_rng(eval_ss.spawn(1)[0])
            returns = _eval_returns(table, eval_env, config.eval_episodes, config, eval_rng, policy)
            risk = empirical_risk(returns, config.risk_metric)
        else:
            start_action = int(policy[0]) if policy is not None else greedy_action(table, 0, config.risk_metric)
            risk = policy_value(table.dist(0, start_action), config.risk_metric)
        ms = (time.perf_counter() - t0) * 1000.0 if config.record_timing else 0.0
        records.append(RunRecord(epoch=epoch, loss=loss_sum / config.steps_per_epoch,
                                 w1_oracle=w1, risk=risk, b=current_b(stats), ms=ms))
    return table, records
