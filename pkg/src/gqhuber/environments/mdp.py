"""Finite MDPs with enumerable return distributions.

Rewards are finite-support distributions per (state, action), so the exact
return distribution under a fixed policy can be recovered by exhaustive
path enumeration.  That oracle is what training-quality metrics (W1 to the
true distribution) are measured against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

_ROW_TOL = 1e-12
_MERGE_DECIMALS = 12
_PATH_BUDGET = 10_000_000


@dataclass(frozen=True, eq=False)
class MdpModel:
    """Tabular MDP (S, A, P, r, gamma) with stochastic finite-support rewards.

    transition: (S, A, S) array, rows summing to 1 for non-terminal states.
    reward_values / reward_probs: (S, A, K) arrays giving each (s, a) a
    distribution over at most K atoms (pad with probability 0).
    terminal: (S,) boolean; entering a terminal state ends the episode and
    stepping from one is an error.
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    reward_values: np.ndarray
    reward_probs: np.ndarray
    terminal: np.ndarray
    discount: float
    start: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be >= 1")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if not (0 <= self.start < self.n_states):
            raise ValueError(f"start state {self.start} out of range")
        transition = np.asarray(self.transition, dtype=float)
        rvals = np.asarray(self.reward_values, dtype=float)
        rprobs = np.asarray(self.reward_probs, dtype=float)
        terminal = np.asarray(self.terminal, dtype=bool)
        shape = (self.n_states, self.n_actions, self.n_states)
        if transition.shape != shape:
            raise ValueError(f"transition must have shape {shape}, got {transition.shape}")
        if rvals.shape != rprobs.shape or rvals.ndim != 3 or rvals.shape[:2] != shape[:2]:
            raise ValueError("reward tables must share shape (S, A, K)")
        if terminal.shape != (self.n_states,):
            raise ValueError(f"terminal must have shape ({self.n_states},)")
        if not (np.all(np.isfinite(transition)) and np.all(np.isfinite(rvals)) and np.all(np.isfinite(rprobs))):
            raise ValueError("model tables must be finite")
        if np.any(transition < 0) or np.any(rprobs < 0):
            raise ValueError("probabilities must be nonnegative")
        live = ~terminal
        rowsums = transition[live].sum(axis=2)
        if not np.allclose(rowsums, 1.0, rtol=0.0, atol=_ROW_TOL):
            worst = float(np.abs(rowsums - 1.0).max())
            raise ValueError(f"transition rows must sum to 1 +- {_ROW_TOL}, worst error {worst:g}")
        rsums = rprobs[live].sum(axis=2)
        if not np.allclose(rsums, 1.0, rtol=0.0, atol=_ROW_TOL):
            raise ValueError("reward probabilities must sum to 1 per live (s, a)")
        if terminal.all():
            raise ValueError("at least one state must be non-terminal")
        if terminal[self.start]:
            raise ValueError("start state must not be terminal")
        for arr in (transition, rvals, rprobs, terminal):
            arr.flags.writeable = False
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward_values", rvals)
        object.__setattr__(self, "reward_probs", rprobs)
        object.__setattr__(self, "terminal", terminal)


class MdpEnv:
    """Sampling wrapper around an MdpModel with the reset/step protocol."""

    def __init__(self, model: MdpModel):
        self.model = model
        self.n_states = model.n_states
        self.n_actions = model.n_actions
        # inverse-CDF sampling off precomputed cumulative rows
        self._t_cum = np.cumsum(model.transition, axis=2)
        self._r_cum = np.cumsum(model.reward_probs, axis=2)
        self._rng = np.random.default_rng(0)
        self._state = None

    def seed(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def reset(self) -> int:
        self._state = self.model.start
        return self._state

    def step(self, action: int):
        if self._state is None:
            raise RuntimeError("call reset() before step()")
        s = self._state
        if self.model.terminal[s]:
            raise RuntimeError(f"cannot step from terminal state {s}")
        if not (0 <= action < self.n_actions):
            raise IndexError(f"action {action} out of range")
        next_state = min(int(np.searchsorted(self._t_cum[s, action], self._rng.random(), side="right")),
                         self.n_states - 1)
        k = min(int(np.searchsorted(self._r_cum[s, action], self._rng.random(), side="right")),
                self._r_cum.shape[2] - 1)
        reward = float(self.model.reward_values[s, action, k])
        terminal = bool(self.model.terminal[next_state])
        self._state = None if terminal else next_state
        return next_state, reward, terminal


def _reward_atoms(support) -> tuple[np.ndarray, np.ndarray]:
    pairs = [(float(v), float(p)) for v, p in support]
    values = np.array([v for v, _ in pairs])
    probs = np.array([p for _, p in pairs])
    if probs.min() < 0 or abs(probs.sum() - 1.0) > _ROW_TOL:
        raise ValueError("reward support probabilities must be nonnegative and sum to 1")
    return values, probs


def chain_mdp(length: int, noise, discount: float, stop_reward: float = -1.0) -> MdpModel:
    """Linear chain of ``length`` reward steps plus a bail-out action.

    Action 0 advances one state and draws a reward from ``noise`` (a
    sequence of (value, probability) pairs); after ``length`` advances the
    episode ends.  Action 1 stops immediately for a flat ``stop_reward``,
    so episodes are bounded under any policy.
    """
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    values, probs = _reward_atoms(noise)
    n_states = length + 1
    n_actions = 2
    k = max(values.size, 1)
    transition = np.zeros((n_states, n_actions, n_states))
    reward_values = np.zeros((n_states, n_actions, k))
    reward_probs = np.zeros((n_states, n_actions, k))
    terminal = np.zeros(n_states, dtype=bool)
    terminal[length] = True
    for s in range(length):
        transition[s, 0, s + 1] = 1.0
        reward_values[s, 0, : values.size] = values
        reward_probs[s, 0, : values.size] = probs
        transition[s, 1, length] = 1.0
        reward_values[s, 1, 0] = stop_reward
        reward_probs[s, 1, 0] = 1.0
    return MdpModel(n_states, n_actions, transition, reward_values, reward_probs,
                    terminal, discount, start=0)


def oracle_truncation_bound(mdp: MdpModel, horizon: int) -> float:
    """Upper bound on return mass ignored by truncating paths at ``horizon``.

    sum_{t >= horizon} gamma^t r_max; infinite when gamma = 1 (then the
    enumeration is exact only if every path terminates inside the horizon,
    which :func:`oracle_return_distribution` checks).
    """
    r_max = float(np.abs(mdp.reward_values[mdp.reward_probs > 0]).max(initial=0.0))
    if r_max == 0.0:
        return 0.0
    if mdp.discount >= 1.0:
        return math.inf
    return mdp.discount ** horizon * r_max / (1.0 - mdp.discount)


def _count_paths(mdp: MdpModel, policy: np.ndarray, start: int, horizon: int) -> int:
    """Leaf count of the enumeration tree, by depth-indexed dynamic program."""
    counts = np.ones(mdp.n_states, dtype=object)  # python ints: no overflow
    for _ in range(horizon):
        nxt = np.ones(mdp.n_states, dtype=object)
        for s in range(mdp.n_states):
            if mdp.terminal[s]:
                continue
            a = int(policy[s])
            branches = 0
            n_rewards = int(np.count_nonzero(mdp.reward_probs[s, a]))
            for s_next in np.nonzero(mdp.transition[s, a])[0]:
                branches += n_rewards * counts[s_next]
            nxt[s] = branches
        counts = nxt
    return int(counts[start])


def oracle_return_distribution(mdp: MdpModel, policy, start: int, horizon: int):
    """Exact finite-support return distribution by exhaustive enumeration.

    ``policy`` maps each state to an action.  Paths still alive at
    ``horizon`` contribute their accumulated value; use
    :func:`oracle_truncation_bound` to size the bias.  Raises when the
    enumeration would exceed the 1e7-path budget.  Returns a list of
    (value, probability) sorted by value, probabilities summing to 1.
    """
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (mdp.n_states,):
        raise ValueError(f"policy must map all {mdp.n_states} states")
    if not (0 <= start < mdp.n_states) or mdp.terminal[start]:
        raise ValueError(f"start state {start} must be a live state")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")

    total_paths = _count_paths(mdp, policy, start, horizon)
    if total_paths > _PATH_BUDGET:
        raise RuntimeError(
            f"enumeration needs {total_paths} paths, over the {_PATH_BUDGET} budget")

    acc: dict[float, float] = {}

    def settle(value: float, prob: float):
        key = round(value, _MERGE_DECIMALS)
        acc[key] = acc.get(key, 0.0) + prob

    # stack of (state, depth, discount weight, accumulated value, probability)
    stack = [(start, 0, 1.0, 0.0, 1.0)]
    while stack:
        s, depth, weight, value, prob = stack.pop()
        if mdp.terminal[s] or depth == horizon:
            settle(value, prob)
            continue
        a = int(policy[s])
        row = mdp.transition[s, a]
        rvals = mdp.reward_values[s, a]
        rprobs = mdp.reward_probs[s, a]
        for s_next in np.nonzero(row)[0]:
            p_next = row[s_next]
            for k in np.nonzero(rprobs)[0]:
                stack.append((int(s_next), depth + 1, weight * mdp.discount,
                              value + weight * rvals[k], prob * p_next * rprobs[k]))

    total = sum(acc.values())
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"enumeration probabilities sum to {total}, not 1")
    return sorted(acc.items())


def quantiles_from_support(dist, n: int) -> np.ndarray:
    """Project a finite-support distribution onto n midpoint quantiles.

    Evaluates the quantile function at tau_hat_i = (2i - 1) / (2n); this is
    the W1-optimal n-Dirac approximation of the distribution.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.array([v for v, _ in dist])
    probs = np.array([p for _, p in dist])
    if np.any(np.diff(values) <= 0):
        raise ValueError("support values must be strictly increasing")
    cum = np.cumsum(probs)
    taus = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    idx = np.searchsorted(cum, taus, side="left")
    idx = np.minimum(idx, values.size - 1)
    return values[idx]


def load_mdp(path: str) -> MdpModel:
    """Read an MdpModel from a JSON file.

    Schema::

        {
          "n_states": 3, "n_actions": 2, "discount": 0.9,
          "terminal": [2], "start": 0,
          "transitions": [{"state": 0, "action": 0, "next": [[1, 1.0]]}, ...],
          "rewards": [{"state": 0, "action": 0, "support": [[-1, 0.5], [1, 0.5]]}, ...]
        }

    Transition and reward entries are required for every live (state,
    action) pair; terminal states take neither.
    """
    with open(path) as fh:
        raw = json.load(fh)
    try:
        n_states = int(raw["n_states"])
        n_actions = int(raw["n_actions"])
        discount = float(raw["discount"])
        terminal_states = list(raw["terminal"])
        start = int(raw.get("start", 0))
        transitions = raw["transitions"]
        rewards = raw["rewards"]
    except KeyError as exc:
        raise ValueError(f"mdp file missing required field {exc}") from None

    terminal = np.zeros(n_states, dtype=bool)
    for s in terminal_states:
        terminal[int(s)] = True

    k = max((len(entry["support"]) for entry in rewards), default=1)
    transition = np.zeros((n_states, n_actions, n_states))
    reward_values = np.zeros((n_states, n_actions, k))
    reward_probs = np.zeros((n_states, n_actions, k))
    for entry in transitions:
        s, a = int(entry["state"]), int(entry["action"])
        for s_next, p in entry["next"]:
            transition[s, a, int(s_next)] = float(p)
    for entry in rewards:
        s, a = int(entry["state"]), int(entry["action"])
        values, probs = _reward_atoms(entry["support"])
        reward_values[s, a, : values.size] = values
        reward_probs[s, a, : values.size] = probs
    return MdpModel(n_states, n_actions, transition, reward_values, reward_probs,
                    terminal, discount, start=start)
