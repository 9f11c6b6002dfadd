"""Miniature option-hedging market driven by SABR dynamics.

One vanilla call is hedged with the underlying over a short episode.  The
tabular agent observes (time step, current hedge position) as a discrete
state; spot and vol stay internal, so the problem is deliberately aliased
but still rewards moving toward a delta-like position.  Reward per step is
the change in hedged portfolio value minus proportional transaction costs,
so episode return is total hedging P&L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..agent import RiskMetric, empirical_risk


def _norm_cdf(x: float) -> float:
    return float(special.ndtr(x))


def bs_call(spot: float, strike: float, vol: float, ttm: float) -> float:
    """Black-Scholes call value (zero rate); intrinsic at expiry or zero vol."""
    if spot <= 0 or strike <= 0:
        raise ValueError("spot and strike must be positive")
    if ttm < 0:
        raise ValueError("ttm must be >= 0")
    if ttm == 0.0 or vol <= 0.0:
        return max(spot - strike, 0.0)
    sd = vol * math.sqrt(ttm)
    d1 = math.log(spot / strike) / sd + 0.5 * sd
    return spot * _norm_cdf(d1) - strike * _norm_cdf(d1 - sd)


def _default_grid() -> tuple:
    return tuple(np.round(np.linspace(0.0, 1.0, 21), 10))


@dataclass(frozen=True)
class SabrConfig:
    """Market and episode parameters for the hedging miniature.

    ``hedge_grid`` lists the allowed positions in units of the underlying;
    it must contain 0 so a do-nothing policy exists.  ``forward_payoff``
    replaces the call by a position in the underlying itself (value = spot),
    the degenerate liability a unit hedge offsets exactly.
    """

    spot0: float = 100.0
    vol0: float = 0.2
    beta: float = 1.0
    rho: float = -0.4
    nu: float = 0.6
    maturity: float = 0.25
    steps: int = 10
    strike: float = 100.0
    cost_rate: float = 0.005
    hedge_grid: tuple = field(default_factory=_default_grid)
    forward_payoff: bool = False

    def __post_init__(self):
        if self.spot0 <= 0 or self.strike <= 0:
            raise ValueError("spot0 and strike must be positive")
        if self.vol0 < 0 or self.nu < 0:
            raise ValueError("vol0 and nu must be >= 0")
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.maturity <= 0 or self.steps < 1:
            raise ValueError("maturity must be > 0 and steps >= 1")
        if self.cost_rate < 0:
            raise ValueError("cost_rate must be >= 0")
        if len(self.hedge_grid) == 0:
            raise ValueError("hedge_grid must be nonempty")
        if 0.0 not in self.hedge_grid:
            raise ValueError("hedge_grid must contain the flat position 0.0")


class SabrHedgingEnv:
    """Episodic hedging environment with the reset/step protocol.

    State index = time_step * len(grid) + position_index; the start state
    (t = 0, flat position) is index of 0.0 in the grid.  An action is the
    index of the position to hold over the coming step; trading to it costs
    cost_rate * |change| * spot.
    """

    def __init__(self, config: SabrConfig):
        self.config = config
        self.grid = np.asarray(config.hedge_grid, dtype=float)
        self.n_actions = self.grid.size
        self.n_states = (config.steps + 1) * self.grid.size
        self._flat = int(np.nonzero(self.grid == 0.0)[0][0])
        self._dt = config.maturity / config.steps
        self._rng = np.random.default_rng(0)
        self._t = None

    def seed(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def _liability(self, spot: float, vol: float, ttm: float) -> float:
        if self.config.forward_payoff:
            return spot
        return bs_call(spot, self.config.strike, vol, ttm)

    def reset(self) -> int:
        self._t = 0
        self._pos_idx = self._flat
        self._spot = self.config.spot0
        self._vol = self.config.vol0
        return self._state_index()

    def _state_index(self) -> int:
        return self._t * self.grid.size + self._pos_idx

    def step(self, action: int):
        if self._t is None:
            raise RuntimeError("call reset() before step()")
        if self._t >= self.config.steps:
            raise RuntimeError("episode is over; call reset()")
        if not (0 <= action < self.n_actions):
            raise IndexError(f"action {action} out of range")
        cfg = self.config
        new_pos = float(self.grid[action])
        old_pos = float(self.grid[self._pos_idx])
        cost = cfg.cost_rate * abs(new_pos - old_pos) * self._spot

        ttm = cfg.maturity - self._t * self._dt
        liability_before = self._liability(self._spot, self._vol, ttm)

        z1 = self._rng.standard_normal()
        z2 = cfg.rho * z1 + math.sqrt(1.0 - cfg.rho**2) * self._rng.standard_normal()
        # log-Euler on spot with effective lognormal vol sigma * S^(beta-1);
        # exact for beta = 1 and positive for any beta
        sigma_ln = self._vol * self._spot ** (cfg.beta - 1.0)
        sqrt_dt = math.sqrt(self._dt)
        spot_next = self._spot * math.exp(sigma_ln * sqrt_dt * z1 - 0.5 * sigma_ln**2 * self._dt)
        vol_next = max(self._vol + cfg.nu * self._vol * sqrt_dt * z2, 0.0)

        ttm_next = ttm - self._dt
        if ttm_next < 1e-12:
            ttm_next = 0.0
        liability_after = self._liability(spot_next, vol_next, ttm_next)
        reward = new_pos * (spot_next - self._spot) - (liability_after - liability_before) - cost

        self._t += 1
        self._pos_idx = action
        self._spot = spot_next
        self._vol = vol_next
        terminal = self._t == cfg.steps
        state = self._state_index()
        if terminal:
            self._t = None
        return state, reward, terminal


def do_nothing_returns(config: SabrConfig, episodes: int, seed: int) -> np.ndarray:
    """Total episode rewards under the hold-flat policy (undiscounted)."""
    env = SabrHedgingEnv(config)
    env.seed(np.random.default_rng(np.random.SeedSequence(seed)))
    flat = env._flat
    out = np.empty(episodes)
    for ep in range(episodes):
        env.reset()
        total = 0.0
        for _ in range(config.steps):
            _, reward, _ = env.step(flat)
            total += reward
        out[ep] = total
    return out


def do_nothing_cvar(config: SabrConfig, episodes: int, seed: int) -> float:
    """CVaR95 of the do-nothing baseline; the bar every learned policy must beat."""
    return empirical_risk(do_nothing_returns(config, episodes, seed), RiskMetric.CVAR95)
