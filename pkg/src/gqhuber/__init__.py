"""Generalized quantile Huber losses with a noise-driven threshold estimate.

The loss family interpolates between quantile regression and smooth
Wasserstein-derived kernels; its threshold has a closed-form data estimate
b = |sigma_pred - sigma_target|.  Desk-scale tabular distributional RL and
a miniature SABR hedging market exercise the whole stack end to end.
"""

from .agent import (
    NonFiniteLossError,
    QuantileDistribution,
    QuantileTable,
    RiskMetric,
    TrainConfig,
    bellman_target,
    empirical_risk,
    greedy_action,
    midpoint_fractions,
    pairwise_grad,
    pairwise_loss,
    policy_value,
    td_step,
    train,
)
from .charts import emit_chart
from .environments import (
    MdpEnv,
    MdpModel,
    SabrConfig,
    SabrHedgingEnv,
    bs_call,
    chain_mdp,
    do_nothing_cvar,
    do_nothing_returns,
    load_mdp,
    oracle_return_distribution,
    oracle_truncation_bound,
    quantiles_from_support,
)
from .experiment import ConfigError, parse_experiment_config, run_experiment, summarize
from .gaussian_w1 import Gaussian, w1_closed, w1_empirical, w1_quadrature
from .losses import LossSpec, LossVariant, c_gl, c_gl_grad, c_gla, cost, cost_grad, huber
from .noise import NoiseStats, current_b, observe_batch
from .records import RECORD_COLUMNS, RunRecord, read_records_csv, write_records_csv

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Gaussian",
    "LossSpec",
    "LossVariant",
    "MdpEnv",
    "MdpModel",
    "NoiseStats",
    "NonFiniteLossError",
    "QuantileDistribution",
    "QuantileTable",
    "RECORD_COLUMNS",
    "RiskMetric",
    "RunRecord",
    "SabrConfig",
    "SabrHedgingEnv",
    "TrainConfig",
    "bellman_target",
    "bs_call",
    "c_gl",
    "c_gl_grad",
    "c_gla",
    "chain_mdp",
    "cost",
    "cost_grad",
    "current_b",
    "do_nothing_cvar",
    "do_nothing_returns",
    "emit_chart",
    "empirical_risk",
    "greedy_action",
    "huber",
    "load_mdp",
    "midpoint_fractions",
    "observe_batch",
    "oracle_return_distribution",
    "oracle_truncation_bound",
    "pairwise_grad",
    "pairwise_loss",
    "parse_experiment_config",
    "policy_value",
    "quantiles_from_support",
    "read_records_csv",
    "run_experiment",
    "summarize",
    "td_step",
    "train",
    "w1_closed",
    "w1_empirical",
    "w1_quadrature",
    "write_records_csv",
]
