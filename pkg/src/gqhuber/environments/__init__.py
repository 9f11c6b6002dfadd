from .mdp import (
    MdpEnv,
    MdpModel,
    chain_mdp,
    load_mdp,
    oracle_return_distribution,
    oracle_truncation_bound,
    quantiles_from_support,
)
from .sabr import SabrConfig, SabrHedgingEnv, bs_call, do_nothing_cvar, do_nothing_returns

__all__ = [
    "MdpEnv",
    "MdpModel",
    "chain_mdp",
    "load_mdp",
    "oracle_return_distribution",
    "oracle_truncation_bound",
    "quantiles_from_support",
    "SabrConfig",
    "SabrHedgingEnv",
    "bs_call",
    "do_nothing_cvar",
    "do_nothing_returns",
]
