"""Mediator-free cheap-talk realization of irrational correlated and communication equilibria."""

from .numerics import Real, eval_expression, parse_expression
from .game import (BayesianGame, Game, ProfileDistribution, verify_communication_equilibrium,
                   verify_correlated_equilibrium)
from .decomposition import decompose, solve_beta
from .protocol import ProtocolConfig, run_protocol, run_round, setup_bayesian, setup_complete

__version__ = "0.1.0"

__all__ = [
    "Real", "eval_expression", "parse_expression", "Game", "BayesianGame", "ProfileDistribution",
    "verify_correlated_equilibrium", "verify_communication_equilibrium", "decompose", "solve_beta",
    "ProtocolConfig", "setup_complete", "setup_bayesian", "run_round", "run_protocol",
]
