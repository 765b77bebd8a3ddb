"""Superhedging under proportional transaction costs, computed exactly on
finite trees and checked against Monte Carlo on simulated paths."""

from .market import Claim, MarketModel, build_tree, simulate_paths
from .pricing import find_consistent_Z, supermartingale_check
from .solvency import ExchangeMatrix, build_cone, decompose, physical_cone
from .superhedge import (
    EpsQuery,
    backward_sets,
    concentration_check,
    dpp_check,
    eps_value_membership,
    oracle_membership,
)

__version__ = "0.1.0"

__all__ = [
    "ExchangeMatrix",
    "build_cone",
    "decompose",
    "physical_cone",
    "MarketModel",
    "Claim",
    "build_tree",
    "simulate_paths",
    "find_consistent_Z",
    "supermartingale_check",
    "backward_sets",
    "dpp_check",
    "oracle_membership",
    "EpsQuery",
    "eps_value_membership",
    "concentration_check",
]
