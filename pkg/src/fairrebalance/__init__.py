"""Fairness-aware rebalancing of dockless micromobility fleets with tabular Q-learning."""

from .city import CategoryProfile, ConfigError, Period, ScenarioConfig, build_scenario, load_scenario
from .estimator import FairRebalancer
from .learn import PolicySet, QTable, evaluate, load_policies, rollout, save_policies, train
from .metrics import EvalReport, gini, pareto_front
from .stochastic import RandomSource, SkellamParams, skellam_pmf

__version__ = "0.1.0"

__all__ = [
    "CategoryProfile",
    "ConfigError",
    "EvalReport",
    "FairRebalancer",
    "Period",
    "PolicySet",
    "QTable",
    "RandomSource",
    "ScenarioConfig",
    "SkellamParams",
    "build_scenario",
    "evaluate",
    "gini",
    "load_policies",
    "load_scenario",
    "pareto_front",
    "rollout",
    "save_policies",
    "skellam_pmf",
    "train",
]
