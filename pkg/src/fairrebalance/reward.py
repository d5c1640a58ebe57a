"""Reward arithmetic for one rebalancing epoch.

The scalar cores are compiled so the training kernel and the public helpers
evaluate exactly the same expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .city import DEFAULT_ACTIONS, CategoryProfile, Period, ScenarioConfig

__all__ = [
    "RewardTerms",
    "clutter_loss",
    "local_reward",
    "fair_local_reward",
    "global_reward",
    "fair_reward_batch",
    "check_action",
]


@dataclass(frozen=True)
class RewardTerms:
    rebalance_cost: float
    failure_penalty: float
    fairness_penalty: float
    clutter_penalty: float

    @property
    def total(self) -> float:
        return -self.rebalance_cost - self.failure_penalty - self.fairness_penalty - self.clutter_penalty


@numba.njit(cache=True)
def _clutter(vehicles, mu, zeta):
    return max(0.0, abs(vehicles - mu) - zeta)


@numba.njit(cache=True)
def _reward_total(action, failures, vehicles_after, mu, zeta, phi_c, chi_c, alpha, xi, beta):
    moved = 1.0 if action != 0 else 0.0
    return (-alpha * phi_c * moved
            - failures
            - beta * chi_c * failures
            - xi * _clutter(vehicles_after, mu, zeta))


def clutter_loss(vehicles_after_action: float, mu: float, zeta: float) -> float:
    """Penalty for deviating from expected demand by more than ``zeta``: ``max(0, |v - mu| - zeta)``."""
    if zeta < 0:
        raise ValueError(f"zeta must be nonnegative, got {zeta}")
    return float(_clutter(float(vehicles_after_action), float(mu), float(zeta)))


def check_action(action: int, actions=None) -> int:
    allowed = DEFAULT_ACTIONS if actions is None else actions
    if action not in allowed:
        raise ValueError(f"invalid action {action!r}; allowed actions are {tuple(allowed)}")
    return int(action)


def _terms(action, failures, vehicles_after, profile, scenario, period, beta):
    check_action(action, scenario.actions)
    if failures < 0:
        raise ValueError(f"failures must be nonnegative, got {failures}")
    period = Period(period)
    mu = profile.rates(period)[1]
    return RewardTerms(
        rebalance_cost=scenario.alpha * profile.phi * (1.0 if action != 0 else 0.0),
        failure_penalty=float(failures),
        fairness_penalty=beta * profile.chi * failures,
        clutter_penalty=scenario.xi * clutter_loss(vehicles_after, mu, profile.zeta(period)),
    )


def local_reward(action: int, failures: int, vehicles_after: int, profile: CategoryProfile,
                 scenario: ScenarioConfig, period: Period) -> RewardTerms:
    """Operator reward of one area for one epoch, without the fairness term.

    ``period`` is the half-day that follows the action; its expected departures
    are the demand the clutter term compares against.
    """
    return _terms(action, failures, vehicles_after, profile, scenario, period, 0.0)


def fair_local_reward(action: int, failures: int, vehicles_after: int, profile: CategoryProfile,
                      scenario: ScenarioConfig, period: Period) -> RewardTerms:
    """Local reward with failures reweighted by ``scenario.beta * chi``."""
    return _terms(action, failures, vehicles_after, profile, scenario, period, scenario.beta)


def fair_reward_batch(actions, failures, vehicles_after, categories, periods,
                      scenario: ScenarioConfig) -> RewardTerms:
    """Vectorised :func:`fair_local_reward` over arrays of areas.

    All inputs broadcast together; ``categories`` are 1-based and ``periods``
    name the window that follows each action. The returned terms hold arrays.
    """
    actions = np.asarray(actions)
    failures = np.asarray(failures, dtype=float)
    bad = ~np.isin(actions, scenario.actions)
    if bad.any():
        raise ValueError(f"invalid actions {np.unique(actions[bad]).tolist()}; "
                         f"allowed actions are {scenario.actions}")
    if (failures < 0).any():
        raise ValueError("failures must be nonnegative")
    c = np.asarray(categories) - 1
    p = np.asarray(periods)
    mu = scenario.mu_array()[c, p]
    zeta = scenario.zeta_array()[c, p]
    chi = scenario.chi_array()[c]
    ell = np.maximum(0.0, np.abs(np.asarray(vehicles_after, dtype=float) - mu) - zeta)
    return RewardTerms(
        rebalance_cost=scenario.alpha * scenario.phi_array()[c] * (actions != 0),
        failure_penalty=failures,
        fairness_penalty=scenario.beta * chi * failures,
        clutter_penalty=scenario.xi * ell,
    )


def global_reward(terms: Iterable[RewardTerms]) -> float:
    """Sum of per-area totals; batched terms contribute the sum of their arrays."""
    return float(sum(np.sum(t.total) for t in terms))
