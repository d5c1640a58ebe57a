"""Estimator interface around training and greedy evaluation."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .city import ScenarioConfig, build_scenario, load_scenario
from .experiment import EVAL_SEED_OFFSET
from .learn import PolicySet, evaluate, train
from .metrics import EvalReport


class FairRebalancer(BaseEstimator):
    """Fairness-aware rebalancing policy learned by factorised Q-learning.

    ``fit`` simulates the city described by ``scenario`` and trains one
    Q-table per area category; it takes no data because the simulator
    generates its own experience. ``predict`` maps rows of
    ``(category, period, vehicles)`` to greedy rebalancing actions.

    Parameters
    ----------
    scenario : int, ScenarioConfig or path, default=5
        Built-in scenario size, a full configuration, or an override file.
    beta : float, default=0.0
        Weight of the fairness penalty on failures.
    train_days, eval_days : int, optional
        Override the scenario's horizons.
    epsilon_decay : float, optional
        Override the per-update exploration decrement.
    random_state : int, default=0
        Training seed; evaluation uses ``random_state + 2**32``.
    """

    def __init__(self, scenario=5, beta=0.0, train_days=None, eval_days=None,
                 epsilon_decay=None, random_state=0):
        self.scenario = scenario
        self.beta = beta
        self.train_days = train_days
        self.eval_days = eval_days
        self.epsilon_decay = epsilon_decay
        self.random_state = random_state

    def _resolve_scenario(self) -> ScenarioConfig:
        if isinstance(self.scenario, ScenarioConfig):
            base = self.scenario
        elif isinstance(self.scenario, (str, Path)):
            base = load_scenario(self.scenario)
        else:
            base = build_scenario(int(self.scenario))
        changes = {"beta": float(self.beta)}
        for name in ("train_days", "eval_days", "epsilon_decay"):
            value = getattr(self, name)
            if value is not None:
                changes[name] = value
        return replace(base, **changes)

    def fit(self, X=None, y=None):
        self.scenario_ = self._resolve_scenario()
        self.policies_: PolicySet = train(self.scenario_, int(self.random_state))
        self.n_categories_ = self.scenario_.M
        self.training_rewards_ = self.policies_.training_rewards
        return self

    def _validate_states(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns (category, period, vehicles), got {X.shape[1]}")
        cat, period, veh = X.T
        if cat.min() < 1 or cat.max() > self.n_categories_:
            raise ValueError(f"category must lie in [1, {self.n_categories_}]")
        if period.min() < 0 or period.max() > 1:
            raise ValueError("period must be 0 (morning) or 1 (evening)")
        if veh.min() < 0 or veh.max() > self.scenario_.sigma:
            raise ValueError(f"vehicles must lie in [0, {self.scenario_.sigma}]")
        return X

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "policies_")
        X = self._validate_states(X)
        q = self.policies_.stacked()
        idx = np.argmax(q[X[:, 0] - 1, X[:, 1], X[:, 2]], axis=1)
        return np.asarray(self.scenario_.actions)[idx]

    def evaluate(self, seed=None) -> EvalReport:
        check_is_fitted(self, "policies_")
        seed = int(self.random_state) + EVAL_SEED_OFFSET if seed is None else int(seed)
        report = evaluate(self.policies_, self.scenario_, seed)
        return replace(report, seed=int(self.random_state))

    def score(self, X=None, y=None) -> float:
        """Negative global service cost of a greedy evaluation run (higher is better)."""
        return -self.evaluate().global_cost
