"""Factorised tabular Q-learning with one agent per area category.

Areas of the same category share a Q-table: every member area contributes one
update per rebalancing epoch. The state of an area is the half-day that
follows the decision together with its current vehicle count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .city import Period, ScenarioConfig
from .reward import _reward_total, check_action
from .sim import SimTrace, _window, initial_vehicles
from .stochastic import RandomSource

__all__ = [
    "QTable",
    "PolicySet",
    "PolicyMismatchError",
    "select_action",
    "q_update",
    "train",
    "rollout",
    "evaluate",
    "save_policies",
    "load_policies",
]

FORMAT_VERSION = 1


class PolicyMismatchError(ValueError):
    """Policies were trained for a different scenario shape."""


@dataclass
class QTable:
    """Action values of one category agent, indexed ``[period, vehicles, action]``."""

    category: int
    values: np.ndarray
    actions: tuple[int, ...]
    epsilon_decay: float
    update_count: int = 0

    @classmethod
    def zeros(cls, category: int, sigma: int, actions: Sequence[int], epsilon_decay: float) -> "QTable":
        return cls(category, np.zeros((2, sigma + 1, len(actions))), tuple(actions), epsilon_decay)

    @property
    def sigma(self) -> int:
        return self.values.shape[1] - 1

    @property
    def epsilon(self) -> float:
        return max(0.0, 1.0 - self.epsilon_decay * self.update_count)

    def action_index(self, action: int) -> int:
        check_action(action, self.actions)
        return self.actions.index(action)


@numba.njit(cache=True)
def _select(qrow, eps, gen):
    # Draw order: one uniform for the exploration test (skipped when eps == 0),
    # then one uniform for the random action or for breaking an argmax tie.
    n = qrow.shape[0]
    if eps > 0.0 and gen.random() < eps:
        return int(gen.random() * n)
    best = qrow[0]
    ties = 1
    for k in range(1, n):
        if qrow[k] > best:
            best = qrow[k]
            ties = 1
        elif qrow[k] == best:
            ties += 1
    if ties == 1:
        for k in range(n):
            if qrow[k] == best:
                return k
    pick = int(gen.random() * ties)
    for k in range(n):
        if qrow[k] == best:
            if pick == 0:
                return k
            pick -= 1
    return n - 1


@numba.njit(cache=True)
def _select_many(qrow, eps, size, gen):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = _select(qrow, eps, gen)
    return out


def select_action(q: QTable, period: Period, vehicles: int, rng: RandomSource) -> int:
    """Epsilon-greedy action; ties among maximisers are broken uniformly at random."""
    if not 0 <= vehicles <= q.sigma:
        raise ValueError(f"vehicles must lie in [0, {q.sigma}], got {vehicles}")
    idx = _select(q.values[int(period), int(vehicles)], q.epsilon, rng.generator)
    return q.actions[idx]


def q_update(q: QTable, state: tuple[Period, int], action: int, reward: float,
             next_state: tuple[Period, int], scenario: ScenarioConfig) -> QTable:
    """One-step Q-learning update with the scenario's learning rate and discount."""
    p, v = int(state[0]), int(state[1])
    p2, v2 = int(next_state[0]), int(next_state[1])
    a = q.action_index(action)
    target = reward + scenario.gamma * q.values[p2, v2].max()
    q.values[p, v, a] += scenario.learning_rate * (target - q.values[p, v, a])
    q.update_count += 1
    return q


@numba.njit(cache=True)
def _run(q, counts, vehicles, cats, rates, mu, zeta, phi, chi, actions, alpha, xi, beta, gamma,
         lr, eps_decay, sigma, days, learn, skellam, gen,
         day_reward, rec_before, rec_action, rec_after, rec_fail, rec_demand):
    n_areas = vehicles.shape[0]
    record = rec_action.shape[0] > 0
    rmax = 0.0
    # day 0, hours 0-11 run before the first decision
    for i in range(n_areas):
        c = cats[i] - 1
        v, _, _, _, _ = _window(vehicles[i], rates[c, 0, 0], rates[c, 0, 1], sigma, skellam, gen)
        vehicles[i] = v
    for day in range(days):
        total = 0.0
        for k in range(2):
            # the hour-11 epoch precedes the evening window, hour 23 the morning one
            p = 1 - k
            e = 2 * day + k
            for i in range(n_areas):
                c = cats[i] - 1
                v = vehicles[i]
                eps = 0.0
                if learn:
                    eps = max(0.0, 1.0 - eps_decay * counts[c])
                ai = _select(q[c, p, v], eps, gen)
                act = actions[ai]
                v2 = min(max(v + act, 0), sigma)
                v3, _, _, served, fails = _window(v2, rates[c, p, 0], rates[c, p, 1], sigma, skellam, gen)
                r = _reward_total(act, fails, v2, mu[c, p], zeta[c, p], phi[c], chi[c],
                                  alpha, xi, beta)
                total += r
                if learn:
                    nxt = q[c, 1 - p, v3]
                    best = nxt[0]
                    for j in range(1, nxt.shape[0]):
                        if nxt[j] > best:
                            best = nxt[j]
                    q[c, p, v, ai] += lr * (r + gamma * best - q[c, p, v, ai])
                    counts[c] += 1
                    if abs(r) > rmax:
                        rmax = abs(r)
                if record:
                    rec_before[e, i] = v
                    rec_action[e, i] = act
                    rec_after[e, i] = v2
                    rec_fail[e, i] = fails
                    rec_demand[e, i] = served + fails
                vehicles[i] = v3
        day_reward[day] = total
    return rmax


@dataclass
class PolicySet:
    """Trained Q-tables for every category of a scenario.

    ``training_rewards`` holds the global (fairness-modified) reward of every
    training day when the set came out of :func:`train`.
    """

    tables: tuple[QTable, ...]
    M: int
    sigma: int
    beta: float
    seed: int
    actions: tuple[int, ...]
    training_rewards: np.ndarray | None = field(default=None, repr=False)

    def stacked(self) -> np.ndarray:
        return np.stack([t.values for t in self.tables])

    def greedy_action(self, category: int, period: Period, vehicles: int) -> int:
        """Deterministic greedy action: the first maximiser in action order."""
        row = self.tables[category - 1].values[int(period), int(vehicles)]
        return self.actions[int(np.argmax(row))]

    def check_compatible(self, scenario: ScenarioConfig) -> None:
        if (self.M, self.sigma, self.actions) != (scenario.M, scenario.sigma, scenario.actions):
            raise PolicyMismatchError(
                f"policies are for M={self.M}, sigma={self.sigma}, actions={self.actions}; "
                f"scenario has M={scenario.M}, sigma={scenario.sigma}, actions={scenario.actions}"
            )

    def __eq__(self, other):
        if not isinstance(other, PolicySet):
            return NotImplemented
        return ((self.M, self.sigma, self.beta, self.seed, self.actions)
                == (other.M, other.sigma, other.beta, other.seed, other.actions)
                and [t.update_count for t in self.tables] == [t.update_count for t in other.tables]
                and np.array_equal(self.stacked(), other.stacked()))


def _kernel_args(scenario: ScenarioConfig):
    return dict(
        cats=scenario.area_categories().astype(np.int64),
        rates=scenario.rate_array(),
        mu=scenario.mu_array(),
        zeta=scenario.zeta_array(),
        phi=scenario.phi_array(),
        chi=scenario.chi_array(),
        actions=np.array(scenario.actions, dtype=np.int64),
        alpha=float(scenario.alpha),
        xi=float(scenario.xi),
        beta=float(scenario.beta),
        gamma=float(scenario.gamma),
        lr=float(scenario.learning_rate),
        eps_decay=float(scenario.epsilon_decay),
        sigma=int(scenario.sigma),
        skellam=scenario.dynamics == "skellam",
    )


_NO_RECORD = np.zeros((0, 0), dtype=np.int64)


def train(scenario: ScenarioConfig, seed: int) -> PolicySet:
    """Train one Q-table per category over ``scenario.train_days`` continuing days."""
    rng = RandomSource(seed)
    M, sigma, n_act = scenario.M, scenario.sigma, scenario.n_actions
    q = np.zeros((M, 2, sigma + 1, n_act))
    counts = np.zeros(M, dtype=np.int64)
    days = int(scenario.train_days)
    day_reward = np.zeros(days)
    rmax = _run(q, counts, initial_vehicles(scenario), learn=True, days=days, gen=rng.generator,
                day_reward=day_reward, rec_before=_NO_RECORD, rec_action=_NO_RECORD,
                rec_after=_NO_RECORD, rec_fail=_NO_RECORD, rec_demand=_NO_RECORD,
                **_kernel_args(scenario))
    bound = rmax / (1.0 - scenario.gamma)
    if not np.all(np.isfinite(q)) or np.abs(q).max(initial=0.0) > bound * (1 + 1e-9) + 1e-12:
        raise FloatingPointError(f"Q-values escaped the bound {bound:.6g}")
    tables = tuple(
        QTable(m + 1, q[m], scenario.actions, scenario.epsilon_decay, int(counts[m]))
        for m in range(M)
    )
    return PolicySet(tables, M, sigma, float(scenario.beta), int(seed), scenario.actions, day_reward)


def rollout(policies: PolicySet, scenario: ScenarioConfig, seed: int) -> SimTrace:
    """Run the greedy policies for ``scenario.eval_days`` days from the initial state."""
    policies.check_compatible(scenario)
    rng = RandomSource(seed)
    days = int(scenario.eval_days)
    n_epochs, n_areas = 2 * days, scenario.n_areas
    rec = {name: np.zeros((n_epochs, n_areas), dtype=np.int64)
           for name in ("before", "action", "after", "fail", "demand")}
    q = policies.stacked()
    counts = np.array([t.update_count for t in policies.tables], dtype=np.int64)
    _run(q, counts, initial_vehicles(scenario), learn=False, days=days, gen=rng.generator,
         day_reward=np.zeros(days), rec_before=rec["before"], rec_action=rec["action"],
         rec_after=rec["after"], rec_fail=rec["fail"], rec_demand=rec["demand"],
         **_kernel_args(scenario))
    epochs = np.arange(n_epochs)
    return SimTrace(
        categories=scenario.area_categories(),
        days=epochs // 2,
        hours=np.where(epochs % 2 == 0, 11, 23),
        periods=np.where(epochs % 2 == 0, int(Period.EVENING), int(Period.MORNING)),
        vehicles_before=rec["before"],
        actions=rec["action"],
        vehicles_after=rec["after"],
        failures=rec["fail"],
        demand=rec["demand"],
        meta={"M": scenario.M, "beta": policies.beta, "seed": int(seed)},
    )


def evaluate(policies: PolicySet, scenario: ScenarioConfig, seed: int):
    """Greedy evaluation run summarised as an :class:`~fairrebalance.metrics.EvalReport`."""
    from .metrics import report_from_trace

    trace = rollout(policies, scenario, seed)
    return report_from_trace(trace, scenario, beta=policies.beta, seed=seed)


def save_policies(policies: PolicySet, path: str | Path) -> None:
    """Write a text dump: ``key = value`` header, then one row of action values per state."""
    lines = [
        "# fairrebalance policy set",
        f"format_version = {FORMAT_VERSION}",
        f"M = {policies.M}",
        f"sigma = {policies.sigma}",
        f"beta = {policies.beta!r}",
        f"seed = {policies.seed}",
        "actions = " + ",".join(str(a) for a in policies.actions),
        f"epsilon_decay = {policies.tables[0].epsilon_decay!r}",
    ]
    for table in policies.tables:
        lines.append(f"category = {table.category}")
        lines.append(f"update_count = {table.update_count}")
        for row in table.values.reshape(-1, table.values.shape[-1]):
            lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_policies(path: str | Path) -> PolicySet:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = {}
    pos = 0
    while pos < len(lines) and "=" in lines[pos] and not lines[pos].startswith("category"):
        key, value = (s.strip() for s in lines[pos].split("=", 1))
        header[key] = value
        pos += 1
    if int(header.get("format_version", -1)) != FORMAT_VERSION:
        raise ValueError(f"unsupported policy format version {header.get('format_version')!r}")
    M, sigma = int(header["M"]), int(header["sigma"])
    actions = tuple(int(a) for a in header["actions"].split(","))
    decay = float(header["epsilon_decay"])
    n_rows = 2 * (sigma + 1)
    tables = []
    for m in range(1, M + 1):
        if lines[pos] != f"category = {m}":
            raise ValueError(f"expected category {m} block, found {lines[pos]!r}")
        count = int(lines[pos + 1].split("=", 1)[1])
        rows = [[float(x) for x in ln.split()] for ln in lines[pos + 2:pos + 2 + n_rows]]
        values = np.array(rows, dtype=float).reshape(2, sigma + 1, len(actions))
        tables.append(QTable(m, values, actions, decay, count))
        pos += 2 + n_rows
    return PolicySet(tuple(tables), M, sigma, float(header["beta"]), int(header["seed"]), actions)

