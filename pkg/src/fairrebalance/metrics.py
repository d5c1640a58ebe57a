"""Fairness and cost metrics over greedy evaluation runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .city import ScenarioConfig
from .sim import SimTrace

__all__ = [
    "EvalReport",
    "failure_probabilities",
    "gini",
    "costs",
    "pareto_mask",
    "pareto_front",
    "report_from_trace",
    "report_columns",
]


@dataclass(frozen=True)
class EvalReport:
    M: int
    beta: float
    seed: int
    per_category_failure_prob: tuple[float, ...]
    C1: float
    C2: float
    C3: float
    global_cost: float
    gini: float
    gini_undefined: bool = False
    undefined_categories: tuple[int, ...] = ()

    def row(self) -> list:
        return [repr(float(self.beta)), int(self.seed), int(self.M)] + [
            repr(float(v)) for v in (self.gini, self.C1, self.C2, self.C3, self.global_cost,
                                     *self.per_category_failure_prob)
        ]


def report_columns(M: int) -> list[str]:
    return ["beta", "seed", "M", "gini", "C1", "C2", "C3", "global_cost"] + [f"x_{m}" for m in range(1, M + 1)]


def failure_probabilities(failures: Sequence[float], attempts: Sequence[float]) -> list[float]:
    """Per-category share of departure attempts that found no vehicle."""
    failures = np.asarray(failures, dtype=float)
    attempts = np.asarray(attempts, dtype=float)
    if failures.shape != attempts.shape:
        raise ValueError("failures and attempts must have one entry per category")
    if (attempts <= 0).any():
        empty = [int(m) + 1 for m in np.flatnonzero(attempts <= 0)]
        raise ZeroDivisionError(f"failure probability undefined: no departure attempts in categories {empty}")
    if (failures < 0).any() or (failures > attempts).any():
        raise ValueError("need 0 <= failures <= attempts in every category")
    return list(failures / attempts)


def gini(x: Sequence[float]) -> float:
    """Gini index of nonnegative per-category values; 0 when all values are zero."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("gini needs at least two categories")
    if (x < 0).any():
        raise ValueError("gini is defined for nonnegative values")
    mean = x.mean()
    if mean == 0.0:
        return 0.0
    M = x.size
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * M * M * mean))


def costs(trace: SimTrace, scenario: ScenarioConfig) -> tuple[float, float, float]:
    """Mean per-epoch rebalancing cost, failure rate and fleet size.

    The failure rate divides each area's failures by the expected departures
    of its window; areas whose window has no expected departures add nothing.
    """
    if trace.n_epochs == 0:
        return 0.0, 0.0, 0.0
    cat_idx = trace.categories - 1
    phi = scenario.phi_array()[cat_idx]
    reb = scenario.alpha * ((trace.actions != 0) * phi[None, :]).sum(axis=1)
    mu = scenario.mu_array()[cat_idx[None, :], trace.periods[:, None]]
    ratio = np.divide(trace.failures, mu, out=np.zeros(mu.shape), where=mu > 0)
    fail = ratio.sum(axis=1)
    veh = trace.vehicles_after.sum(axis=1)
    return float(reb.mean()), float(fail.mean()), float(veh.mean())


def report_from_trace(trace: SimTrace, scenario: ScenarioConfig, beta: float, seed: int) -> EvalReport:
    cat_idx = trace.categories - 1
    failures = np.bincount(cat_idx, weights=trace.failures.sum(axis=0), minlength=scenario.M)
    attempts = np.bincount(cat_idx, weights=trace.demand.sum(axis=0), minlength=scenario.M)
    undefined = tuple(int(m) + 1 for m in np.flatnonzero(attempts == 0))
    x = np.divide(failures, attempts, out=np.zeros(scenario.M), where=attempts > 0)
    c1, c2, c3 = costs(trace, scenario)
    w1, w2, w3 = scenario.cost_weights
    g = gini(x) if scenario.M >= 2 else 0.0
    return EvalReport(
        M=scenario.M, beta=float(beta), seed=int(seed),
        per_category_failure_prob=tuple(float(v) for v in x),
        C1=c1, C2=c2, C3=c3, global_cost=w1 * c1 + w2 * c2 + w3 * c3,
        gini=g, gini_undefined=bool(x.sum() == 0), undefined_categories=undefined,
    )


def _dominates(p, q) -> bool:
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def pareto_mask(points: Sequence[Sequence[float]]) -> np.ndarray:
    """Boolean mask of efficient points (both coordinates minimised).

    Exact duplicates of an earlier point are marked inefficient so that each
    efficient location is reported once.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    mask = np.ones(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i != j and (_dominates(q, p) or (j < i and q == p)):
                mask[i] = False
                break
    return mask


def pareto_front(points: Sequence[Sequence[float]]) -> list:
    """Non-dominated points in (cost, gini), ordered by cost (ties by gini, then input order)."""
    mask = pareto_mask(points)
    kept = [(i, points[i]) for i in np.flatnonzero(mask)]
    kept.sort(key=lambda item: (float(item[1][0]), float(item[1][1]), item[0]))
    return [p for _, p in kept]
