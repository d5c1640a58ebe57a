"""Event-level simulation of dockless service areas.

Each hour, an area receives Poisson arrivals and Poisson departure attempts.
Events are processed in a uniformly random chronological order; a departure
attempt from an empty area is a failure and leaves the count unchanged, an
arrival at the cap ``sigma`` is dropped. Rebalancing happens at the end of
hours 11 and 23, so each action governs one 12-hour window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .city import HOURS_PER_WINDOW, CategoryProfile, Period, ScenarioConfig
from .reward import check_action
from .stochastic import RandomSource, _poisson

__all__ = [
    "AreaState",
    "SimClock",
    "WindowOutcome",
    "SimTrace",
    "TRACE_COLUMNS",
    "step_hour",
    "simulate_hours",
    "apply_action",
    "expected_demand",
    "run_window",
    "initial_vehicles",
    "initial_states",
]

TRACE_COLUMNS = (
    "day", "hour", "area_id", "category", "vehicles_before",
    "action", "vehicles_after", "failures", "demand",
)


@dataclass
class AreaState:
    area_id: int
    category: int
    vehicles: int
    window_failures: int = 0
    window_demand: int = 0

    def __post_init__(self):
        if self.vehicles < 0:
            raise ValueError(f"area {self.area_id}: vehicle count must be nonnegative")


@dataclass
class SimClock:
    day: int = 0
    hour: int = 0

    @property
    def period(self) -> Period:
        return Period.of_hour(self.hour)

    @property
    def is_epoch(self) -> bool:
        """Rebalancing happens at the end of this hour."""
        return self.hour in (HOURS_PER_WINDOW - 1, 2 * HOURS_PER_WINDOW - 1)

    def advance(self) -> "SimClock":
        self.hour += 1
        if self.hour == 24:
            self.hour = 0
            self.day += 1
        return self


@dataclass(frozen=True)
class WindowOutcome:
    arrivals: int = 0
    served_departures: int = 0
    failures: int = 0
    dropped_arrivals: int = 0

    @property
    def attempts(self) -> int:
        return self.served_departures + self.failures

    def __add__(self, other: "WindowOutcome") -> "WindowOutcome":
        return WindowOutcome(
            self.arrivals + other.arrivals,
            self.served_departures + other.served_departures,
            self.failures + other.failures,
            self.dropped_arrivals + other.dropped_arrivals,
        )


@numba.njit(cache=True)
def _hour(vehicles, lam_a, lam_d, sigma, gen):
    n_arr = _poisson(lam_a, gen)
    n_dep = _poisson(lam_d, gen)
    a = n_arr
    d = n_dep
    dropped = 0
    served = 0
    failures = 0
    # With a arrivals and d departures left, the next event in time order is
    # an arrival with probability a / (a + d); once one kind is exhausted the
    # rest need no draws.
    while a > 0 and d > 0:
        if gen.random() * (a + d) < a:
            a -= 1
            if vehicles < sigma:
                vehicles += 1
            else:
                dropped += 1
        else:
            d -= 1
            if vehicles > 0:
                vehicles -= 1
                served += 1
            else:
                failures += 1
    if a > 0:
        room = min(a, sigma - vehicles)
        vehicles += room
        dropped += a - room
    if d > 0:
        taken = min(d, vehicles)
        vehicles -= taken
        served += taken
        failures += d - taken
    return vehicles, n_arr, n_dep, dropped, served, failures


@numba.njit(cache=True)
def _window(vehicles, lam_a, lam_d, sigma, skellam, gen):
    """One 12-hour window; rates are per half-day."""
    if skellam:
        n_arr = _poisson(lam_a, gen)
        n_dep = _poisson(lam_d, gen)
        raw = vehicles + n_arr - n_dep
        failures = max(0, -raw)
        after = max(0, raw)
        dropped = max(0, after - sigma)
        return min(after, sigma), n_arr, dropped, n_dep - failures, failures
    arrivals = 0
    dropped = 0
    served = 0
    failures = 0
    ha = lam_a / 12.0
    hd = lam_d / 12.0
    for _ in range(12):
        vehicles, a, _, dr, s, f = _hour(vehicles, ha, hd, sigma, gen)
        arrivals += a
        dropped += dr
        served += s
        failures += f
    return vehicles, arrivals, dropped, served, failures


@numba.njit(cache=True)
def _hours_batch(vehicles, lam_a, lam_d, sigma, gen):
    n = vehicles.shape[0]
    out = np.empty((n, 6), dtype=np.int64)
    for i in range(n):
        v, a, d, dr, s, f = _hour(vehicles[i], lam_a[i], lam_d[i], sigma, gen)
        out[i, 0] = v
        out[i, 1] = a
        out[i, 2] = d
        out[i, 3] = dr
        out[i, 4] = s
        out[i, 5] = f
    return out


@numba.njit(cache=True)
def _window_batch(vehicles, cats, rates, period, sigma, skellam, gen):
    n = vehicles.shape[0]
    out = np.empty((n, 5), dtype=np.int64)
    for i in range(n):
        c = cats[i] - 1
        v, a, dr, s, f = _window(vehicles[i], rates[c, period, 0], rates[c, period, 1],
                                 sigma, skellam, gen)
        out[i, 0] = v
        out[i, 1] = a
        out[i, 2] = dr
        out[i, 3] = s
        out[i, 4] = f
    return out


def step_hour(state: AreaState, profile: CategoryProfile, period: Period, rng: RandomSource,
              sigma: int = 100) -> WindowOutcome:
    """Advance one area by one hour in place and return what happened."""
    lam_a, lam_d = profile.rates(Period(period))
    v, a, _, dr, s, f = _hour(int(state.vehicles), lam_a / HOURS_PER_WINDOW, lam_d / HOURS_PER_WINDOW,
                           int(sigma), rng.generator)
    state.vehicles = int(v)
    state.window_failures += int(f)
    state.window_demand += int(s + f)
    return WindowOutcome(int(a), int(s), int(f), int(dr))


def simulate_hours(vehicles, hourly_arrival_rates, hourly_departure_rates, sigma: int,
                   rng: RandomSource) -> dict[str, np.ndarray]:
    """Vectorised single-hour step over many independent areas.

    Areas are processed in array order, drawing from ``rng`` in sequence.
    Returns arrays ``vehicles``, ``arrivals``, ``attempts`` (departure attempts
    drawn), ``dropped``, ``served``, ``failures``.
    """
    v = np.ascontiguousarray(vehicles, dtype=np.int64)
    la = np.ascontiguousarray(hourly_arrival_rates, dtype=float)
    ld = np.ascontiguousarray(hourly_departure_rates, dtype=float)
    if not (v.shape == la.shape == ld.shape):
        raise ValueError("vehicles and rate arrays must have the same shape")
    if (v < 0).any() or (v > sigma).any():
        raise ValueError("vehicle counts must lie in [0, sigma]")
    out = _hours_batch(v, la, ld, int(sigma), rng.generator)
    return dict(zip(("vehicles", "arrivals", "attempts", "dropped", "served", "failures"), out.T.copy()))


def apply_action(state: AreaState, action: int, sigma: int = 100, actions=None) -> AreaState:
    """Add or remove vehicles, clamped to ``[0, sigma]``; resets the window tallies.

    A requested move still counts as a rebalancing operation when clamping
    makes it partly or entirely ineffective.
    """
    check_action(action, actions)
    state.vehicles = min(max(state.vehicles + action, 0), sigma)
    state.window_failures = 0
    state.window_demand = 0
    return state


def expected_demand(profile: CategoryProfile, period: Period) -> float:
    """Expected departures over the half-day window ``period``."""
    return float(profile.rates(Period(period))[1])


def run_window(states: Sequence[AreaState], scenario: ScenarioConfig, period: Period,
               rng: RandomSource) -> list[WindowOutcome]:
    """Advance every area through the 12 hours of ``period``, in area order."""
    period = Period(period)
    vehicles = np.array([s.vehicles for s in states], dtype=np.int64)
    cats = np.array([s.category for s in states], dtype=np.int64)
    out = _window_batch(vehicles, cats, scenario.rate_array(), int(period), scenario.sigma,
                        scenario.dynamics == "skellam", rng.generator)
    outcomes = []
    for state, (v, a, dr, s, f) in zip(states, out):
        state.vehicles = int(v)
        state.window_failures += int(f)
        state.window_demand += int(s + f)
        outcomes.append(WindowOutcome(int(a), int(s), int(f), int(dr)))
    return outcomes


def initial_vehicles(scenario: ScenarioConfig) -> np.ndarray:
    """Starting count per area: morning expected departures, rounded half up."""
    per_cat = [min(scenario.sigma, math.floor(c.morning_rates[1] + 0.5)) for c in scenario.categories]
    return np.repeat(np.array(per_cat, dtype=np.int64), [c.node_count for c in scenario.categories])


def initial_states(scenario: ScenarioConfig) -> list[AreaState]:
    cats = scenario.area_categories()
    return [AreaState(i, int(c), int(v)) for i, (c, v) in enumerate(zip(cats, initial_vehicles(scenario)))]


@dataclass
class SimTrace:
    """Per-(epoch, area) record of a run; epochs are rows, areas columns.

    ``periods`` holds the half-day that follows each epoch, ``vehicles_after``
    the post-action count, and ``failures``/``demand`` the tallies of the
    window that follows the action.
    """

    categories: np.ndarray
    days: np.ndarray
    hours: np.ndarray
    periods: np.ndarray
    vehicles_before: np.ndarray
    actions: np.ndarray
    vehicles_after: np.ndarray
    failures: np.ndarray
    demand: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_epochs(self) -> int:
        return self.actions.shape[0]

    def rows(self):
        n_areas = self.categories.shape[0]
        for e in range(self.n_epochs):
            for i in range(n_areas):
                yield (int(self.days[e]), int(self.hours[e]), i, int(self.categories[i]),
                       int(self.vehicles_before[e, i]), int(self.actions[e, i]),
                       int(self.vehicles_after[e, i]), int(self.failures[e, i]),
                       int(self.demand[e, i]))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows(self.rows())
