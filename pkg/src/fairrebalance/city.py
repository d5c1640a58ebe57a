"""Scenario description: area categories, demand rates and cost/fairness tables."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Period",
    "CategoryProfile",
    "ScenarioConfig",
    "ConfigError",
    "DEFAULT_ACTIONS",
    "build_scenario",
    "phi",
    "chi",
    "load_scenario",
    "parse_scenario",
    "scale_rates",
]

DEFAULT_ACTIONS = tuple(range(-30, 31, 5))
HOURS_PER_WINDOW = 12


class ConfigError(ValueError):
    """Raised for invalid scenario definitions or override files."""


class Period(enum.IntEnum):
    """Half-day demand period. Hours 0-11 are morning, 12-23 evening."""

    MORNING = 0
    EVENING = 1

    @classmethod
    def of_hour(cls, hour: int) -> "Period":
        return cls.MORNING if hour < HOURS_PER_WINDOW else cls.EVENING

    @property
    def other(self) -> "Period":
        return Period(1 - self)


@dataclass(frozen=True)
class CategoryProfile:
    """One area category; rates are expected (arrivals, departures) per half-day."""

    index: int
    node_count: int
    morning_rates: tuple[float, float]
    evening_rates: tuple[float, float]
    phi: float
    chi: float

    def __post_init__(self):
        if self.index < 1:
            raise ConfigError(f"category index must be >= 1, got {self.index}")
        if self.node_count < 1:
            raise ConfigError(f"category {self.index}: node_count must be positive")
        for rates in (self.morning_rates, self.evening_rates):
            if len(rates) != 2 or min(rates) < 0:
                raise ConfigError(f"category {self.index}: rates must be two nonnegative reals, got {rates}")
        if not 0.0 <= self.phi <= 1.0:
            raise ConfigError(f"category {self.index}: phi must lie in [0, 1], got {self.phi}")
        if not -1.0 <= self.chi <= 1.0:
            raise ConfigError(f"category {self.index}: chi must lie in [-1, 1], got {self.chi}")

    def rates(self, period: Period) -> tuple[float, float]:
        return self.morning_rates if period == Period.MORNING else self.evening_rates

    # clutter tolerance: half the expected arrivals of the period
    @property
    def zeta_morning(self) -> float:
        return 0.5 * self.morning_rates[0]

    @property
    def zeta_evening(self) -> float:
        return 0.5 * self.evening_rates[0]

    def zeta(self, period: Period) -> float:
        return self.zeta_morning if period == Period.MORNING else self.zeta_evening


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, immutable experiment configuration.

    ``dynamics`` selects how a 12-hour window evolves: ``"events"`` simulates
    individual hourly arrivals/departures (the default), ``"skellam"`` draws the
    window's net change in one step so that occupancy follows the censored
    Skellam transition exactly.
    """

    M: int
    categories: tuple[CategoryProfile, ...]
    alpha: float = 20.0
    xi: float = 0.3
    beta: float = 0.0
    gamma: float = 0.9
    sigma: int = 100
    learning_rate: float = 0.01
    epsilon_decay: float = 8.25e-7
    train_days: int = 100_000
    eval_days: int = 100
    cost_weights: tuple[float, float, float] = (1.0, 10.0, 0.01)
    actions: tuple[int, ...] = DEFAULT_ACTIONS
    dynamics: str = "events"

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        object.__setattr__(self, "cost_weights", tuple(float(w) for w in self.cost_weights))
        if self.M < 1 or len(self.categories) != self.M:
            raise ConfigError(f"expected {self.M} categories, got {len(self.categories)}")
        for k, cat in enumerate(self.categories, start=1):
            if cat.index != k:
                raise ConfigError(f"categories must be ordered 1..M, found index {cat.index} at {k}")
        if not (self.alpha > 0 and self.xi > 0):
            raise ConfigError("alpha and xi must be positive")
        if self.beta < 0:
            raise ConfigError(f"beta must be nonnegative, got {self.beta}")
        if not 0 <= self.gamma < 1:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.sigma < 1:
            raise ConfigError(f"sigma must be a positive integer, got {self.sigma}")
        if not (self.learning_rate > 0 and self.epsilon_decay > 0):
            raise ConfigError("learning_rate and epsilon_decay must be positive")
        if self.train_days < 0 or self.eval_days < 0:
            raise ConfigError("train_days and eval_days must be nonnegative")
        if len(self.cost_weights) != 3 or min(self.cost_weights) <= 0:
            raise ConfigError(f"cost_weights must be three positive reals, got {self.cost_weights}")
        if not self.actions or len(set(self.actions)) != len(self.actions):
            raise ConfigError("actions must be a nonempty set of distinct integers")
        if self.dynamics not in ("events", "skellam"):
            raise ConfigError(f"unknown dynamics {self.dynamics!r}")

    @property
    def n_areas(self) -> int:
        return sum(c.node_count for c in self.categories)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def category(self, m: int) -> CategoryProfile:
        if not 1 <= m <= self.M:
            raise IndexError(f"category index {m} outside [1, {self.M}]")
        return self.categories[m - 1]

    def area_categories(self) -> np.ndarray:
        """Category (1-based) of every area; areas are numbered category by category."""
        return np.repeat(np.arange(1, self.M + 1), [c.node_count for c in self.categories])

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    # dense per-category arrays for the compiled kernels
    def rate_array(self) -> np.ndarray:
        """Shape (M, 2, 2): [category, period, (arrivals, departures)] per half-day."""
        return np.array([[c.morning_rates, c.evening_rates] for c in self.categories], dtype=float)

    def mu_array(self) -> np.ndarray:
        """Expected departures per window, shape (M, 2)."""
        return self.rate_array()[:, :, 1].copy()

    def zeta_array(self) -> np.ndarray:
        return np.array([[c.zeta_morning, c.zeta_evening] for c in self.categories], dtype=float)

    def phi_array(self) -> np.ndarray:
        return np.array([c.phi for c in self.categories], dtype=float)

    def chi_array(self) -> np.ndarray:
        return np.array([c.chi for c in self.categories], dtype=float)


_NODES = {
    2: (60, 10),
    3: (60, 30, 10),
    4: (60, 40, 20, 10),
    5: (60, 40, 30, 20, 10),
}

_MORNING = {
    2: ((0.3, 2), (13.8, 7)),
    3: ((0.3, 2), (3.3, 1.5), (13.8, 7)),
    4: ((0.3, 2), (0.45, 3), (9.2, 5.1), (13.8, 7)),
    5: ((0.3, 2), (0.45, 3), (3.3, 1.5), (9.2, 5.1), (13.8, 7)),
}

_EVENING = {
    2: ((1.5, 0.3), (10, 13.8)),
    3: ((1.5, 0.3), (1.5, 3.3), (10, 13.8)),
    4: ((1.5, 0.3), (2.25, 0.45), (6.6, 9.2), (10, 13.8)),
    5: ((1.5, 0.3), (2.25, 0.45), (1.5, 3.3), (6.6, 9.2), (10, 13.8)),
}

# Five-category tables; smaller scenarios pick an antisymmetric subset of chi
# and the phi entries paired with it (M=3 uses chi=0 with the middle phi).
_CHI = {
    2: (1.0, -1.0),
    3: (1.0, 0.0, -1.0),
    4: (1.0, 0.5, -0.5, -1.0),
    5: (1.0, 0.5, 0.4, -0.5, -1.0),
}
_PHI = {
    2: (1.0, 0.1),
    3: (1.0, 0.4, 0.1),
    4: (1.0, 0.8, 0.3, 0.1),
    5: (1.0, 0.8, 0.4, 0.3, 0.1),
}


def build_scenario(M: int, **overrides) -> ScenarioConfig:
    """Built-in scenario with ``M`` categories (2 to 5), ordered periphery to centre."""
    if M not in _NODES:
        raise ConfigError(f"unsupported number of categories M={M}; choose from 2, 3, 4, 5")
    cats = tuple(
        CategoryProfile(
            index=k + 1,
            node_count=_NODES[M][k],
            morning_rates=tuple(float(r) for r in _MORNING[M][k]),
            evening_rates=tuple(float(r) for r in _EVENING[M][k]),
            phi=_PHI[M][k],
            chi=_CHI[M][k],
        )
        for k in range(M)
    )
    return ScenarioConfig(M=M, categories=cats, **overrides)


def scale_rates(config: ScenarioConfig, factor: float) -> ScenarioConfig:
    """Multiply every demand rate by ``factor``.

    ``scale_rates(cfg, 12)`` reads the tabulated rates as hourly rather than
    half-day figures.
    """
    if not factor > 0:
        raise ConfigError(f"rate scale factor must be positive, got {factor}")
    cats = tuple(
        replace(c,
                morning_rates=tuple(factor * r for r in c.morning_rates),
                evening_rates=tuple(factor * r for r in c.evening_rates))
        for c in config.categories
    )
    return replace(config, categories=cats)


def phi(config: ScenarioConfig, m: int) -> float:
    """Rebalancing cost factor of category ``m``."""
    return config.category(m).phi


def chi(config: ScenarioConfig, m: int) -> float:
    """Fairness weight of category ``m``."""
    return config.category(m).chi


_SCALAR_KEYS = {
    "alpha": ("alpha", float),
    "xi": ("xi", float),
    "beta": ("beta", float),
    "gamma": ("gamma", float),
    "sigma": ("sigma", int),
    "lr": ("learning_rate", float),
    "eps_decay": ("epsilon_decay", float),
    "train_days": ("train_days", int),
    "eval_days": ("eval_days", int),
}
_CATEGORY_KEYS = ("nodes", "rates.morning", "rates.evening", "phi", "chi")


def _parse_pair(key, value):
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected two comma-separated reals, got {value!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{key}: expected two comma-separated reals, got {value!r}") from None


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse the flat ``key = value`` override format.

    Keys absent from the file fall back to the built-in scenario of the same
    ``M`` (when there is one). Blank lines and ``#`` comments are ignored.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    if "M" not in entries:
        raise ConfigError("override file must set M")
    try:
        M = int(entries.pop("M"))
    except ValueError:
        raise ConfigError("M must be an integer") from None
    if not 2 <= M <= 5:
        raise ConfigError(f"M must lie in [2, 5], got {M}")
    base = build_scenario(M)

    per_cat: dict[int, dict] = {m: {} for m in range(1, M + 1)}
    scalars: dict = {}
    weights = list(base.cost_weights)
    for key, value in entries.items():
        try:
            if key in _SCALAR_KEYS:
                name, cast = _SCALAR_KEYS[key]
                scalars[name] = cast(value)
                continue
            if key in ("omega1", "omega2", "omega3"):
                weights[int(key[-1]) - 1] = float(value)
                continue
            prefix, _, idx = key.rpartition(".")
            if prefix not in _CATEGORY_KEYS or not idx.isdigit():
                raise ConfigError(f"unknown key {key!r}")
            m = int(idx)
            if m not in per_cat:
                raise ConfigError(f"{key}: category index outside [1, {M}]")
            if prefix == "nodes":
                per_cat[m]["node_count"] = int(value)
            elif prefix == "rates.morning":
                per_cat[m]["morning_rates"] = _parse_pair(key, value)
            elif prefix == "rates.evening":
                per_cat[m]["evening_rates"] = _parse_pair(key, value)
            else:
                per_cat[m][prefix] = float(value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: invalid value {value!r}") from None

    cats = tuple(replace(base.category(m), **per_cat[m]) for m in range(1, M + 1))
    phis = [c.phi for c in cats]
    chis = [c.chi for c in cats]
    if any(a <= b for a, b in zip(phis, phis[1:])) or phis[0] != 1.0:
        raise ConfigError(f"phi must be strictly decreasing with phi(1) = 1, got {phis}")
    if any(a <= b for a, b in zip(chis, chis[1:])) or chis[0] != 1.0 or chis[-1] != -1.0:
        raise ConfigError(f"chi must be strictly decreasing from 1 to -1, got {chis}")
    return replace(base, categories=cats, cost_weights=tuple(weights), **scalars)


def load_scenario(path: str | Path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())
