"""Beta sweeps over seeds: train, evaluate, and write plot-ready tables."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .city import ConfigError, ScenarioConfig, build_scenario, load_scenario, scale_rates
from .learn import evaluate, save_policies, rollout, train
from .metrics import EvalReport, pareto_mask, report_from_trace

__all__ = [
    "SweepSpec",
    "SweepError",
    "run_sweep",
    "run_one",
    "learning_curve",
    "emit_learning_curve",
    "run_id",
    "RESULT_COLUMNS",
    "EVAL_SEED_OFFSET",
]

log = logging.getLogger(__name__)

DESK_TRAIN_DAYS = 20_000
DESK_DECAY_FACTOR = 5.0
EVAL_SEED_OFFSET = 2**32
MAX_M = 5
RESULT_COLUMNS = ["beta", "seed", "M", "gini", "C1", "C2", "C3", "global_cost"] + [
    f"x_{m}" for m in range(1, MAX_M + 1)
]


class SweepError(ValueError):
    """Invalid sweep configuration."""


def default_betas() -> tuple[float, ...]:
    return tuple(k / 10 for k in range(11))


@dataclass(frozen=True)
class SweepSpec:
    """Which (M, beta, seed) runs to perform and where to write them.

    ``scale`` multiplies the training horizon without touching the epsilon
    decay; ``desk`` switches to a 20 000-day horizon with a five times faster
    decay so exploration still anneals to zero.
    """

    M_values: tuple[int, ...] = (5,)
    betas: tuple[float, ...] = field(default_factory=default_betas)
    seeds: tuple[int, ...] = tuple(range(10))
    scale: float = 1.0
    out_dir: Path = Path("results")
    train_days: int | None = None
    eval_days: int | None = None
    desk: bool = False
    workers: int = 1
    config_path: Path | None = None
    rate_scale: float = 1.0
    trace: bool = False
    curve_window: int | None = None
    save_policies: bool = False

    def validate(self) -> None:
        if not self.betas:
            raise SweepError("empty sweep: no beta values")
        if not self.seeds:
            raise SweepError("empty sweep: no seeds")
        if not self.M_values and self.config_path is None:
            raise SweepError("empty sweep: no scenarios")
        if any(b < 0 for b in self.betas):
            raise SweepError("beta values must be nonnegative")
        if any(not 0 <= s < EVAL_SEED_OFFSET for s in self.seeds):
            raise SweepError(f"seeds must lie in [0, {EVAL_SEED_OFFSET})")
        if len({_beta_key(b) for b in self.betas}) != len(self.betas):
            raise SweepError("beta values must be distinct at 1e-3 resolution")
        if self.scale <= 0 or self.workers < 1:
            raise SweepError("scale must be positive and workers at least 1")
        if self.curve_window is not None and self.curve_window < 1:
            raise SweepError("learning-curve window must be at least one day")

    def base_scenarios(self) -> list[ScenarioConfig]:
        if self.config_path is not None:
            bases = [load_scenario(self.config_path)]
        else:
            bases = [build_scenario(M) for M in self.M_values]
        out = []
        for base in bases:
            if self.rate_scale != 1.0:
                base = scale_rates(base, self.rate_scale)
            changes = {}
            if self.desk:
                changes["train_days"] = DESK_TRAIN_DAYS
                changes["epsilon_decay"] = base.epsilon_decay * DESK_DECAY_FACTOR
            if self.train_days is not None:
                changes["train_days"] = self.train_days
            days = changes.get("train_days", base.train_days)
            changes["train_days"] = int(round(days * self.scale))
            if self.eval_days is not None:
                changes["eval_days"] = self.eval_days
            out.append(replace(base, **changes))
        return out

    def triples(self) -> list[tuple[ScenarioConfig, float, int]]:
        return [(replace(base, beta=float(b)), float(b), int(s))
                for base in self.base_scenarios() for b in self.betas for s in self.seeds]


def _beta_key(beta: float) -> int:
    return int(round(beta * 1000))


def run_id(M: int, beta: float, seed: int) -> str:
    return f"M{M}_b{_beta_key(beta)}_s{seed}"


def learning_curve(daily_rewards: np.ndarray, window: int) -> list[tuple[int, float]]:
    """Mean daily global reward over consecutive ``window``-day blocks, keyed by the block's last day."""
    rewards = np.asarray(daily_rewards, dtype=float)
    rows = []
    for start in range(0, rewards.size, window):
        block = rewards[start:start + window]
        rows.append((start + block.size, float(block.mean())))
    return rows


def _write_curve(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "mean_reward"])
        writer.writerows((day, repr(value)) for day, value in rows)


def emit_learning_curve(scenario: ScenarioConfig, seed: int, window: int, path: str | Path | None = None):
    """Train once and return (optionally write) the windowed learning curve."""
    if window < 1:
        raise ValueError("window must be at least one day")
    policies = train(scenario, seed)
    rows = learning_curve(policies.training_rewards, window)
    if path is not None:
        _write_curve(Path(path), rows)
    return rows


def run_one(scenario: ScenarioConfig, seed: int, out_dir: Path | None = None, *, trace: bool = False,
            curve_window: int | None = None, keep_policies: bool = False) -> EvalReport:
    """Train with ``seed`` and evaluate greedily with ``seed + 2**32``."""
    policies = train(scenario, seed)
    sim_trace = rollout(policies, scenario, seed + EVAL_SEED_OFFSET)
    report = report_from_trace(sim_trace, scenario, beta=scenario.beta, seed=seed)
    if out_dir is not None:
        rid = run_id(scenario.M, scenario.beta, seed)
        if trace:
            sim_trace.write_csv(out_dir / f"trace_{rid}.csv")
        if curve_window:
            _write_curve(out_dir / f"curve_{rid}.csv", learning_curve(policies.training_rewards, curve_window))
        if keep_policies:
            save_policies(policies, out_dir / f"policy_{rid}.txt")
    return report


def _run_task(args):
    scenario, seed, out_dir, trace, curve_window, keep = args
    return run_one(scenario, seed, out_dir, trace=trace, curve_window=curve_window, keep_policies=keep)


def _row(report: EvalReport) -> list[str]:
    row = [str(v) for v in report.row()]
    return row + [""] * (len(RESULT_COLUMNS) - len(row))


def _row_key(row: Sequence[str]) -> tuple[int, int, int]:
    return int(row[2]), _beta_key(float(row[0])), int(row[1])


def _read_results(path: Path) -> list[list[str]]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header != RESULT_COLUMNS:
            raise SweepError(f"{path} has an unexpected header; refusing to resume")
        return [row for row in reader if row]


def _write_results(path: Path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        writer.writerows(sorted(rows, key=_row_key))


def _aggregate(rows: list[list[str]]) -> dict[int, list[dict]]:
    groups: dict[tuple[int, int], list[list[str]]] = {}
    for row in rows:
        M, bkey, _ = _row_key(row)
        groups.setdefault((M, bkey), []).append(row)
    by_M: dict[int, list[dict]] = {}
    for (M, bkey), members in sorted(groups.items()):
        by_M.setdefault(M, []).append({
            "beta": bkey / 1000,
            "mean_cost": float(np.mean([float(r[7]) for r in members])),
            "mean_gini": float(np.mean([float(r[3]) for r in members])),
            "mean_C1": float(np.mean([float(r[4]) for r in members])),
            "mean_C2": float(np.mean([float(r[5]) for r in members])),
            "mean_C3": float(np.mean([float(r[6]) for r in members])),
            "n_seeds": len(members),
        })
    return by_M


def _write_pareto(path: Path, points: list[dict]) -> None:
    mask = pareto_mask([(p["mean_cost"], p["mean_gini"]) for p in points])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "mean_cost", "mean_gini", "n_seeds", "efficient"])
        for p, eff in zip(points, mask):
            writer.writerow([repr(p["beta"]), repr(p["mean_cost"]), repr(p["mean_gini"]), p["n_seeds"], int(eff)])


def _pct(new: float, old: float) -> float | None:
    return None if old == 0 else 100.0 * (new - old) / old


def summarize(points: list[dict]) -> dict:
    """Deltas of every beta against the beta = 0 baseline and the best trade-off beta.

    The trade-off ratio is the relative Gini decrease per unit of relative
    cost increase; a beta that lowers both is reported as dominating.
    """
    baseline = next((p for p in points if p["beta"] == 0.0), None)
    summary: dict = {"baseline": baseline, "deltas": [], "best_ratio": None}
    if baseline is None:
        return summary
    best = None
    for p in points:
        if p["beta"] == 0.0:
            continue
        dg = _pct(p["mean_gini"], baseline["mean_gini"])
        dc = _pct(p["mean_cost"], baseline["mean_cost"])
        entry = {"beta": p["beta"], "gini_change_pct": dg, "cost_change_pct": dc}
        summary["deltas"].append(entry)
        if dg is None or dc is None or dg >= 0:
            continue
        ratio = float("inf") if dc <= 0 else -dg / dc
        if best is None or (ratio, -dg) > (best[0], -best[1]["gini_change_pct"]):
            best = (ratio, entry)
    if best is not None:
        ratio, entry = best
        summary["best_ratio"] = dict(entry, ratio=None if ratio == float("inf") else ratio,
                                     dominates_baseline=ratio == float("inf"))
    return summary


def run_sweep(spec: SweepSpec) -> dict[str, Path]:
    """Run every pending (M, beta, seed) triple and write results, Pareto files and summary.

    Completed triples already present in ``results.csv`` are skipped, so an
    interrupted sweep can be resumed; the final files are written in sorted
    order and therefore do not depend on scheduling.
    """
    spec.validate()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    rows = _read_results(results_path)
    done = {_row_key(r) for r in rows}
    try:
        triples = spec.triples()
    except ConfigError as exc:
        raise SweepError(str(exc)) from exc
    pending = [(sc, seed) for sc, beta, seed in triples if (sc.M, _beta_key(beta), seed) not in done]
    log.info("%d runs requested, %d already complete", len(triples), len(triples) - len(pending))

    if not results_path.exists():
        _write_results(results_path, rows)
    tasks = [(sc, seed, out, spec.trace, spec.curve_window, spec.save_policies) for sc, seed in pending]

    def record(report):
        row = _row(report)
        rows.append(row)
        with open(results_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(row)
        log.info("finished %s: gini=%.4f cost=%.3f", run_id(report.M, report.beta, report.seed),
                 report.gini, report.global_cost)

    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_task, t) for t in tasks]
            for fut in as_completed(futures):
                record(fut.result())
    else:
        for t in tasks:
            record(_run_task(t))

    _write_results(results_path, rows)
    written = {"results": results_path}
    summary = {}
    for M, points in _aggregate(rows).items():
        path = out / f"pareto_M{M}.csv"
        _write_pareto(path, points)
        written[f"pareto_M{M}"] = path
        summary[f"M{M}"] = summarize(points)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written["summary"] = summary_path
    return written


def evaluate_seed(scenario: ScenarioConfig, seed: int) -> EvalReport:
    """Convenience wrapper: train and evaluate one seed without writing files."""
    return evaluate(train(scenario, seed), scenario, seed + EVAL_SEED_OFFSET)
