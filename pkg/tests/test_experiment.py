import csv
import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from fairrebalance.city import CategoryProfile, ScenarioConfig, build_scenario
from fairrebalance.cli import main, parse_betas, parse_seeds
from fairrebalance.experiment import (
    DESK_DECAY_FACTOR,
    DESK_TRAIN_DAYS,
    RESULT_COLUMNS,
    SweepError,
    SweepSpec,
    emit_learning_curve,
    learning_curve,
    run_id,
    run_sweep,
    summarize,
)
from fairrebalance.metrics import pareto_mask

SMALL = dict(M_values=(2,), train_days=200, eval_days=5)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSpec:
    def test_empty_beta_list(self):
        with pytest.raises(SweepError, match="empty sweep"):
            SweepSpec(betas=()).validate()

    @pytest.mark.parametrize("kw", [dict(seeds=()), dict(betas=(0.1, -0.2)), dict(scale=0),
                                    dict(betas=(0.1, 0.1001)), dict(curve_window=0)])
    def test_invalid(self, kw):
        with pytest.raises(SweepError):
            SweepSpec(**kw).validate()

    def test_desk_and_scale(self):
        (sc,) = SweepSpec(desk=True).base_scenarios()
        assert sc.train_days == DESK_TRAIN_DAYS
        assert sc.epsilon_decay == pytest.approx(8.25e-7 * DESK_DECAY_FACTOR)
        (sc,) = SweepSpec(scale=0.01).base_scenarios()
        assert sc.train_days == 1000 and sc.epsilon_decay == 8.25e-7

    def test_triples(self):
        spec = SweepSpec(M_values=(2, 3), betas=(0.0, 0.5), seeds=(0, 1, 2))
        assert len(spec.triples()) == 12
        assert {(sc.M, b, s) for sc, b, s in spec.triples()} == {
            (M, b, s) for M in (2, 3) for b in (0.0, 0.5) for s in (0, 1, 2)}

    def test_run_id(self):
        assert run_id(5, 0.3, 7) == "M5_b300_s7"


class TestSweep:
    def test_two_rows(self, tmp_path):
        spec = SweepSpec(M_values=(5,), betas=(0.0, 1.0), seeds=(0,), scale=0.01, eval_days=10,
                         out_dir=tmp_path)
        written = run_sweep(spec)
        rows = read_csv(written["results"])
        assert rows[0] == RESULT_COLUMNS and len(rows) == 3
        pareto = read_csv(written["pareto_M5"])
        assert len(pareto) == 3
        summary = json.loads(written["summary"].read_text())
        assert summary["M5"]["baseline"]["beta"] == 0.0

    def test_resume_is_byte_identical(self, tmp_path):
        full = SweepSpec(betas=(0.0, 0.5), seeds=(0, 1), out_dir=tmp_path / "a", **SMALL)
        run_sweep(full)
        part = SweepSpec(betas=(0.0,), seeds=(0, 1), out_dir=tmp_path / "b", **SMALL)
        run_sweep(part)
        run_sweep(SweepSpec(betas=(0.0, 0.5), seeds=(0, 1), out_dir=tmp_path / "b", **SMALL))
        for name in ("results.csv", "pareto_M2.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_interrupted_append_resumes(self, tmp_path):
        spec = SweepSpec(betas=(0.0, 0.5), seeds=(0,), out_dir=tmp_path / "a", **SMALL)
        run_sweep(spec)
        reference = (tmp_path / "a" / "results.csv").read_bytes()
        # keep only the header and the first finished row, as after a crash
        lines = reference.decode().splitlines(keepends=True)
        (tmp_path / "b").mkdir()
        (tmp_path / "b" / "results.csv").write_text("".join(lines[:2]))
        run_sweep(SweepSpec(betas=(0.0, 0.5), seeds=(0,), out_dir=tmp_path / "b", **SMALL))
        assert (tmp_path / "b" / "results.csv").read_bytes() == reference

    def test_workers_do_not_change_bytes(self, tmp_path):
        kw = dict(betas=(0.0, 0.5), seeds=(0, 1), **SMALL)
        run_sweep(SweepSpec(out_dir=tmp_path / "a", **kw))
        run_sweep(SweepSpec(out_dir=tmp_path / "b", workers=2, **kw))
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_bad_header_refused(self, tmp_path):
        (tmp_path / "results.csv").write_text("a,b\n")
        with pytest.raises(SweepError):
            run_sweep(SweepSpec(betas=(0.0,), seeds=(0,), out_dir=tmp_path, **SMALL))

    def test_pareto_flags_recheck(self, tmp_path):
        run_sweep(SweepSpec(betas=(0.0, 0.3, 0.6, 1.0), seeds=(0,), out_dir=tmp_path, **SMALL))
        rows = read_csv(tmp_path / "pareto_M2.csv")[1:]
        pts = [(float(r[1]), float(r[2])) for r in rows]
        assert [int(r[4]) for r in rows] == [int(f) for f in pareto_mask(pts)]

    def test_extra_outputs(self, tmp_path):
        run_sweep(SweepSpec(betas=(0.2,), seeds=(3,), out_dir=tmp_path, trace=True, curve_window=50,
                            save_policies=True, **SMALL))
        trace = read_csv(tmp_path / "trace_M2_b200_s3.csv")
        assert trace[0][:3] == ["day", "hour", "area_id"] and len(trace) == 1 + 10 * 70
        curve = read_csv(tmp_path / "curve_M2_b200_s3.csv")
        assert curve[0] == ["day", "mean_reward"] and len(curve) == 5
        assert (tmp_path / "policy_M2_b200_s3.txt").exists()


def test_summarize_ratio():
    points = [
        {"beta": 0.0, "mean_cost": 100.0, "mean_gini": 0.5},
        {"beta": 0.5, "mean_cost": 110.0, "mean_gini": 0.3},
        {"beta": 1.0, "mean_cost": 150.0, "mean_gini": 0.1},
    ]
    s = summarize(points)
    assert s["best_ratio"]["beta"] == 0.5
    assert s["best_ratio"]["ratio"] == pytest.approx(4.0)
    assert s["deltas"][1]["gini_change_pct"] == pytest.approx(-80.0)
    assert s["deltas"][1]["cost_change_pct"] == pytest.approx(50.0)


class TestLearningCurve:
    def test_windows(self):
        assert learning_curve(np.arange(5.0), 2) == [(2, 0.5), (4, 2.5), (5, 4.0)]

    def test_zero_demand_converges_to_zero(self):
        cat = CategoryProfile(1, 2, (0.0, 0.0), (0.0, 0.0), phi=1.0, chi=1.0)
        sc = ScenarioConfig(M=1, categories=(cat,), sigma=10, train_days=2000, epsilon_decay=5e-4)
        rows = emit_learning_curve(sc, 0, 100)
        assert rows[-1][1] == 0.0

    def test_replayable(self, tmp_path):
        sc = build_scenario(2, train_days=300)
        emit_learning_curve(sc, 4, 30, tmp_path / "a.csv")
        emit_learning_curve(sc, 4, 30, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_improves_after_annealing(self):
        sc = build_scenario(2, train_days=DESK_TRAIN_DAYS, epsilon_decay=8.25e-7 * DESK_DECAY_FACTOR)
        rows = emit_learning_curve(sc, 0, 500)
        half = rows[len(rows) // 2:]
        assert spearmanr([d for d, _ in half], [m for _, m in half]).statistic > 0


class TestCli:
    def test_parse_betas(self):
        assert parse_betas("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert parse_betas("0.1,0.7") == (0.1, 0.7)
        assert parse_betas("") == ()
        with pytest.raises(ValueError):
            parse_betas("0:1")

    def test_parse_seeds(self):
        assert parse_seeds("3") == (0, 1, 2)
        assert parse_seeds("4,9") == (4, 9)

    def test_success(self, tmp_path, capsys):
        code = main(["--scenario", "2", "--beta", "0,1", "--seeds", "1", "--train-days", "100",
                     "--eval-days", "5", "--out", str(tmp_path)])
        assert code == 0
        assert len(read_csv(tmp_path / "results.csv")) == 3
        assert "results" in capsys.readouterr().out

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("M = 2\nsigma = 40\ntrain_days = 50\neval_days = 4\n")
        assert main(["--config", str(cfg), "--beta", "0.5", "--seeds", "1", "--out", str(tmp_path / "o")]) == 0

    @pytest.mark.parametrize("argv", [
        ["--beta", ""],
        ["--scenario", "7", "--seeds", "1"],
        ["--config", "/nonexistent/file.cfg"],
        ["--beta", "x"],
        ["--bogus-flag"],
    ])
    def test_config_errors_exit_one(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path)]) == 1

    def test_runtime_error_exits_two(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        code = main(["--scenario", "2", "--beta", "0", "--seeds", "1", "--train-days", "5",
                     "--out", str(blocker / "sub")])
        assert code == 2
