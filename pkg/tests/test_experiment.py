"""Tests for configuration handling, CSV export, metrics, and the CLI."""

import numpy as np
import pytest

from gpreg import HybridSystem, IntegratorConfig, simulate
from gpreg.cli import main as cli_main
from gpreg.experiment import (ConfigError, ExperimentConfig, compare,
                              export_arc, load_config, read_trace,
                              run_experiment, trace_header, validate_config)
from gpreg.presets import PRESETS


def desk_config(tmp_path, exosystem="linear", regulator="gp", t_end=2.0):
    cfg = load_config_text(tmp_path, f"""
[experiment]
exosystem = {exosystem}
preset = desk
regulator = {regulator}
t_end = {t_end}
output_dir = {tmp_path}/out
""")
    return cfg


def load_config_text(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return load_config(path)


def timer_arc(t_end=3.5):
    sys = HybridSystem(lambda t, y, d: np.array([1.0]),
                       lambda t, y, d: (np.array([0.0]), d),
                       lambda t, y, d: y[0] - 1.0)
    return simulate(sys, np.array([0.0]), None,
                    IntegratorConfig(t_end=t_end, event_tol=1e-10))


class TestConfig:
    def test_preset_resolution_and_override(self, tmp_path):
        cfg = load_config_text(tmp_path, """
[experiment]
preset = desk

[regulator_core]
l = 123.0
""")
        assert cfg.l == 123.0
        assert cfg.delta == 20.0  # from the desk preset
        assert cfg.M == 2e6

    def test_default_config_reproduces_tables(self):
        cfg = load_config("configs/default.ini")
        assert validate_config(cfg) == []
        # Kernel table
        assert (cfg.n_ds, cfg.lambda_tau, cfg.sigma_p2, cfg.sigma_n2,
                cfg.sigma_thr2) == (100, 2.0, 1.0, 0.01, 0.1)
        assert cfg.lambda_eta == (0.1, 0.1)
        # Regulator table
        assert cfg.c == (15.0, 75.0, 125.0) and cfg.h == (15.0, 70.0)
        assert (cfg.l, cfg.delta, abs(cfg.L), cfg.g) == (250.0, 150.0, 20.0, 2.0)
        assert (cfg.m1, cfg.m2, cfg.rho) == (20.0, 20.0, 2.0)
        # Model table
        assert (cfg.M, cfg.J, cfg.wing_l, cfg.grav) == (5e4, 1.25e4, 2.0, 9.81)

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_text(tmp_path, "[experiment]\nbogus = 1\n")

    def test_threshold_above_amplitude_rejected(self, tmp_path):
        cfg = load_config_text(tmp_path, """
[experiment]
preset = table2

[gp_identifier]
sigma_thr2 = 1.5
""")
        errors = validate_config(cfg)
        assert any("sigma_thr2" in e for e in errors)

    def test_threshold_below_training_point_variance_rejected(self, tmp_path):
        cfg = load_config_text(tmp_path, """
[experiment]
preset = table2

[gp_identifier]
sigma_thr2 = 0.005
""")
        assert any("sigma_thr2" in e for e in validate_config(cfg))

    def test_table_threshold_accepted(self):
        cfg = ExperimentConfig()
        assert validate_config(cfg) == []

    def test_non_hurwitz_rejected(self, tmp_path):
        cfg = load_config_text(tmp_path, """
[experiment]
preset = desk

[regulator_core]
h = -1, 1
""")
        assert any("regulator_core" in e for e in validate_config(cfg))


class TestExport:
    def test_empty_arc_header_only(self, tmp_path):
        from gpreg import HybridArc

        export_arc(HybridArc([], [], False, 0.0), tmp_path, d=2)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines == [",".join(trace_header(2))]
        assert (tmp_path / "jumps.csv").read_text().splitlines() == [
            "j,t,sigma2_pre,sigma2_post,buffer_len"]

    def test_zero_horizon_records_initial_sample(self, tmp_path):
        # A zero-length horizon still has the degenerate interval [0, 0].
        sys = HybridSystem(lambda t, y, d: np.zeros(1))
        arc = simulate(sys, np.zeros(1), None, IntegratorConfig(t_end=0.0))
        export_arc(arc, tmp_path, d=2)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert len(lines) == 2 and lines[1].startswith("0,0,")

    def test_timer_jump_rows(self, tmp_path):
        arc = timer_arc()
        export_arc(arc, tmp_path, d=2)
        lines = (tmp_path / "jumps.csv").read_text().splitlines()
        assert lines[0] == "j,t,sigma2_pre,sigma2_post,buffer_len"
        assert len(lines) == 4
        ts = [float(line.split(",")[1]) for line in lines[1:]]
        assert ts == pytest.approx([1.0, 2.0, 3.0], abs=1e-9)

    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = [[rng.standard_normal() * 10.0 ** float(rng.integers(-8, 8))
                 for _ in range(13)] for _ in range(20)]
        for row in rows:
            row[1] = float(rng.integers(0, 5))
        arc = timer_arc()
        export_arc(arc, tmp_path, d=2, rows=rows)
        _, back = read_trace(tmp_path / "trace.csv")
        assert len(back) == len(rows)
        for got, want in zip(back, rows):
            assert got == [float(v) for v in want]


class TestRunExperiment:
    def test_desk_linear_completes(self, tmp_path):
        cfg = desk_config(tmp_path, t_end=3.0)
        arc, summary = run_experiment(cfg)
        assert summary.jump_count >= 1
        assert not summary.zeno
        assert summary.max_post_jump_sigma2 < cfg.sigma_thr2
        assert (tmp_path / "out" / "trace.csv").exists()
        assert (tmp_path / "out" / "jumps.csv").exists()
        assert (tmp_path / "out" / "summary.txt").exists()

    def test_baseline_zero_jumps(self, tmp_path):
        cfg = desk_config(tmp_path, regulator="baseline", t_end=1.0)
        _, summary = run_experiment(cfg)
        assert summary.jump_count == 0

    def test_invalid_config_raises_before_simulation(self, tmp_path):
        cfg = desk_config(tmp_path)
        cfg.sigma_thr2 = 1.5
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_summary_consistent_with_jump_csv(self, tmp_path):
        cfg = desk_config(tmp_path, t_end=3.0)
        arc, summary = run_experiment(cfg)
        jump_lines = (tmp_path / "out" / "jumps.csv").read_text().splitlines()
        assert summary.jump_count == len(jump_lines) - 1

    def test_tail_recomputable_from_trace(self, tmp_path):
        cfg = desk_config(tmp_path, t_end=3.0)
        _, summary = run_experiment(cfg)
        header, rows = read_trace(tmp_path / "out" / "trace.csv")
        i_t, i_e = header.index("t"), header.index("e")
        cut = 0.8 * cfg.t_end
        tail = max(abs(r[i_e]) for r in rows if r[i_t] >= cut)
        assert tail == summary.tail_sup_e

    def test_deterministic_traces(self, tmp_path):
        cfg1 = desk_config(tmp_path, t_end=1.5)
        run_experiment(cfg1, tmp_path / "a")
        run_experiment(cfg1, tmp_path / "b")
        assert ((tmp_path / "a" / "trace.csv").read_bytes()
                == (tmp_path / "b" / "trace.csv").read_bytes())
        assert ((tmp_path / "a" / "jumps.csv").read_bytes()
                == (tmp_path / "b" / "jumps.csv").read_bytes())


class TestCompare:
    def test_compare_writes_report(self, tmp_path):
        cfg = desk_config(tmp_path, t_end=2.0)
        gp_summary, base_summary, ratio = compare(cfg)
        report = (tmp_path / "out" / "comparison.txt").read_text()
        assert "tail_sup_e_gp" in report and "ratio" in report
        assert base_summary.jump_count == 0
        assert gp_summary.jump_count >= 1

    def test_compare_requires_gp_config(self, tmp_path):
        cfg = desk_config(tmp_path, regulator="baseline")
        with pytest.raises(ConfigError):
            compare(cfg)


class TestCli:
    def test_validate_ok(self, capsys):
        assert cli_main(["validate", "configs/default.ini"]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_rejects_bad_threshold(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[experiment]\npreset = table2\n"
                        "[gp_identifier]\nsigma_thr2 = 1.5\n")
        assert cli_main(["validate", str(path)]) == 2
        assert "sigma_thr2" in capsys.readouterr().err

    def test_run_and_exit_code(self, tmp_path, capsys):
        path = tmp_path / "run.ini"
        path.write_text(f"""
[experiment]
preset = desk
regulator = gp
t_end = 1.0
output_dir = {tmp_path}/out
""")
        assert cli_main(["run", str(path)]) == 0
        out = capsys.readouterr().out
        assert "tail_sup_e" in out

    def test_compare_rejects_unknown_target(self, tmp_path, capsys):
        path = tmp_path / "c.ini"
        path.write_text("[experiment]\npreset = desk\n")
        assert cli_main(["compare", str(path), "--against", "mpc"]) == 2

    def test_presets_lists_both(self, capsys):
        assert cli_main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "table2" in out and "desk" in out
