"""Monte Carlo driver, sweep, CSV and CLI tests."""

import dataclasses
import math

import numpy as np
import pytest

from bscsim.channel import default_config
from bscsim.cli import main
from bscsim.harness import (
    SweepSpec,
    apply_param,
    grid_ce_time,
    run_sweep,
    run_trial,
    validate_ce_sweep,
)


class TestRunTrial:
    def test_perfect_csi_equals_joint_with_exact_estimates(self):
        # Trial 21 draws channels whose sign convention matches the truth, so
        # zero-noise estimates equal the true channels exactly and the two
        # pipelines coincide.
        cfg = dataclasses.replace(
            default_config(a0=0.0), sigma2_w0=0.0, sigma2_w1=0.0
        )
        mj = run_trial(cfg, "joint", np.random.default_rng([cfg.seed, 0, 21]))
        mp = run_trial(cfg, "perfect_csi", np.random.default_rng([cfg.seed, 0, 21]))
        assert mj.min_rate == pytest.approx(mp.min_rate, rel=1e-9)
        assert mj.iterations == mp.iterations

    def test_benchmark_single_tag_matches_joint(self):
        cfg = default_config(M=1)
        mj = run_trial(cfg, "joint", np.random.default_rng([7, 0, 0]))
        mb = run_trial(cfg, "benchmark", np.random.default_rng([7, 0, 0]))
        assert mj.min_rate == pytest.approx(mb.min_rate, rel=1e-6)

    def test_joint_usually_beats_benchmark(self):
        cfg = default_config()
        wins = 0
        trials = 25
        for t in range(trials):
            mj = run_trial(cfg, "joint", np.random.default_rng([cfg.seed, 1, t]))
            mb = run_trial(cfg, "benchmark", np.random.default_rng([cfg.seed, 1, t]))
            wins += mj.min_rate >= mb.min_rate
        assert wins / trials >= 0.8

    def test_score_on_estimate_mode(self):
        cfg = default_config()
        rng_key = [cfg.seed, 2, 0]
        truth = run_trial(cfg, "isotropic", np.random.default_rng(rng_key))
        est = run_trial(
            cfg, "isotropic", np.random.default_rng(rng_key), score_on="estimate"
        )
        assert truth.min_rate != est.min_rate

    def test_all_designs_feasible(self):
        cfg = default_config()
        for design in ("joint", "asymptotic", "benchmark", "perfect_csi", "isotropic"):
            m = run_trial(cfg, design, np.random.default_rng([cfg.seed, 3, 1]))
            assert m.min_rate >= 0.0


class TestApplyParam:
    def test_n_rebuilds_k(self):
        cfg = apply_param(default_config(), "N", 8)
        assert cfg.N == 8 and cfg.K == 320

    def test_m_rebuilds_timing(self):
        cfg = apply_param(default_config(), "M", 9)
        assert cfg.M == 9 and cfg.K == 360
        assert cfg.tau_c0 == pytest.approx(1.0 / 100.0)

    def test_sigma_hu_dbm(self):
        cfg = apply_param(default_config(), "sigma2_HU_dbm", -90.0)
        assert cfg.sigma2_HU == pytest.approx(1e-12)

    def test_tau_c_fraction(self):
        cfg = apply_param(default_config(), "tau_c_fraction", 0.25)
        assert cfg.tau_c == pytest.approx(0.25)
        assert cfg.tau_c0 == cfg.tau_ck

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            apply_param(default_config(), "bogus", 1)


class TestRunSweep:
    def test_single_point_reproducible(self, tmp_path):
        cfg = default_config()
        spec = SweepSpec(parameter="L", values=(50.0,), trials=2, designs=("benchmark",))
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        r1 = run_sweep(spec, cfg, out=str(out1))
        r2 = run_sweep(spec, cfg, out=str(out2))
        assert r1 == r2
        strip = lambda p: [
            l for l in p.read_text().splitlines() if not l.startswith("# timestamp")
        ]
        assert strip(out1) == strip(out2)

    def test_parallel_matches_serial(self):
        cfg = default_config()
        spec = SweepSpec(parameter="M", values=(1, 2), trials=3, designs=("benchmark",))
        assert run_sweep(spec, cfg, jobs=1) == run_sweep(spec, cfg, jobs=2)

    def test_failed_trials_recorded(self):
        # benchmark needs N >= M for its ZF detector; M = 6 > N = 4 fails
        cfg = default_config()
        spec = SweepSpec(parameter="M", values=(2, 6), trials=3, designs=("benchmark",))
        recs = run_sweep(spec, cfg)
        assert recs[0]["benchmark_failed"] == 0
        assert recs[1]["benchmark_failed"] == 3
        assert math.isnan(recs[1]["benchmark_min_rate_mean"])

    def test_snr_sweep_monotone(self):
        cfg = default_config()
        spec = SweepSpec(
            parameter="snr_db", values=(0.0, 30.0), trials=6, designs=("isotropic",)
        )
        recs = run_sweep(spec, cfg)
        assert recs[1]["isotropic_min_rate_mean"] > recs[0]["isotropic_min_rate_mean"]

    def test_ratio_metadata_in_header(self, tmp_path):
        cfg = default_config(M=2)
        spec = SweepSpec(
            parameter="L", values=(30.0,), trials=2, designs=("joint", "benchmark")
        )
        out = tmp_path / "r.csv"
        run_sweep(spec, cfg, out=str(out))
        text = out.read_text()
        assert "ratio_geomean_joint_over_benchmark" in text

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(parameter="L", values=(), trials=1).validate()
        with pytest.raises(ValueError):
            SweepSpec(parameter="L", values=(2.0, 1.0), trials=1).validate()
        with pytest.raises(ValueError):
            SweepSpec(parameter="L", values=(1.0,), trials=1, designs=("x",)).validate()


class TestValidateCe:
    def test_ordering_small_grid(self):
        cfg = default_config()
        recs = validate_ce_sweep(cfg, [0.0, 20.0, 40.0], trials=40)
        for r in recs:
            assert (
                r["sum_rx_power_perfect"]
                >= r["sum_rx_power_lse_nouar"]
                >= r["sum_rx_power_lse_uar"]
            )
            assert r["sum_rx_power_lse_uar"] >= 0.8 * r["sum_rx_power_isotropic"]

    def test_high_snr_approaches_perfect(self):
        cfg = default_config()
        recs = validate_ce_sweep(cfg, [45.0], trials=40)
        r = recs[0]
        assert r["sum_rx_power_lse_nouar"] >= 0.99 * r["sum_rx_power_perfect"]


class TestGridCeTime:
    def test_feasible_cells_only(self):
        cfg = default_config()
        recs = grid_ce_time(cfg, [0.01, 0.3], [0.01, 0.2], trials=1)
        combos = {(r["tau_c0"], r["tau_ck"]) for r in recs}
        assert (0.3, 0.2) not in combos  # 0.3 + 4*0.2 > 1
        assert (0.01, 0.01) in combos
        for r in recs:
            assert r["min_rate_mean"] >= 0.0


class TestCli:
    def test_single_trial(self, capsys):
        assert main(["single-trial", "--design", "benchmark", "--M", "2"]) == 0
        out = capsys.readouterr().out
        assert "min_rate" in out

    def test_sweep_command(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(
            [
                "sweep", "--param", "L", "--values", "40", "--trials", "2",
                "--designs", "benchmark", "--out", str(out), "--seed", "3",
            ]
        )
        assert rc == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].startswith("parameter,value,trials,seed")
        assert len(lines) == 2

    def test_validate_ce_command(self, tmp_path):
        out = tmp_path / "ce.csv"
        rc = main(
            ["validate-ce", "--values", "10,30", "--trials", "3", "--out", str(out)]
        )
        assert rc == 0
        header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
        assert header.split(",")[:2] == ["snr_db", "sum_rx_power_lse_uar"]

    def test_grid_command(self, tmp_path):
        out = tmp_path / "grid.csv"
        rc = main(
            [
                "grid-ce-time", "--c0-values", "0.01,0.02", "--ck-values", "0.01",
                "--trials", "1", "--out", str(out), "--M", "2",
            ]
        )
        assert rc == 0
        assert out.read_text().count("\n") >= 3

    def test_config_file_and_flag_override(self, tmp_path):
        cfgfile = tmp_path / "c.cfg"
        from bscsim.channel import save_config

        save_config(default_config(N=8, M=2), cfgfile)
        out = tmp_path / "o.csv"
        rc = main(
            [
                "sweep", "--config", str(cfgfile), "--param", "L", "--values", "30",
                "--trials", "1", "--designs", "isotropic", "--out", str(out), "--N", "2",
            ]
        )
        assert rc == 0
