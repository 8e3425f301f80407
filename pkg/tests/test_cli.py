import json

import numpy as np
import pytest

from swipt.cli import (
    EXIT_INFEASIBLE,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    main,
)


def small_region_config(**overrides):
    cfg = {
        "kind": "region",
        "system": {
            "noise_vars": [0.8, 1.6],
            "min_rates_kbps": [300.0, 150.0],
            "deficits_uW": [30.0, 15.0],
            "efficiency": 1e-4,
            "tx_budget_W": 10.0,
            "architectures": ["ideal", "ideal"],
        },
        "fading": {
            "kind": "discretized-exponential",
            "mean_gains": [0.8, 0.5],
            "step": 0.5,
            "cap": 7.5,
        },
        "solver": {"num_points": 5},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestRegionCommand:
    def test_writes_trace_and_snapshot(self, tmp_path):
        cfg_path = write_config(tmp_path, small_region_config())
        out = tmp_path / "out"
        assert main(["region", "--config", cfg_path, "--out", str(out), "--quiet"]) == EXIT_OK
        assert (out / "trace.csv").exists()
        assert (out / "resolved_config.json").exists()
        lines = (out / "trace.csv").read_text().splitlines()
        assert len(lines) == 6  # header + 5 points

    def test_points_flag_overrides(self, tmp_path):
        cfg_path = write_config(tmp_path, small_region_config())
        out = tmp_path / "out"
        main(["region", "--config", cfg_path, "--out", str(out), "--points", "3", "--quiet"])
        lines = (out / "trace.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path, small_region_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["region", "--config", cfg_path, "--out", str(out1), "--quiet"])
        main(["region", "--config", cfg_path, "--out", str(out2), "--quiet"])
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        assert ((out1 / "resolved_config.json").read_bytes()
                == (out2 / "resolved_config.json").read_bytes())

    def test_resolved_config_round_trips(self, tmp_path):
        from swipt.system import SystemConfig
        cfg_path = write_config(tmp_path, small_region_config())
        out = tmp_path / "out"
        main(["region", "--config", cfg_path, "--out", str(out), "--quiet"])
        snapshot = json.loads((out / "resolved_config.json").read_text())
        system = SystemConfig.from_dict(snapshot["system"])
        again = SystemConfig.from_dict(system.to_dict())
        np.testing.assert_array_equal(system.min_rates, again.min_rates)
        np.testing.assert_array_equal(system.deficits, again.deficits)


class TestSimulateCommand:
    def test_simulate_writes_report(self, tmp_path):
        cfg = small_region_config(kind="simulate")
        cfg["weights"] = [1.0, 1.0]
        cfg["sim"] = {"horizon": 20000, "seed": 5, "epsilon_fraction": 0.01}
        cfg_path = write_config(tmp_path, cfg)
        out = tmp_path / "sim"
        assert main(["simulate", "--config", cfg_path, "--out", str(out), "--quiet"]) == EXIT_OK
        report = json.loads((out / "sim_report.json").read_text())
        assert report["horizon"] == 20000
        assert report["seed"] == 5
        assert (out / "sim_windows.csv").exists()

    def test_seed_flag_overrides(self, tmp_path):
        cfg = small_region_config(kind="simulate")
        cfg["sim"] = {"horizon": 5000, "seed": 5, "epsilon_fraction": 0.01}
        cfg_path = write_config(tmp_path, cfg)
        out = tmp_path / "sim"
        main(["simulate", "--config", cfg_path, "--out", str(out), "--seed", "99", "--quiet"])
        report = json.loads((out / "sim_report.json").read_text())
        assert report["seed"] == 99


class TestMacCommand:
    def test_mac_region_with_duality_report(self, tmp_path):
        cfg = {
            "kind": "mac-region",
            "mac": {
                "budgets_W": [1.5, 1.0],
                "noise_var": 1.0,
                "min_rates_kbps": [0.0, 0.0],
                "deficit_uW": 0.0,
                "efficiency": 1e-4,
            },
            "fading": {
                "kind": "discretized-exponential",
                "mean_gains": [0.8, 0.5],
                "step": 1.5,
                "cap": 4.5,
            },
            "solver": {"num_points": 3, "bc_num_points": 9},
        }
        cfg_path = write_config(tmp_path, cfg)
        out = tmp_path / "mac"
        assert main(["mac-region", "--config", cfg_path, "--out", str(out), "--quiet"]) == EXIT_OK
        assert (out / "mac_trace.csv").exists()
        assert (out / "bc_trace.csv").exists()
        report = json.loads((out / "duality_report.json").read_text())
        assert report["all_inside"] is True


class TestExitCodes:
    def test_usage_error_on_bad_command(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_usage_error_on_missing_config(self):
        assert main(["region"]) == EXIT_USAGE

    def test_usage_error_on_bad_figure(self, tmp_path):
        assert main(["figure-preset", "fig9", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_config_parse_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["region", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_missing_field_is_usage_error(self, tmp_path):
        cfg = small_region_config()
        del cfg["system"]["noise_vars"]
        cfg_path = write_config(tmp_path, cfg)
        assert main(["region", "--config", cfg_path, "--out", str(tmp_path)]) == EXIT_USAGE

    def test_infeasible_config(self, tmp_path):
        cfg = small_region_config()
        cfg["system"]["tx_budget_W"] = 0.05
        cfg_path = write_config(tmp_path, cfg)
        assert main(["region", "--config", cfg_path, "--out", str(tmp_path)]) == EXIT_INFEASIBLE

    def test_io_error_on_unwritable_dir(self, tmp_path):
        cfg_path = write_config(tmp_path, small_region_config())
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        target = blocker / "sub"
        code = main(["region", "--config", cfg_path, "--out", str(target)])
        assert code == EXIT_IO


class TestPresets:
    def test_preset_catalog_parameters(self):
        from swipt.cli import BASE_SYSTEM, _preset_curves, _system_from_dict
        fig2 = _preset_curves("fig2")
        assert set(fig2) == {"ideal", "time_switching", "power_splitting",
                             "ideal_no_min_rates", "no_rf_baseline"}
        base = _system_from_dict(BASE_SYSTEM)
        np.testing.assert_allclose(base.noise_vars, [0.8, 1.6])
        np.testing.assert_allclose(base.deficits, [60e-6, 30e-6])
        assert base.tx_budget == 10.0
        no_rf = _system_from_dict(fig2["no_rf_baseline"])
        np.testing.assert_allclose(no_rf.deficits, [0.0, 0.0])
        np.testing.assert_allclose(no_rf.min_rates, base.min_rates)
        free = _system_from_dict(fig2["ideal_no_min_rates"])
        np.testing.assert_allclose(free.min_rates, [0.0, 0.0])
        np.testing.assert_allclose(free.deficits, base.deficits)

        fig3 = _preset_curves("fig3")
        assert set(fig3) == {"all_ts_10W", "all_ps_10W", "mixed_ps_ts_10W",
                             "mixed_ps_ts_15W"}
        mixed15 = _system_from_dict(fig3["mixed_ps_ts_15W"])
        assert mixed15.tx_budget == 15.0
        assert mixed15.architectures[0].value == "power_splitting"
        assert mixed15.architectures[1].value == "time_switching"

        for fig, levels in (("fig4", "ts"), ("fig5", "ps")):
            curves = _preset_curves(fig)
            assert len(curves) == 3
            base_low = _system_from_dict(curves[f"{levels}_deficit_30_15uW"])
            base_high = _system_from_dict(curves[f"{levels}_deficit_120_60uW"])
            np.testing.assert_allclose(base_high.deficits, 4 * base_low.deficits)
