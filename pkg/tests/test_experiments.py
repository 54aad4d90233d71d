import json

import numpy as np
import pytest

from succrelay.cli import main as cli_main
from succrelay.experiments import (
    ConfigError,
    ExperimentConfig,
    run_dmt,
    run_experiment,
    run_gain_curve,
    run_geometry_sweep,
    run_single_realization,
    sweep_csv_table,
    vblast_gap_report,
)

SMALL_SWEEP = dict(
    experiment="geometry_sweep",
    geometry="III",
    l=4,
    snr_grid_db=(0.0, 10.0, 20.0),
    trials=300,
    seed=424242,
    protocols=("direct", "classic2", "successive_genie"),
    adaptive_rule="a",
)


class TestConfig:
    def test_defaults_valid(self):
        cfg = ExperimentConfig()
        assert cfg.l == 7 and cfg.trials == 10_000 and cfg.adaptive_rule == "a"

    @pytest.mark.parametrize(
        "overrides,field",
        [
            (dict(experiment="plot"), "experiment"),
            (dict(geometry="IV"), "geometry"),
            (dict(geometry={"d_sd": 1.0}), "geometry"),
            (dict(l=0), "l"),
            (dict(snr_grid_db=()), "snr_grid_db"),
            (dict(trials=0), "trials"),
            (dict(seed=-1), "seed"),
            (dict(protocols=()), "protocols"),
            (dict(protocols=("direct", "alamouti")), "protocols"),
            (dict(adaptive_rule="d"), "adaptive_rule"),
            (dict(output_format="yaml"), "output_format"),
            (dict(workers=0), "workers"),
            (dict(dmt_scheme="direct"), "dmt_scheme"),
            (dict(dmt_r=-0.5), "dmt_r"),
            (dict(dmt_trials_per_point=(5, 5)), "dmt_trials_per_point"),
        ],
    )
    def test_validation_names_offending_field(self, overrides, field):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig(**{**SMALL_SWEEP, **overrides})
        assert err.value.field == field

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict({"snr": [0, 10]})
        assert err.value.field == "snr"

    def test_custom_geometry_unknown_key_rejected(self):
        geometry = dict(
            d_sd=1.0, d_sr1=0.5, d_sr2=0.5, d_r1d=0.5, d_r2d=0.5, d_r1r2=0.1,
            pathloss=4.0,
        )
        with pytest.raises(ConfigError) as err:
            ExperimentConfig(**{**SMALL_SWEEP, "geometry": geometry})
        assert err.value.field == "geometry"

    def test_custom_geometry_accepted(self):
        cfg = ExperimentConfig(
            **{
                **SMALL_SWEEP,
                "geometry": dict(
                    d_sd=1.0, d_sr1=0.5, d_sr2=0.5, d_r1d=0.5, d_r2d=0.5, d_r1r2=0.1
                ),
            }
        )
        rows = run_geometry_sweep(cfg)
        assert len(rows) == 3

    def test_json_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(SMALL_SWEEP))
        cfg = ExperimentConfig.from_json_file(path)
        assert cfg == ExperimentConfig(**SMALL_SWEEP)


class TestGeometrySweep:
    def test_row_shape_and_sanity(self):
        rows = run_geometry_sweep(ExperimentConfig(**SMALL_SWEEP))
        assert [r.snr_db for r in rows] == [0.0, 10.0, 20.0]
        for row in rows:
            assert set(row.rates) == set(SMALL_SWEEP["protocols"])
            assert all(v >= 0.0 for v in row.rates.values())
            assert 0.0 <= row.fallback_fraction <= 1.0
            assert 0.0 <= row.interference_free_fraction <= 1.0

    def test_rates_increase_with_snr(self):
        rows = run_geometry_sweep(ExperimentConfig(**SMALL_SWEEP))
        for name in SMALL_SWEEP["protocols"]:
            series = [r.rates[name] for r in rows]
            assert series == sorted(series)

    def test_no_fallback_without_rule(self):
        cfg = ExperimentConfig(**{**SMALL_SWEEP, "adaptive_rule": "none"})
        rows = run_geometry_sweep(cfg)
        assert all(r.fallback_fraction == 0.0 for r in rows)

    def test_single_trial_has_zero_stderr(self):
        cfg = ExperimentConfig(**{**SMALL_SWEEP, "trials": 1})
        rows = run_geometry_sweep(cfg)
        assert all(v == 0.0 for v in rows[0].stderrs.values())

    def test_stderr_scales_inverse_sqrt_trials(self):
        small = run_geometry_sweep(ExperimentConfig(**{**SMALL_SWEEP, "trials": 400}))
        large = run_geometry_sweep(ExperimentConfig(**{**SMALL_SWEEP, "trials": 1600}))
        ratio = small[1].stderrs["direct"] / large[1].stderrs["direct"]
        assert ratio == pytest.approx(2.0, rel=0.3)

    def test_worker_count_invariance(self):
        cfg1 = ExperimentConfig(**{**SMALL_SWEEP, "workers": 1})
        cfg3 = ExperimentConfig(**{**SMALL_SWEEP, "workers": 3})
        r1, r3 = run_geometry_sweep(cfg1), run_geometry_sweep(cfg3)
        assert r1 == r3


class TestGainCurve:
    def test_rows_cover_all_lengths_and_points(self):
        cfg = ExperimentConfig(
            experiment="gain_curve",
            snr_grid_db=(0.0, 20.0, 40.0),
            trials=2000,
            seed=7,
            gain_l_values=(3, 7),
        )
        rows = run_gain_curve(cfg)
        assert len(rows) == 6
        assert {r["l"] for r in rows} == {3, 7}
        assert all(r["capacity_gain"] > 0 for r in rows)


class TestDmtExperiment:
    def test_report_includes_formula(self):
        cfg = ExperimentConfig(
            experiment="dmt_slope",
            snr_grid_db=(20.0, 30.0, 40.0),
            trials=2000,
            seed=3,
            dmt_r=0.5,
            l=7,
        )
        result = run_dmt(cfg)
        assert result["dmt_formula"] == pytest.approx(2 * (1 - 8 / 7 * 0.5))
        assert len(result["outage_prob"]) == 3

    def test_bad_grid_reported_as_config_error(self):
        cfg = ExperimentConfig(
            experiment="dmt_slope", snr_grid_db=(0.0, 10.0, 20.0), trials=100, seed=3
        )
        with pytest.raises(ConfigError) as err:
            run_dmt(cfg)
        assert err.value.field == "snr_grid_db"


class TestSingleRealization:
    def test_entries_per_protocol_and_snr(self):
        cfg = ExperimentConfig(
            experiment="single_realization",
            geometry="I",
            l=3,
            snr_grid_db=(0.0, 10.0),
            trials=1,
            seed=5,
            protocols=("direct", "successive_genie", "theorem1"),
        )
        result = run_single_realization(cfg)
        assert len(result["entries"]) == 6
        assert set(result["realization"]) == {
            "h_sd", "h_sr1", "h_sr2", "h_r1r2", "h_r1d", "h_r2d"
        }


class TestVblastGap:
    def test_case3_gap_small_and_nonnegative(self):
        cfg = ExperimentConfig(
            experiment="geometry_sweep",
            geometry="III",
            l=7,
            snr_grid_db=(20.0,),
            trials=2000,
            seed=11,
            protocols=("successive_genie", "successive_vblast"),
        )
        rows = vblast_gap_report(cfg)
        assert rows[0].min_gap >= -1e-9
        assert rows[0].mean_gap < 0.05 * rows[0].mean_genie

    def test_requires_both_successive_schemes(self):
        cfg = ExperimentConfig(**SMALL_SWEEP)
        with pytest.raises(ConfigError):
            vblast_gap_report(cfg)


class TestOutput:
    def test_csv_header_pinned(self):
        cfg = ExperimentConfig(**SMALL_SWEEP)
        header, _ = sweep_csv_table(cfg, run_geometry_sweep(cfg))
        assert header == [
            "schema_version",
            "snr_db",
            "mean_direct",
            "stderr_direct",
            "mean_classic2",
            "stderr_classic2",
            "mean_successive_genie",
            "stderr_successive_genie",
            "fallback_fraction",
            "interference_free_fraction",
            "source_links_strong_fraction",
        ]

    def test_csv_byte_identical_across_runs_and_workers(self, tmp_path):
        outputs = []
        for run, workers in ((0, 1), (1, 1), (2, 3)):
            path = tmp_path / f"sweep{run}.csv"
            cfg = ExperimentConfig(
                **{**SMALL_SWEEP, "output_path": str(path), "workers": workers}
            )
            run_experiment(cfg)
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_json_byte_identical(self, tmp_path):
        path = tmp_path / "sweep.json"
        cfg = ExperimentConfig(
            **{**SMALL_SWEEP, "output_path": str(path), "output_format": "json"}
        )
        run_experiment(cfg)
        first = path.read_bytes()
        run_experiment(cfg)
        blobs = [first, path.read_bytes()]
        assert blobs[0] == blobs[1]
        payload = json.loads(blobs[0])
        assert payload["schema_version"] == 1
        assert len(payload["rows"]) == 3

    def test_csv_full_precision(self, tmp_path):
        path = tmp_path / "sweep.csv"
        cfg = ExperimentConfig(**{**SMALL_SWEEP, "output_path": str(path)})
        run_experiment(cfg)
        lines = path.read_text().strip().split("\n")
        value = float(lines[1].split(",")[2])
        rows = run_geometry_sweep(cfg)
        assert value == rows[0].rates["direct"]


class TestCli:
    def test_sweep_via_cli(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        rc = cli_main(
            [
                "--experiment", "geometry_sweep",
                "--geometry", "III",
                "--l", "4",
                "--snr", "0", "10",
                "--trials", "200",
                "--seed", "9",
                "--protocols", "direct", "successive_genie",
                "--adaptive", "a",
                "--out", str(out),
                "--format", "csv",
            ]
        )
        assert rc == 0
        assert out.exists()
        assert "snr=0 dB" in capsys.readouterr().out

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({**SMALL_SWEEP, "trials": 100}))
        out = tmp_path / "o.json"
        rc = cli_main(
            ["--config", str(cfg_path), "--trials", "150", "--out", str(out), "--format", "json"]
        )
        assert rc == 0
        assert json.loads(out.read_text())["config"]["trials"] == 150

    def test_config_error_exit_code(self, tmp_path, capsys):
        rc = cli_main(["--experiment", "geometry_sweep", "--l", "0"])
        assert rc == 2
        assert "config field 'l'" in capsys.readouterr().err

    def test_gain_curve_via_cli(self, capsys):
        rc = cli_main(
            [
                "--experiment", "gain_curve",
                "--snr", "0", "20",
                "--trials", "500",
                "--seed", "2",
                "--gain-l", "3",
            ]
        )
        assert rc == 0
        assert "G=" in capsys.readouterr().out

    def test_dmt_via_cli(self, capsys):
        rc = cli_main(
            [
                "--experiment", "dmt_slope",
                "--snr", "20", "30", "40",
                "--trials", "5000",
                "--seed", "2",
                "--r", "0.5",
            ]
        )
        assert rc == 0
        assert "diversity estimate" in capsys.readouterr().out

    def test_custom_geometry_json_flag(self, capsys):
        geometry = (
            '{"d_sd": 1.0, "d_sr1": 0.5, "d_sr2": 0.5,'
            ' "d_r1d": 0.5, "d_r2d": 0.5, "d_r1r2": 0.1}'
        )
        rc = cli_main(
            [
                "--experiment", "geometry_sweep",
                "--geometry", geometry,
                "--l", "3",
                "--snr", "10",
                "--trials", "100",
                "--seed", "1",
                "--protocols", "direct",
            ]
        )
        assert rc == 0
        assert "snr=10 dB" in capsys.readouterr().out
