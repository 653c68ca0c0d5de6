import csv
import json

import numpy as np
import pytest

from pcwgprobe.cli import main


def run(args, capsys=None):
    code = main([str(a) for a in args])
    return code


class TestFiberCommand:
    def test_dispersion_csv_columns_and_anchor(self, tmp_path):
        assert run(["--out", tmp_path, "fiber", "--d-um", "4.0"]) == 0
        with open(tmp_path / "fiber_dispersion.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {
            "lambda_nm",
            "d_um",
            "n_eff",
            "beta_rad_per_um",
            "dbeta_dd_omega_over_c_per_um",
        }
        at_1600 = min(rows, key=lambda r: abs(float(r["lambda_nm"]) - 1600.0))
        assert float(at_1600["n_eff"]) == pytest.approx(1.40, abs=0.02)

    def test_empty_wavelength_range_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("grids: {lambda_start_nm: 1600.0, lambda_stop_nm: 1500.0}\n")
        assert run(["--config", cfg, "--out", tmp_path, "fiber", "--d-um", "1.0"]) == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("grids: {lambda_step_um: 1.0}\n")
        assert run(["--config", cfg, "fiber"]) == 2

    def test_profile_input(self, tmp_path):
        taper = tmp_path / "taper.csv"
        taper.write_text("l_c_mm,d_um\n0.0,0.6\n1.0,1.2\n2.0,2.2\n")
        assert run(
            ["--out", tmp_path, "fiber", "--profile", taper, "--lc-mm", "1.0"]
        ) == 0
        with open(tmp_path / "fiber_dispersion.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["d_um"]) == pytest.approx(1.2)


class TestBandsCommand:
    def test_bands_json_and_determinism(self, cli_out):
        assert run(["--out", cli_out, "bands"]) == 0
        first = (cli_out / "bands.json").read_bytes()
        assert run(["--out", cli_out, "bands"]) == 0
        assert (cli_out / "bands.json").read_bytes() == first
        payload = json.loads(first)
        labels = [c["label"] for c in payload["curves"]]
        assert "TE-1" in labels
        sample = payload["curves"][0]["samples"][0]
        assert set(sample) == {"beta_rad_per_um", "omega_norm", "lambda_nm", "n_g"}
        assert payload["phase_match"]["lambda_nm"] == pytest.approx(1600.0, rel=0.05)

    def test_thinned_reports_positive_shifts(self, cli_out, capsys):
        assert run(["--out", cli_out, "bands", "--thinned", "300"]) == 0
        payload = json.loads((cli_out / "bands.json").read_text())
        shifts = payload["thinning"]["d_omega_norm"]
        assert shifts["TE-2"] > shifts["TE-1"] > 0


class TestCoupleCommand:
    def test_gap_sweep_table(self, cli_out):
        assert run(["--out", cli_out, "couple", "--sweep", "gap"]) == 0
        with open(cli_out / "gap_sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert any(float(r["t_min"]) < 0.01 for r in rows)
        gammas = [float(r["gamma"]) for r in rows]
        assert max(gammas) >= 0.95

    def test_lateral_profile_symmetric(self, cli_out):
        assert run(["--out", cli_out, "couple", "--sweep", "lateral"]) == 0
        with open(cli_out / "lateral_profile.csv") as fh:
            rows = list(csv.DictReader(fh))
        values = np.array([float(r["one_minus_tmin"]) for r in rows])
        np.testing.assert_allclose(values, values[::-1], rtol=0, atol=1e-10)
        summary = json.loads((cli_out / "lateral_summary.json").read_text())
        assert summary["fwhm_um"] == pytest.approx(2.08, rel=0.25)


class TestMapCommand:
    def test_synth_analyze_round_trip(self, cli_out):
        assert run(["--out", cli_out, "--seed", "9", "map", "synth"]) == 0
        assert (cli_out / "map.meta.json").exists()
        assert run(["--out", cli_out, "map", "analyze", "--in", cli_out / "map.csv"]) == 0
        points = json.loads((cli_out / "resonances.json").read_text())
        bandpoints = json.loads((cli_out / "bandpoints.json").read_text())
        assert len(points) == len(bandpoints) >= 45
        assert {p["label"] for p in points} >= {"TE-1"}

    def test_seed_controls_noise(self, cli_out):
        assert run(["--out", cli_out, "--seed", "1", "map", "synth"]) == 0
        first = (cli_out / "map.csv").read_bytes()
        assert run(["--out", cli_out, "--seed", "1", "map", "synth"]) == 0
        assert (cli_out / "map.csv").read_bytes() == first
        assert run(["--out", cli_out, "--seed", "2", "map", "synth"]) == 0
        assert (cli_out / "map.csv").read_bytes() != first

    def test_analyze_constant_map_empty_result(self, cli_out):
        lam = np.arange(1565.0, 1575.0, 0.5)
        path = cli_out / "flat.csv"
        header = "lc_mm\\lambda_nm," + ",".join(repr(float(v)) for v in lam)
        rows = [
            repr(0.2 + 0.01 * i) + "," + ",".join(["0.95"] * lam.size)
            for i in range(5)
        ]
        path.write_text(header + "\n" + "\n".join(rows) + "\n")
        assert run(["--out", cli_out, "map", "analyze", "--in", path]) == 0
        assert json.loads((cli_out / "resonances.json").read_text()) == []

    def test_analyze_truncated_csv_exits_2(self, cli_out, capsys):
        path = cli_out / "trunc.csv"
        path.write_text(
            "lc_mm\\lambda_nm,1565.0,1565.5\n0.2,0.9,0.9\n0.3,0.9\n"
        )
        assert run(["--out", cli_out, "map", "analyze", "--in", path]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_analyze_missing_input_exits_2(self, cli_out):
        assert run(["--out", cli_out, "map", "analyze", "--in", cli_out / "nope.csv"]) == 2


class TestGlobalFlags:
    def test_print_effective_config(self, capsys):
        assert run(["--print-effective-config"]) == 0
        out = capsys.readouterr().out
        assert "lam_z_nm: 500.0" in out
        assert "gap_nm: 700.0" in out

    def test_outputs_end_with_single_newline(self, tmp_path):
        assert run(["--out", tmp_path, "fiber", "--d-um", "1.0"]) == 0
        data = (tmp_path / "fiber_dispersion.csv").read_bytes()
        assert data.endswith(b"\n") and not data.endswith(b"\n\n")
