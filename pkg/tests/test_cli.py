"""Tests for the command-line interface."""

import json
from unittest.mock import patch

import numpy as np
import pytest

from wrinkle_ndt.__main__ import build_parser, main
from wrinkle_ndt.app import SWEEP_HEADER, sweep_rows, table2_rows
from wrinkle_ndt.core.config import SweepRange, load_preset
from wrinkle_ndt.core.errors import HomogenizationSingularityError
from wrinkle_ndt.core.fpp import generate_fringes
from wrinkle_ndt.core.loader import DataFileLoader
from wrinkle_ndt.core.writer import ReportWriter

FAST = ["--strips", "32", "--zpoints", "2"]

FLAT_RUN = {"layup": "[0]_8", "wrinkle": {"A": 0.0, "lambda": 5.0}}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParser:
    """Tests for argument parsing."""

    def test_command_required(self):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args([])
        assert excinfo.value.code == 2

    def test_unknown_preset(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["stiffness", "--preset", "nope"])

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "wrinkle-ndt" in capsys.readouterr().out


class TestTable2:
    """Tests for the table2 command."""

    def test_output(self, capsys):
        code, out, _ = run(capsys, "table2")
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "ratio,phi_max_deg"
        assert lines[1] == "0.1,32.14"
        assert lines[-1] == "0.5,72.34"
        assert len(lines) == 10

    def test_rows(self):
        assert [angle for _, angle in table2_rows()] == [
            32.14, 43.30, 51.49, 57.52, 62.05, 65.55, 68.30, 70.52, 72.34
        ]


class TestStiffness:
    """Tests for the stiffness command."""

    def test_report(self, capsys):
        code, out, _ = run(capsys, "stiffness", "--preset", "xply8-a050", *FAST)
        report = json.loads(out)
        assert code == 0
        assert report["name"] == "xply8-a050"
        assert report["layup"] == "[0/90]_2s"
        assert report["discretization"] == {"n_strips": 32, "n_z_points": 2}
        assert report["convergence"]["fine"] == {"n_strips": 64, "n_z_points": 4}
        assert report["no_degradation"] is False
        stiffness = np.array(report["effective_stiffness_GPa"])
        assert stiffness.shape == (6, 6)
        assert np.allclose(stiffness, stiffness.T)
        assert 0.0 < report["degradation"]["E11"] < 1.0

    def test_specimen_i_ratio(self, capsys):
        code, out, _ = run(capsys, "stiffness", "--preset", "specimen-I", *FAST)
        wrinkle = json.loads(out)["wrinkle"]
        assert code == 0
        assert wrinkle["ratio"] == pytest.approx(1.2 / 6.6)
        assert round(wrinkle["ratio"], 2) == 0.18

    def test_flat_wrinkle_has_no_degradation(self, capsys, tmp_path):
        path = tmp_path / "flat.json"
        path.write_text(json.dumps({"layup": "[0]_8", "wrinkle": {"A": 0.0, "lambda": 5.0}}), encoding="utf-8")
        code, out, _ = run(capsys, "stiffness", "--config", str(path), *FAST)
        report = json.loads(out)
        assert code == 0
        assert report["no_degradation"] is True
        assert report["degradation"]["E11"] == pytest.approx(1.0)
        assert report["effective_constants"]["E11"] == pytest.approx(133.3, rel=1e-9)

    def test_deterministic_output(self, capsys):
        _, first, _ = run(capsys, "stiffness", "--preset", "xply8-a050", *FAST)
        _, second, _ = run(capsys, "stiffness", "--preset", "xply8-a050", *FAST, "--workers", "4")
        assert first == second

    def test_writes_file(self, capsys, tmp_path):
        out_path = tmp_path / "report.json"
        code, out, _ = run(capsys, "stiffness", "--preset", "xply8-a050", *FAST, "--out", str(out_path))
        assert code == 0
        assert out == ""
        assert json.loads(out_path.read_text(encoding="utf-8"))["name"] == "xply8-a050"

    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "stiffness")
        assert code == 2
        assert "error[config]" in err

    def test_both_sources(self, capsys, tmp_path):
        code, _, _ = run(capsys, "stiffness", "--preset", "specimen-I", "--config", str(tmp_path / "x.json"))
        assert code == 2

    def test_unreadable_config(self, capsys, tmp_path):
        code, _, err = run(capsys, "stiffness", "--config", str(tmp_path / "absent.json"))
        assert code == 4
        assert "error[io]" in err

    def test_schema_error_exit_code(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"layup": "[0]_8", "wrinkle": {"A": 0.1, "lambda": 5.0}, "extra": 1}', encoding="utf-8")
        code, _, err = run(capsys, "stiffness", "--config", str(path))
        assert code == 2
        assert "extra" in err

    def test_singular_block_exit_code(self, capsys):
        error = HomogenizationSingularityError("singular [C_AA]", x=1.25, ply=3)
        with patch("wrinkle_ndt.app.homogenize_wrinkle", side_effect=error):
            code, out, err = run(capsys, "stiffness", "--preset", "xply8-a050", *FAST)
        assert code == 3
        assert out == ""
        assert "error[homogenization-singularity]" in err
        assert "ply=3" in err

    def test_too_few_strips(self, capsys):
        code, _, err = run(capsys, "stiffness", "--preset", "xply8-a050", "--strips", "8")
        assert code == 2
        assert "n_strips" in err


class TestSweep:
    """Tests for the sweep command."""

    def test_empty_range_writes_header(self, capsys):
        code, out, _ = run(capsys, "sweep", "--preset", "xply8-a050", "--start", "0.5", "--stop", "0.1", *FAST)
        assert code == 0
        assert out == ",".join(SWEEP_HEADER) + "\n"

    def test_rows(self, capsys):
        code, out, _ = run(capsys, "sweep", "--preset", "xply8-a050", "--start", "0.1", "--stop", "0.2", "--step", "0.05", *FAST)
        lines = out.strip().splitlines()
        assert code == 0
        assert len(lines) == 4
        moduli = [float(line.split(",")[3]) for line in lines[1:]]
        assert moduli[0] > moduli[1] > moduli[2]

    def test_parallel_rows_in_order(self):
        cfg = load_preset("xply8-a050").with_overrides(n_strips=32, n_z_points=2)
        sweep = SweepRange(0.1, 0.3, 0.1)
        serial = sweep_rows(cfg, sweep)
        parallel = sweep_rows(cfg.with_overrides(workers=3), sweep)
        assert serial == parallel
        assert [row[0] for row in serial] == [0.1, 0.2, 0.3]


class TestShearIntegrate:
    """Tests for the shear-integrate command."""

    def test_constant_phase(self, capsys, tmp_path):
        path = tmp_path / "phase.csv"
        ReportWriter().write_matrix(path, np.ones((4, 2)))
        code, out, _ = run(capsys, "shear-integrate", str(path), "--delta-y", "5", "--pixel-pitch", "0.5")
        rows = [[float(v) for v in line.split(",")] for line in out.strip().splitlines()]
        step = 632.8 / (4 * np.pi * 5.0) * 0.5
        assert code == 0
        assert rows[0] == [0.0, 0.0]
        assert rows[3][1] == pytest.approx(3 * step)

    def test_masked_cell_left_empty(self, capsys, tmp_path):
        values = np.ones((4, 2))
        values[1, 0] = np.nan
        path = tmp_path / "phase.csv"
        ReportWriter().write_matrix(path, values)
        code, out, _ = run(capsys, "shear-integrate", str(path), "--delta-y", "5", "--pixel-pitch", "0.5")
        lines = out.strip().splitlines()
        step = 632.8 / (4 * np.pi * 5.0) * 0.5
        assert code == 0
        assert lines[1].split(",")[0] == ""
        assert float(lines[3].split(",")[0]) == pytest.approx(3 * step)

    def test_delta_y_required(self, capsys, tmp_path):
        path = tmp_path / "phase.csv"
        ReportWriter().write_matrix(path, np.ones((4, 2)))
        code, _, err = run(capsys, "shear-integrate", str(path))
        assert code == 2
        assert "delta-y" in err


class TestFppExtract:
    """Tests for the fpp-extract command."""

    @staticmethod
    def _cloud(path, offset):
        coords = np.arange(0.0, 5.01, 0.5)
        xx, yy = np.meshgrid(coords, coords)
        points = np.column_stack([xx.ravel() + offset, yy.ravel(), 0.1 * xx.ravel()])
        ReportWriter().write_point_cloud(path, points)
        return path

    def test_writes_grid_and_sidecar(self, capsys, tmp_path):
        before = self._cloud(tmp_path / "before.csv", 0.0)
        after = tmp_path / "after.csv"
        coords = np.arange(0.0, 5.01, 0.5)
        xx, yy = np.meshgrid(coords, coords)
        ReportWriter().write_point_cloud(after, np.column_stack([xx.ravel(), yy.ravel(), 0.1 * xx.ravel() + 0.2]))
        out_path = tmp_path / "dz.csv"
        code, _, _ = run(capsys, "fpp-extract", str(before), str(after), "--grid", "1", "1", "0.5", "0.5", "7", "7", "--out", str(out_path))
        assert code == 0
        meta = json.loads(out_path.with_suffix(".json").read_text(encoding="utf-8"))
        assert meta["shape"] == [7, 7]
        assert meta["supported_cells"] == 49
        values = np.loadtxt(out_path, delimiter=",")
        assert np.allclose(values, 0.2, atol=1e-9)

    def test_no_overlap_exit_code(self, capsys, tmp_path):
        before = self._cloud(tmp_path / "before.csv", 0.0)
        after = self._cloud(tmp_path / "after.csv", 20.0)
        code, _, err = run(capsys, "fpp-extract", str(before), str(after), "--grid", "0", "0", "1", "1", "26", "6")
        assert code == 3
        assert "error[no-overlap]" in err

    def test_grid_required(self, capsys, tmp_path):
        before = self._cloud(tmp_path / "before.csv", 0.0)
        code, _, _ = run(capsys, "fpp-extract", str(before), str(before))
        assert code == 2

    def test_bad_cloud_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n", encoding="utf-8")
        code, _, _ = run(capsys, "fpp-extract", str(bad), str(bad), "--grid", "0", "0", "1", "1", "2", "2")
        assert code == 4


class TestCompare:
    """Tests for the compare command."""

    def test_builtin_dataset(self, capsys):
        code, out, _ = run(capsys, "compare", "--dataset", "fpp-specimen-I")
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "load,measured,reference,error_percent,error_display"
        assert [line.split(",")[-1] for line in lines[1:]] == ["8.4%", "4.1%", "5.5%", "15.6%", "6.0%"]

    def test_denominator_override(self, capsys):
        _, out, _ = run(capsys, "compare", "--dataset", "shearography-specimen-I", "--denominator", "measured")
        assert out.strip().splitlines()[1].endswith("6.7%")

    def test_series_file(self, capsys, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("load,measured,reference\n1,1.1,1.0\n", encoding="utf-8")
        code, out, _ = run(capsys, "compare", "--series", str(path))
        assert code == 0
        assert out.strip().splitlines()[1].endswith("10.0%")

    def test_zero_reference(self, capsys, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("load,measured,reference\n1,1.0,0.0\n", encoding="utf-8")
        code, _, err = run(capsys, "compare", "--series", str(path))
        assert code == 3
        assert "error[zero-denominator]" in err

    def test_config_denominator(self, capsys, tmp_path):
        series = tmp_path / "series.csv"
        series.write_text("load,measured,reference\n1,1.1,1.0\n", encoding="utf-8")
        config = tmp_path / "run.json"
        config.write_text(json.dumps({**FLAT_RUN, "output": {"denominator": "measured"}}), encoding="utf-8")
        code, out, _ = run(capsys, "compare", "--series", str(series), "--config", str(config))
        assert code == 0
        assert out.strip().splitlines()[1].endswith("9.1%")
        _, out, _ = run(
            capsys, "compare", "--series", str(series), "--config", str(config), "--denominator", "reference"
        )
        assert out.strip().splitlines()[1].endswith("10.0%")

    def test_config_without_output_keeps_dataset_convention(self, capsys, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps(FLAT_RUN), encoding="utf-8")
        _, out, _ = run(capsys, "compare", "--dataset", "fpp-specimen-I", "--config", str(config))
        assert out.strip().splitlines()[1].endswith("8.4%")


class TestFppHeight:
    """Tests for the fpp-height command."""

    @staticmethod
    def _images(tmp_path):
        rows, cols = np.mgrid[0:8, 0:32].astype(float)
        carrier = 2 * np.pi * cols / 8.0
        surface = 0.3 * np.sin(2 * np.pi * cols / 32.0)
        writer = ReportWriter()
        paths = []
        for tag, phase in (("obj", carrier + surface), ("ref", carrier)):
            for index, image in enumerate(generate_fringes(phase)):
                path = tmp_path / f"{tag}{index}.csv"
                writer.write_matrix(path, image.values)
                paths.append(str(path))
        return paths[:3], paths[3:], surface

    def test_height_map_from_flags(self, capsys, tmp_path):
        images, reference, surface = self._images(tmp_path)
        out_path = tmp_path / "height.csv"
        code, _, _ = run(
            capsys, "fpp-height", *images, "--reference", *reference, "--k-cal", "0.04", "--out", str(out_path)
        )
        grid = DataFileLoader().load_height_grid(out_path)
        assert code == 0
        assert grid.mask.all()
        np.testing.assert_allclose(grid.values, 0.04 * surface, atol=1e-9)

    def test_calibration_from_config(self, capsys, tmp_path):
        images, reference, surface = self._images(tmp_path)
        config = tmp_path / "run.json"
        config.write_text(json.dumps({**FLAT_RUN, "fpp": {"k_cal": 0.02, "fringe_axis": 1}}), encoding="utf-8")
        code, out, _ = run(capsys, "fpp-height", *images, "--reference", *reference, "--config", str(config))
        values = np.array([[float(v) for v in line.split(",")] for line in out.strip().splitlines()])
        assert code == 0
        np.testing.assert_allclose(values, 0.02 * surface, atol=1e-9)

    def test_calibration_required(self, capsys, tmp_path):
        images, reference, _ = self._images(tmp_path)
        code, _, err = run(capsys, "fpp-height", *images, "--reference", *reference)
        assert code == 2
        assert "k-cal" in err


class TestOutputDirectory:
    """Tests for the config output directory."""

    def test_default_file_name(self, capsys, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(
            json.dumps({**FLAT_RUN, "name": "flat", "output": {"directory": str(tmp_path / "results")}}),
            encoding="utf-8",
        )
        code, out, _ = run(capsys, "stiffness", "--config", str(config), *FAST)
        assert code == 0
        assert out == ""
        report = json.loads((tmp_path / "results" / "flat-stiffness.json").read_text(encoding="utf-8"))
        assert report["name"] == "flat"

    def test_relative_out_lands_in_directory(self, capsys, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(
            json.dumps({**FLAT_RUN, "output": {"directory": str(tmp_path / "results")}}), encoding="utf-8"
        )
        code, _, _ = run(capsys, "table2", "--config", str(config), "--out", "angles.csv")
        assert code == 0
        assert (tmp_path / "results" / "angles.csv").read_text(encoding="utf-8").startswith("ratio,phi_max_deg")


class TestInternalErrors:
    """Tests for failures outside the error hierarchy."""

    def test_unexpected_exception(self, capsys):
        with patch("wrinkle_ndt.app.run_table2", side_effect=RuntimeError("boom")):
            code, _, err = run(capsys, "table2")
        assert code == 1
        assert "error[internal]: RuntimeError: boom" in err
