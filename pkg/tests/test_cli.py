"""Command-line interface: CSV payloads, flags, exit codes, figures.

Physics-heavy paths run on filled (f = 1) pairs with fixed truncation and
very coarse grids; the numerical accuracy of those paths is pinned elsewhere.
"""

import dataclasses

import numpy as np
import pytest

from otecasimir.cli import _bracket_crossings, main, pressure_rows
from otecasimir.config import load_config, parse_config

UNIFORM_EQ = """\
gap: 2.0e-6
thermal: {t1: 300.0, t2: 300.0, tenv: 300.0}
grating1:
  period: 1.0e-6
  depth: 0.4e-6
  thickness: 0.8e-6
  filling: 1.0
  ridge: silica-model
grating2:
  period: 1.0e-6
  depth: 0.3e-6
  thickness: null
  filling: 1.0
  ridge: silicon-model
quadrature:
  kx_nodes: 4
  ky_nodes: 6
  origin_levels: 3
  tail_kappa: 10.0
  matsubara_rel_cut: 1.0e-8
truncation: {mode: fixed, M: 0, mbar: 0}
output: {figures: false}
"""

UNIFORM_NEQ = UNIFORM_EQ.replace(
    "thermal: {t1: 300.0, t2: 300.0, tenv: 300.0}",
    "thermal: {t1: 200.0, t2: 400.0, tenv: 10.0}",
).replace(
    "quadrature:",
    "quadrature:\n  tolerance: 5.0e-2\n  omega_panels: 3\n  max_refine: 2",
).replace("  kx_nodes: 4\n  ky_nodes: 6", "  kx_nodes: 4\n  ky_nodes: 4").replace(
    "  origin_levels: 3\n  tail_kappa: 10.0", "  origin_levels: 2\n  tail_kappa: 8.0"
)


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name="run.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


def read_csv(text):
    lines = text.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    columns = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:]]
    return header, columns, rows


class TestPressureCommand:
    def test_csv_payload_at_equilibrium(self, write_config, tmp_path):
        cfg_path = write_config(UNIFORM_EQ)
        out = tmp_path / "point.csv"
        assert main(["pressure", "--config", str(cfg_path), "--out", str(out)]) == 0
        header, columns, rows = read_csv(out.read_text())
        assert columns == ["d", "total", "eq_part", "delta_part", "error", "M", "mbar", "wall_time_s"]
        assert len(rows) == 1
        row = dict(zip(columns, rows[0]))
        assert float(row["d"]) == 2.0e-6
        assert row["delta_part"] == "0"  # exact equilibrium null survives formatting
        assert float(row["total"]) == float(row["eq_part"])
        assert float(row["total"]) < 0.0
        assert (row["M"], row["mbar"]) == ("0", "0")
        assert float(row["wall_time_s"]) > 0.0
        assert header[0].startswith("# otecasimir ")
        assert header[1] == "# command: pressure"

    def test_header_echo_reparses_to_the_same_run(self, write_config, tmp_path):
        cfg_path = write_config(UNIFORM_EQ)
        out = tmp_path / "point.csv"
        main(["pressure", "--config", str(cfg_path), "--out", str(out)])
        header, _, _ = read_csv(out.read_text())
        echoed = "\n".join(ln[2:] if ln.startswith("# ") else "" for ln in header[2:])
        cfg = load_config(cfg_path)
        reparsed = parse_config(echoed)
        assert reparsed.echo() == cfg.echo()
        assert reparsed.gap == cfg.gap and reparsed.thermal == cfg.thermal

    def test_stdout_when_no_output_path(self, write_config, capsys):
        cfg_path = write_config(UNIFORM_EQ)
        assert main(["pressure", "--config", str(cfg_path)]) == 0
        text = capsys.readouterr().out
        _, columns, rows = read_csv(text)
        assert columns[0] == "d" and len(rows) == 1

    def test_worker_count_leaves_rows_identical(self, write_config):
        cfg = load_config(write_config(UNIFORM_NEQ))
        base = pressure_rows(cfg, include_timing=False)
        threaded = pressure_rows(
            cfg.replace(quadrature=dataclasses.replace(cfg.quadrature, workers=3)),
            include_timing=False,
        )
        assert threaded == base
        # the correction term is genuinely alive in this comparison
        assert base[1][0][3] != 0.0

    def test_cache_modes_are_byte_transparent(self, write_config, tmp_path):
        cfg_path = write_config(UNIFORM_EQ)
        payloads = []
        for i, cache_arg in enumerate(["off", "mem", str(tmp_path / "opcache")] * 2):
            out = tmp_path / f"run{i}.csv"
            code = main([
                "pressure", "--config", str(cfg_path), "--out", str(out),
                "--cache", cache_arg,
            ])
            assert code == 0
            header, columns, rows = read_csv(out.read_text())
            payloads.append((header, columns, [r[:-1] for r in rows]))  # drop wall time
        assert all(p == payloads[0] for p in payloads[1:])
        assert (tmp_path / "opcache").is_dir()

    def test_fixed_truncation_flag(self, write_config, tmp_path, capsys):
        text = UNIFORM_EQ.replace("truncation: {mode: fixed, M: 0, mbar: 0}", "")
        cfg_path = write_config(text)
        out = tmp_path / "point.csv"
        code = main([
            "pressure", "--config", str(cfg_path), "--out", str(out),
            "--fixed-truncation", "0,0",
        ])
        assert code == 0
        _, columns, rows = read_csv(out.read_text())
        row = dict(zip(columns, rows[0]))
        assert (row["M"], row["mbar"]) == ("0", "0")
        for bad in ("2", "a,b", "1,2,3"):
            assert main([
                "pressure", "--config", str(cfg_path), "--fixed-truncation", bad,
            ]) == 2
            assert "fixed-truncation" in capsys.readouterr().err

    def test_flag_validation_and_config_errors_exit_2(self, write_config, tmp_path, capsys):
        cfg_path = write_config(UNIFORM_EQ)
        assert main(["pressure", "--config", str(cfg_path), "--workers", "0"]) == 2
        assert main(["pressure", "--config", str(cfg_path), "--tolerance", "-0.5"]) == 2
        assert main(["pressure", "--config", str(tmp_path / "absent.yaml")]) == 2
        bad = write_config("gap: [", name="broken.yaml")
        assert main(["pressure", "--config", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "error:" in err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "otecasimir" in capsys.readouterr().out


SWEEP_SECTION = """\
sweep:
  axis: d
  start: 2.0e-6
  stop: 6.0e-6
  points: 3
  spacing: log
"""


class TestSweepCommand:
    def test_distance_sweep_csv_figure_and_pfa_overlay(self, write_config, tmp_path):
        text = UNIFORM_EQ.replace("output: {figures: false}", "output: {figures: true}")
        cfg_path = write_config(text + SWEEP_SECTION)
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out.read_text())
        assert columns == [
            "d", "total", "eq_part", "delta_part", "error", "M", "mbar", "pfa", "d0_bracket",
        ]
        assert len(rows) == 3
        ds = [float(r[0]) for r in rows]
        assert ds == pytest.approx(list(np.geomspace(2e-6, 6e-6, 3)), rel=1e-9)
        for row in rows:
            named = dict(zip(columns, row))
            assert float(named["total"]) < 0.0
            assert named["d0_bracket"] == ""  # no sign change at equilibrium
            # filled uniform pair: the proximity average is the exact planar result
            assert float(named["pfa"]) == pytest.approx(float(named["total"]), rel=2e-2)
        figure = out.with_suffix(".png")
        assert figure.is_file() and figure.stat().st_size > 0

    def test_filling_sweep_endpoints_collapse_to_planar(self, write_config, tmp_path):
        text = UNIFORM_EQ.replace(
            "truncation: {mode: fixed, M: 0, mbar: 0}",
            "truncation: {mode: fixed, M: 1, mbar: 1}",
        ).replace("  filling: 1.0\n  ridge: silica-model", "  filling: 0.5\n  ridge: silica-model")
        text = text.replace("  filling: 1.0\n  ridge: silicon-model", "  filling: 0.5\n  ridge: silicon-model")
        text += "sweep: {axis: f, start: 0.0, stop: 1.0, points: 2}\n"
        cfg_path = write_config(text)
        out = tmp_path / "fsweep.csv"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out.read_text())
        assert columns[-1] == "pfa" and columns[0] == "f"
        for row in rows:
            named = dict(zip(columns, row))
            # at f = 0 and f = 1 the lateral average has a single branch, so
            # the proximity estimate IS the planar answer the pipeline must hit
            assert float(named["total"]) == pytest.approx(float(named["pfa"]), rel=5e-2)
            assert float(named["total"]) < 0.0

    def test_sweep_needs_its_config_section(self, write_config, capsys):
        cfg_path = write_config(UNIFORM_EQ)
        assert main(["sweep", "--config", str(cfg_path)]) == 2
        assert "sweep" in capsys.readouterr().err

    def test_bracket_crossings_interpolation(self):
        values = [1.0, 2.0, 3.0, 4.0]
        assert _bracket_crossings(values, [-1.0, -0.5, 0.5, 2.0]) == [None, None, 2.5, None]
        assert _bracket_crossings(values, [-1.0, 0.0, 1.0, 2.0]) == [None] * 4
        assert _bracket_crossings(values, [1.0, 2.0, 3.0, 4.0]) == [None] * 4
        assert _bracket_crossings([1.0, 2.0], [-3.0, 1.0]) == [None, 1.75]


class TestSpectrumCommand:
    def test_equilibrium_density_is_zero_and_figure_renders(self, write_config, tmp_path):
        text = UNIFORM_EQ.replace("output: {figures: false}", "output: {figures: true}")
        text += "spectrum: {omega_start: 1.0e13, omega_stop: 1.0e15, points: 5}\n"
        cfg_path = write_config(text)
        out = tmp_path / "spectrum.csv"
        assert main(["spectrum", "--config", str(cfg_path), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out.read_text())
        assert columns == ["omega", "delta_density"]
        assert len(rows) == 5
        assert all(r[1] == "0" for r in rows)
        omegas = [float(r[0]) for r in rows]
        assert omegas == pytest.approx(list(np.geomspace(1e13, 1e15, 5)), rel=1e-9)
        assert out.with_suffix(".png").is_file()


class TestPfaCommand:
    def test_ratio_near_unity_for_a_filled_pair(self, write_config, tmp_path):
        cfg_path = write_config(UNIFORM_EQ)
        out = tmp_path / "pfa.csv"
        assert main(["pfa", "--config", str(cfg_path), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out.read_text())
        named = dict(zip(columns, rows[0]))
        assert "ratio" in columns and "pfa_total" in columns
        assert float(named["ratio"]) == pytest.approx(1.0, abs=2e-2)
        assert float(named["total"]) == pytest.approx(
            float(named["eq_part"]) + float(named["delta_part"]), rel=1e-9
        )


class TestScanTruncationCommand:
    def test_selected_row_for_a_uniform_pair(self, write_config, tmp_path):
        text = UNIFORM_EQ.replace("gap: 2.0e-6", "gap: 4.0e-6").replace(
            "truncation: {mode: fixed, M: 0, mbar: 0}", ""
        )
        cfg_path = write_config(text)
        out = tmp_path / "scan.csv"
        assert main(["scan-truncation", "--config", str(cfg_path), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out.read_text())
        assert columns == ["kind", "omega", "kx", "ky", "M", "mbar"]
        assert rows[-1][0] == "selected"
        assert rows[-1][1:4] == ["", "", ""]
        assert rows[-1][4:] == ["0", "0"]
        assert all(r[0] == "imag" for r in rows[:-1])  # equilibrium samples
        assert all(r[4:] == ["0", "0"] for r in rows[:-1])


class TestValidateCommand:
    def test_self_checks_pass(self, capsys):
        assert main(["validate"]) == 0
        text = capsys.readouterr().out
        assert "[PASS]" in text and "all 10 checks passed" in text
        assert "[FAIL]" not in text
