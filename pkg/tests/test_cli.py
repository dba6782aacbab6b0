import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from greencell import cli

SMALL = """shadow_convention = std-db
trials = 2
typical_per_trial = 5
expected_bs = 60
probes_per_cell = 20
load_grid = 0.5, 2
green_load_grid = 1, 5
sir_grid_db = 0, 5
lambda_u_grid_per_km2 = 300, 400
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_missing_convention_is_an_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("GREENCELL_SHADOW_CONVENTION", raising=False)
    assert cli.main(["compute", "void_prob", "--out", str(tmp_path)]) == 2
    assert "shadow_convention" in capsys.readouterr().err


def test_compute_void_prob(tmp_path, capsys):
    rc = cli.main(["compute", "void_prob", "--grid", "0,1,2", "--shadow-convention", "std-db",
                   "--out", str(tmp_path)])
    assert rc == 0
    path = capsys.readouterr().out.strip()
    rows = _rows(path)
    assert rows[0] == ["cell_load", "void_prob"]
    assert len(rows) == 4
    assert float(rows[1][1]) == 1.0


def test_compute_coverage_monotone(tmp_path, capsys):
    rc = cli.main(["compute", "coverage", "--grid=-10,-5,0,5,10,20", "--shadow-convention", "std-db",
                   "--out", str(tmp_path)])
    assert rc == 0
    vals = [float(r[1]) for r in _rows(capsys.readouterr().out.strip())[1:]]
    assert np.all(np.diff(vals) <= 0)


def test_compute_throughput_units(tmp_path, capsys):
    assert cli.main(["compute", "T_C", "--grid", "2", "--shadow-convention", "var-db",
                     "--out", str(tmp_path)]) == 0
    header = _rows(capsys.readouterr().out.strip())[0]
    assert header == ["cell_load", "lambda_b_per_km2", "T_C_bits_per_s_per_Hz_per_km2"]


def test_compute_unknown_metric(tmp_path, capsys):
    assert cli.main(["compute", "energy", "--shadow-convention", "std-db", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "void_prob" in err and "v_star" in err


@pytest.mark.slow
def test_compute_v_star_carries_beta(tmp_path, capsys):
    assert cli.main(["compute", "v_star", "--kind", "user_throughput", "--grid", "370",
                     "--shadow-convention", "std-db", "--out", str(tmp_path)]) == 0
    rows = _rows(capsys.readouterr().out.strip())
    assert "beta_calibrated" in rows[0]
    beta = float(rows[1][rows[0].index("beta_calibrated")])
    assert beta > 1


def test_unknown_figure(cfg, tmp_path, capsys):
    assert cli.main(["figure", "9", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_figure_2_values_and_byte_stability(cfg, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["figure", "2", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["figure", "2", "--config", cfg, "--out", str(b), "--seed", "1"]) == 0
    files = sorted(os.listdir(a))
    assert files == sorted(os.listdir(b))
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    near = _rows(a / "fig2_nearest_0dB.csv")
    at2 = [r for r in near[1:] if float(r[0]) == 2.0][0]
    assert float(at2[1]) == pytest.approx(0.2056, abs=5e-5)
    low = _rows(a / "fig2_lower_bound.csv")
    assert float([r for r in low[1:] if float(r[0]) == 2.0][0][1]) == pytest.approx(0.1353, abs=5e-5)
    assert b"\r\n" not in (a / "fig2_nearest_0dB.csv").read_bytes()


def test_seed_changes_simulated_columns(cfg, tmp_path):
    cli.main(["figure", "2", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["figure", "2", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "77"])
    assert (tmp_path / "a" / "fig2_nearest_0dB.csv").read_bytes() != \
        (tmp_path / "b" / "fig2_nearest_0dB.csv").read_bytes()


def test_figure_3_headers_name_units(cfg, tmp_path):
    assert cli.main(["figure", "3", "--config", cfg, "--out", str(tmp_path)]) == 0
    header = _rows(tmp_path / "fig3_nearest_0dB.csv")[0]
    assert any("bits_per_s_per_Hz_per_km2" in h for h in header)


@pytest.mark.slow
def test_figure_7_shadowing_lowers_optimal_intensity(cfg, tmp_path):
    assert cli.main(["figure", "7", "--config", cfg, "--out", str(tmp_path)]) == 0

    def lam(curve):
        rows = _rows(tmp_path / f"fig7_{curve}.csv")
        col = rows[0].index("lambda_b_opt_direct_per_km2")
        return np.array([float(r[col]) for r in rows[1:]])

    assert np.all(lam("max_power_8dB") < lam("max_power_4dB"))


def test_env_overrides(cfg, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GREENCELL_CONFIG", cfg)
    monkeypatch.setenv("GREENCELL_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("GREENCELL_SEED", "5")
    args = cli.build_parser().parse_args(["figure", "2"])
    scn = cli.load_scenario(args)
    assert scn.seed == 5 and scn.out_dir == str(tmp_path / "env") and scn.trials == 2
    # a flag beats the environment
    args = cli.build_parser().parse_args(["figure", "2", "--seed", "6"])
    assert cli.load_scenario(args).seed == 6


def test_validate_passes_and_writes_table(tmp_path, capsys):
    rc = cli.main(["validate", "--only", "void_fraction_nearest,throughput_identity",
                   "--shadow-convention", "std-db", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("check,passed,measured")
    assert len(out) == 3
    assert (tmp_path / "validate_ci.csv").exists()


def test_validate_detects_corrupted_gamma_shape(tmp_path, capsys):
    rc = cli.main(["validate", "--only", "void_fraction_nearest", "--rho-hat", "2.0",
                   "--shadow-convention", "std-db", "--out", str(tmp_path)])
    assert rc == 1
    assert "failing checks: void_fraction_nearest" in capsys.readouterr().err


def test_validate_unknown_check(tmp_path, capsys):
    assert cli.main(["validate", "--only", "nope", "--shadow-convention", "std-db", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "greencell", "compute", "void_prob", "--grid", "2",
                          "--shadow-convention", "std-db", "--out", str(tmp_path)],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip().endswith("compute_void_prob.csv")
