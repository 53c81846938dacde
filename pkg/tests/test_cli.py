import csv

import pytest

from diracprop.cli import build_parser, main
from diracprop.harness import REPORT_HEADER

SMALL = """\
grid.points_per_axis = 64
time.steps = 4
family.size = 4
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def _run(cfg_file, tmp_path, *argv):
    return main([*argv, "--config", str(cfg_file), "--out", str(tmp_path / "out")])


def test_global_flags_accepted_before_and_after_subcommand(cfg_file, tmp_path):
    a = build_parser().parse_args(["--seed", "3", "norm", "--refine", "1"])
    assert a.seed == 3 and a.refine == 1 and a.command == "norm"
    assert main(["--config", str(cfg_file), "--out", str(tmp_path), "clifford-check", "--max-dim", "3"]) == 0


def test_clifford_check_and_stft_roundtrip(cfg_file, tmp_path, capsys):
    assert _run(cfg_file, tmp_path, "clifford-check", "--samples", "10") == 0
    assert "PASS" in capsys.readouterr().out
    assert _run(cfg_file, tmp_path, "stft-roundtrip", "--all") == 0
    assert _run(cfg_file, tmp_path, "stft-roundtrip", "--tol", "1e-20") == 2


def test_norm_writes_csv(cfg_file, tmp_path):
    assert _run(cfg_file, tmp_path, "norm") == 0
    with open(tmp_path / "out" / "norm.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["flavor", "p", "q", "r", "rho", "value"] and len(rows) == 13


@pytest.mark.parametrize("direction", ["1", "-1"])
def test_solve(cfg_file, tmp_path, direction):
    assert _run(cfg_file, tmp_path, "solve", "--direction", direction) == 0
    assert (tmp_path / "out" / "solve_summary.csv").exists()
    assert _run(cfg_file, tmp_path, "solve", "--direction", direction, "--tol", "1e-12") == 2


def test_theorem1_and_report(cfg_file, tmp_path):
    assert _run(cfg_file, tmp_path, "theorem1") == 0
    out = tmp_path / "out"
    coarse, fine = out / "theorem1_refine0.csv", out / "theorem1_refine1.csv"
    with open(coarse, newline="") as fh:
        assert tuple(next(csv.reader(fh))) == REPORT_HEADER
    assert (out / "theorem1_refine0.gp").exists() and (out / "theorem1_summary.csv").exists()
    assert _run(cfg_file, tmp_path, "report", str(coarse), "--compare", str(fine)) == 0


def test_refine_flag_shifts_levels(cfg_file, tmp_path):
    assert _run(cfg_file, tmp_path, "theorem1", "--refine", "1") == 0
    assert (tmp_path / "out" / "theorem1_refine2.csv").exists()


def test_theorem2_uses_unweighted_norms_by_default(cfg_file, tmp_path):
    cfg_file.write_text(SMALL + "potential.kind = harmonic\n")
    assert _run(cfg_file, tmp_path, "theorem2") == 0


def test_error_exit_codes(cfg_file, tmp_path):
    cfg_file.write_text(SMALL + "potential.kind = harmonic\n")
    assert _run(cfg_file, tmp_path, "theorem1") == 1  # quadratic potential outside the first-order class
    cfg_file.write_text(SMALL + "potential.kind = harmonic\nnorms = wiener:1:1:0:1\n")
    assert _run(cfg_file, tmp_path, "theorem2") == 1
    cfg_file.write_text("grid.unknown = 3\n")
    assert _run(cfg_file, tmp_path, "norm") == 1
    assert main(["report", str(tmp_path / "missing.csv")]) == 1


def test_report_rejects_bad_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\r\n")
    assert main(["report", str(bad), "--out", str(tmp_path)]) == 1
