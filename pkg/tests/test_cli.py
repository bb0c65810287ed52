import io
import subprocess
import sys

import pytest

from ibcdof import __version__
from ibcdof.cli import BOUND_COLUMNS, RATE_COLUMNS, main, parse_snr_grid, read_csv, write_csv


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


FIG6 = ["rate-curve", "--K", "4", "--Nr", "3", "--scheme", "max-sinr", "--schedule", "fixed:10", "--snr", "0:5:40", "--seed", "7"]


def test_rate_curve_rows_and_header():
    code, out, _ = run(FIG6 + ["--trials", "50"])
    assert code == 0
    comments, cols, rows = read_csv(out)
    assert cols == RATE_COLUMNS
    assert len(rows) == 9 and [r[0] for r in rows] == [float(x) for x in range(0, 41, 5)]
    assert any("seed=7" in c for c in comments) and any(__version__ in c for c in comments)
    assert all(r[6] == "max-sinr" and r[7] == 50 and r[8] == 7 for r in rows)
    header_idx = out.splitlines().index(",".join(RATE_COLUMNS))
    assert all(line.startswith("#") for line in out.splitlines()[:header_idx])


def test_nine_significant_digits():
    _, out, _ = run(FIG6 + ["--trials", "20"])
    _, _, rows = read_csv(out)
    cell = out.splitlines()[-1].split(",")[2]
    assert cell == format(rows[-1][2], ".9g")


def test_powerlaw_users_column():
    code, out, _ = run(["rate-curve", "--K", "4", "--Nr", "3", "--scheme", "max-snr", "--schedule", "powerlaw:1:1", "--snr", "20:5:20", "--trials", "3"])
    assert code == 0
    assert read_csv(out)[2][0][1] == 100


def test_byte_identical_and_threads():
    a = run(FIG6 + ["--trials", "40", "--scheme", "min-inr"])[1]
    b = run(FIG6 + ["--trials", "40", "--scheme", "min-inr"])[1]
    c = run(FIG6 + ["--trials", "40", "--scheme", "min-inr", "--threads", "4"])[1]
    assert a == b == c


def test_round_trip():
    _, out, _ = run(FIG6 + ["--trials", "30"])
    comments, cols, rows = read_csv(out)
    buf = io.StringIO()
    write_csv(buf, cols, rows, comments)
    assert buf.getvalue() == out


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fig 6\nK = 4\nNr = 3\nscheme = max-snr\nscheme = min-inr\ntrials = 10\nseed = 3\nsnr = 0:10:20\n")
    code, out, _ = run(["rate-curve", "--config", str(cfg)])
    assert code == 0
    rows = read_csv(out)[2]
    assert rows[0][6] == "min-inr" and rows[0][7] == 10 and len(rows) == 3
    code, out, _ = run(["rate-curve", "--config", str(cfg), "--scheme", "max-sinr"])
    assert read_csv(out)[2][0][6] == "max-sinr"
    (tmp_path / "bad.cfg").write_text("K 4\n")
    assert run(["rate-curve", "--config", str(tmp_path / "bad.cfg")])[0] == 2
    (tmp_path / "unk.cfg").write_text("K=4\nNr=3\ncolour=blue\n")
    assert run(["rate-curve", "--config", str(tmp_path / "unk.cfg")])[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["rate-curve", "--K", "4"],
        ["rate-curve", "--K", "4", "--Nr", "3", "--scheme", "nope"],
        ["rate-curve", "--K", "4", "--Nr", "3", "--schedule", "fixed:x"],
        ["rate-curve", "--K", "4", "--Nr", "3", "--snr", "10:5:0"],
        ["rate-curve", "--K", "4", "--Nr", "3", "--bogus"],
        ["rate-curve", "--K", "four", "--Nr", "3"],
        ["rate-curve", "--K", "4", "--Nr", "3", "--scheme", "two-stage:3:3", "--trials", "1"],
        ["dof-slope", "--K", "4", "--Nr", "3", "--window", "20", "--trials", "1"],
        ["validate-bounds", "--K", "3", "--Nr", "3", "--N-list", "10"],
        ["validate-bounds", "--K", "4", "--Nr", "3"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_2(argv):
    code, out, err = run(argv)
    assert code == 2 and out == ""
    assert len(err.strip().splitlines()) == 1


def test_cap_exit_3():
    code, out, err = run(["rate-curve", "--K", "4", "--Nr", "3", "--schedule", "exppower:1:1:0", "--snr", "0:10:40", "--trials", "2"])
    assert code == 3 and out == "" and "dB" in err


def test_dof_slope_self_test_and_tdma():
    code, out, _ = run(["dof-slope", "--K", "4", "--Nr", "3", "--self-test"])
    assert code == 0 and out.startswith("slope=0 ") and len(out.splitlines()) == 1
    code, out, _ = run(["dof-slope", "--K", "4", "--Nr", "3", "--scheme", "tdma1", "--trials", "500"])
    slope = float(out.split()[0].split("=")[1])
    assert code == 0 and 0.20 <= slope <= 0.30


def test_validate_bounds_csv():
    code, out, err = run(["validate-bounds", "--K", "4", "--Nr", "3", "--N-list", "100", "--trials", "200", "--seed", "1"])
    assert code == 0
    _, cols, rows = read_csv(out)
    assert cols == BOUND_COLUMNS
    assert all(r[5] == pytest.approx(0.01) for r in rows)
    last = rows[-1]
    assert last[1] == 1.0 and last[2] == 1.0 and last[3] == 1.0 and last[6] == "true"
    assert "rate-loss" in err
    code, out, _ = run(["validate-bounds", "--K", "5", "--Nr", "3", "--N-list", "64", "--trials", "100", "--seed", "2"])
    assert read_csv(out)[2][0][5] == pytest.approx(0.125)


def test_snr_grid_parser():
    assert parse_snr_grid("0:5:40") == tuple(float(x) for x in range(0, 41, 5))
    assert parse_snr_grid("20,30") == (20.0, 30.0)


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "ibcdof.cli", "dof-slope", "--K", "4", "--Nr", "3", "--self-test"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and res.stdout.startswith("slope=0")
