"""CLI behaviour and golden CSV files.

Regenerate the golden files with ``python tests/test_cli.py`` after an
intentional change of output.
"""

import csv
import io
import math
import sys
from pathlib import Path

import pytest

from oicap import cli

GOLDEN_DIR = Path(__file__).parent / "cli_golden"

CASES = {
    "bounds_gaussian": ["bounds", "--channel", "gaussian", "--eps", "1e-2,1e-6,1e-10", "--a", "1.5,2"],
    "bounds_poisson_L": ["bounds", "--channel", "poisson", "--logeps", "50,7", "--a", "1.2", "--lambda", "1"],
    "bounds_poisson_flagged": ["bounds", "--channel", "poisson", "--eps", "0.2,1e-3", "--a", "1.1",
                               "--lambda", "1"],
    "simulate_gaussian": ["simulate", "--channel", "gaussian", "--eps", "0.01", "--a", "2",
                          "--trials", "200000", "--seed", "42"],
    "simulate_poisson": ["simulate", "--channel", "poisson", "--eps", "1e-3", "--a", "1.5", "--lambda", "1",
                         "--trials", "200000", "--seed", "42"],
    "oracle_gaussian": ["oracle", "--channel", "gaussian", "--eps", "1e-4", "--a", "1.5"],
    "oracle_poisson": ["oracle", "--channel", "poisson", "--eps", "1e-4", "--a", "1.5", "--lambda", "1",
                       "--geom-p", "0.5"],
}

# oracle columns produced by iterative solvers; their last digits depend on
# the kernel backend, so they are compared to a tolerance
SOLVER_COLUMNS = {"ba_capacity", "ba_gap", "ba_multiplier", "ba_mean", "ba_iterations"}


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return text not in ("", "nan", "inf", "-inf")


def _strip_version(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("# version="))


@pytest.mark.parametrize("name", [n for n in CASES if not n.startswith("oracle")])
def test_golden_files_byte_identical(name, capsys):
    code, out, _ = _run(CASES[name], capsys)
    assert code == cli.EXIT_OK
    golden = (GOLDEN_DIR / f"{name}.csv").read_text(encoding="utf-8")
    assert _strip_version(out) == _strip_version(golden)


@pytest.mark.parametrize("name", [n for n in CASES if n.startswith("oracle")])
def test_oracle_golden_files(name, capsys):
    code, out, _ = _run(CASES[name], capsys)
    assert code == cli.EXIT_OK
    golden = (GOLDEN_DIR / f"{name}.csv").read_text(encoding="utf-8")
    got, want = _rows(out), _rows(golden)
    assert list(got[0]) == list(want[0])
    for g, w in zip(got, want):
        for col in w:
            if col == "ba_iterations":
                continue
            if col in SOLVER_COLUMNS:
                assert float(g[col]) == pytest.approx(float(w[col]), rel=1e-6, abs=2e-9), col
            elif _is_number(w[col]):
                # Poisson log-pmf tables come from the active backend
                assert float(g[col]) == pytest.approx(float(w[col]), rel=1e-12), col
            else:
                assert g[col] == w[col], col
        assert g["sandwich_ok"] == "true"


@pytest.mark.parametrize("name", list(CASES))
def test_reruns_are_byte_identical(name, capsys):
    _, first, _ = _run(CASES[name], capsys)
    _, second, _ = _run(CASES[name], capsys)
    assert first == second


def test_output_layout(capsys):
    _, out, _ = _run(CASES["bounds_gaussian"], capsys)
    lines = out.split("\n")
    assert lines[0] == "# oicap bounds"
    meta = [line for line in lines if line.startswith("#")]
    assert "# channel=gaussian" in meta and "# a_list=1.5,2" in meta
    header = lines[len(meta)]
    assert header.split(",") == cli.BOUNDS_COLUMNS
    assert "\r" not in out
    rows = _rows(out)
    # ordered by budget, then a
    keys = [(float(r["epsilon"]), float(r["a"])) for r in rows]
    assert keys == sorted(keys)


def test_bounds_gaussian_example_row(capsys):
    _, out, _ = _run(["bounds", "--channel", "gaussian", "--eps", "1e-6", "--a", "1.5"], capsys)
    (row,) = _rows(out)
    assert float(row["asymptote"]) == pytest.approx(1e-6 * math.sqrt(math.log(1e6) / 2.0), rel=1e-15)
    assert float(row["asymptote"]) == pytest.approx(2.6283e-6, rel=1e-4)
    assert float(row["lower"]) < float(row["asymptote"]) < float(row["upper"])
    assert row["upper_valid"] == "true" and row["error"] == ""
    assert row["poisson_upper_head_pmf_over_eps"] == ""


def test_bounds_poisson_L_mode_beyond_double_range(capsys):
    _, out, _ = _run(["bounds", "--channel", "poisson", "--logeps", "1000", "--a", "1.2", "--lambda", "1"],
                     capsys)
    (row,) = _rows(out)
    # epsilon = e^-1000 underflows; the scaled columns stay finite
    assert float(row["epsilon"]) == 0.0
    assert float(row["log_inv_eps"]) == 1000.0
    assert math.isfinite(float(row["lower_over_eps"]))
    assert math.isfinite(float(row["log_upper_over_eps"]))


def test_flagged_rows_still_exit_zero(capsys):
    code, out, _ = _run(CASES["bounds_poisson_flagged"], capsys)
    assert code == cli.EXIT_OK
    rows = {float(r["epsilon"]): r for r in _rows(out)}
    assert rows[0.2]["upper_valid"] == "false"
    assert "eta_margin=false" in rows[0.2]["upper_flags"]
    assert rows[1e-3]["upper_valid"] == "true"


def test_simulate_agrees(capsys):
    _, out, _ = _run(CASES["simulate_gaussian"], capsys)
    (row,) = _rows(out)
    assert row["agree"] == "true"
    assert float(row["ci_lo"]) <= float(row["pe_exact"]) <= float(row["ci_hi"])


def test_oracle_degenerate_grid(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# point mass only\nchannel=gaussian\nepsilon_list=1e-2\na_list=1.5\ngrid=0\n")
    code, out, _ = _run(["oracle", "--config", str(cfg)], capsys)
    assert code == cli.EXIT_OK
    (row,) = _rows(out)
    assert float(row["ba_capacity"]) == 0.0
    assert float(row["mi_binary"]) == 0.0
    assert row["sandwich_ok"] == "true"


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("channel=gaussian\nepsilon_list=1e-2\na_list=1.5\n")
    _, out, _ = _run(["bounds", "--config", str(cfg), "--logeps", "3"], capsys)
    (row,) = _rows(out)
    assert float(row["log_inv_eps"]) == 3.0
    assert "# L_list=3" in out


def test_output_path(tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, out, _ = _run(CASES["bounds_gaussian"] + ["--out", str(target)], capsys)
    assert code == cli.EXIT_OK and out == ""
    assert target.read_text(encoding="utf-8").startswith("# oicap bounds\n")


@pytest.mark.parametrize(
    "argv",
    [
        ["bounds", "--channel", "gaussian", "--eps", "", "--a", "1.5"],
        ["bounds", "--channel", "gaussian", "--a", "1.5"],
        ["bounds", "--channel", "gaussian", "--eps", "0.1", "--logeps", "2", "--a", "1.5"],
        ["bounds", "--channel", "gaussian", "--eps", "1.5", "--a", "1.5"],
        ["bounds", "--channel", "gaussian", "--eps", "0.1", "--a", ""],
        ["bounds", "--channel", "gaussian", "--eps", "x", "--a", "1.5"],
        ["bounds", "--channel", "poisson", "--eps", "0.1", "--a", "1.5"],
        ["simulate", "--channel", "gaussian", "--eps", "0.1", "--a", "1.5"],
        ["bounds", "--channel", "gaussian", "--eps", "0.1", "--a", "1.5", "--seed", "-1"],
        ["bounds", "--channel", "rayleigh", "--eps", "0.1", "--a", "1.5"],
        ["bounds", "--config", "/nonexistent/file.cfg"],
        ["frobnicate"],
        [],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    code, out, _ = _run(argv, capsys)
    assert code == cli.EXIT_CONFIG
    assert out == ""


def test_bad_config_keys_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("channel=gaussian\nmystery=1\n")
    assert _run(["bounds", "--config", str(cfg)], capsys)[0] == cli.EXIT_CONFIG
    cfg.write_text("channel=gaussian\nepsilon_list=0.1\na_list=1.5\ngrid=0.5,1\n")
    assert _run(["oracle", "--config", str(cfg)], capsys)[0] == cli.EXIT_CONFIG


def test_systemic_failure_exits_3(monkeypatch, capsys):
    def boom(cfg, eps, L, a):
        raise RuntimeError("broken")

    monkeypatch.setitem(cli.COMMANDS, "bounds", (boom, cli.BOUNDS_COLUMNS))
    code, out, err = _run(CASES["bounds_gaussian"], capsys)
    assert code == cli.EXIT_NUMERIC
    assert "numeric failure" in err and out == ""


def test_help_exits_zero(capsys):
    assert _run(["--help"], capsys)[0] == cli.EXIT_OK


def _regenerate():
    GOLDEN_DIR.mkdir(exist_ok=True)
    for name, argv in CASES.items():
        with open(GOLDEN_DIR / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
            sys.stdout, saved = fh, sys.stdout
            try:
                assert cli.main(argv) == cli.EXIT_OK
            finally:
                sys.stdout = saved


if __name__ == "__main__":
    _regenerate()
