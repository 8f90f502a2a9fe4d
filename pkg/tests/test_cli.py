import csv
import io
import json
from pathlib import Path

import pytest

from labcoupling.cli import run_command
from labcoupling.report import CERTIFICATE_CSV_COLUMNS

DEMO = str(Path(__file__).parents[1] / "configs" / "demo.yaml")


def run(*argv):
    out = io.StringIO()
    code = run_command(list(argv), out)
    return code, out.getvalue()


def test_algebra_commands():
    code, text = run("algebra", "check", "so3")
    assert code == 0 and "jacobi residual" in text
    code, text = run("algebra", "derivations", "heisenberg3")
    assert code == 0 and "dim Der = 6" in text and "dim ad = 2" in text
    code, _ = run("algebra", "check", "h3", "--config", DEMO)
    assert code == 0
    assert run("algebra", "check", "e8")[0] == 4


def test_scenario_list():
    code, text = run("scenario", "list", "--config", DEMO)
    assert code == 0
    assert "ts2\texpected=fails" in text and "h3-line-outer" in text


def test_bundle_transport_prints_matrix_and_residual():
    code, text = run("bundle", "transport", "--scenario", "so3-circle", "--loops", "1")
    assert code == 0
    assert "lie residual" in text and len([ln for ln in text.splitlines() if ln.startswith("  ")]) == 3
    code, text = run("bundle", "transport", "--scenario", "ts2")
    angle = float(text.split("rotation angle")[1])
    assert abs(angle - 1.5707963267948966) < 1e-3


def test_bundle_check_and_curvature(tmp_path):
    assert run("bundle", "check", "--scenario", "heisenberg-torus", "--samples", "8")[0] == 0
    out = tmp_path / "curv.csv"
    code, text = run("bundle", "curvature", "--scenario", "ts2", "--curvature-samples", "4", "--csv", str(out))
    assert code == 2 and "fail" in text
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["chart", "point", "i", "j", "norm", "residual"] and len(rows) == 9
    code, _ = run("bundle", "curvature", "--scenario", "so3-plane", "--curvature-samples", "4")
    assert code == 0


def test_bundle_holonomy():
    code, text = run("bundle", "holonomy", "--scenario", "so3-plane", "--ns", "8", "--steps", "128")
    assert code == 0 and "max residual" in text


def test_coupling_test_ts2_fails_with_witness(tmp_path):
    csv_path, json_path = tmp_path / "c.csv", tmp_path / "c.json"
    code, text = run("coupling", "test", "--scenario", "ts2", "--samples", "8",
                     "--csv", str(csv_path), "--json", str(json_path))
    assert code == 2
    assert text.startswith("verdict: fails")
    assert "witnesses:" in text
    cert = json.loads(json_path.read_text())
    assert cert["witnesses"]
    rows = list(csv.reader(csv_path.open()))
    assert tuple(rows[0]) == CERTIFICATE_CSV_COLUMNS
    assert len(rows) == 1 + 8 * 2


def test_coupling_build_routes():
    code, text = run("coupling", "build", "--scenario", "so3-plane", "--samples", "6")
    assert code == 0 and "route: forward" in text
    code, text = run("coupling", "build", "--scenario", "ts2", "--samples", "6")
    assert code == 2 and "curvature" in text
    code, text = run("coupling", "build", "--scenario", "h3-line-outer", "--config", DEMO, "--samples", "6")
    assert code == 2


def test_exit_codes_for_bad_input(tmp_path):
    assert run("coupling", "test", "--scenario", "nope")[0] == 4
    assert run("coupling", "test")[0] == 4
    bad = tmp_path / "bad.yaml"
    bad.write_text("bundles: {b: {algebra: so3}}")
    assert run("coupling", "test", "--scenario", "x", "--config", str(bad))[0] == 4
    assert run("bundle", "transport", "--scenario", "heisenberg-torus")[0] == 4
    assert run("frobnicate")[0] == 4


def test_numeric_failure_exit_code(tmp_path):
    cfg = tmp_path / "div.yaml"
    cfg.write_text(
        "bundles:\n"
        "  b:\n"
        "    algebra: abelian1\n"
        "    atlas: circle\n"
        "    transitions:\n"
        "      - pair: ['0', '1']\n"
        "        matrix: [['1/(x1 - x1)']]\n"
        "scenarios:\n"
        "  s: {bundle: b}\n"
    )
    assert run("coupling", "test", "--scenario", "s", "--config", str(cfg), "--samples", "4")[0] == 5


def test_help_documents_csv_columns(capsys):
    with pytest.raises(SystemExit):
        from labcoupling.cli import build_parser

        build_parser().parse_args(["coupling", "test", "--help"])
    assert ",".join(CERTIFICATE_CSV_COLUMNS) in capsys.readouterr().out


def test_reports_are_deterministic(tmp_path):
    a = run("coupling", "test", "--scenario", "heisenberg-torus", "--samples", "6")
    b = run("coupling", "test", "--scenario", "heisenberg-torus", "--samples", "6")
    assert a == b
