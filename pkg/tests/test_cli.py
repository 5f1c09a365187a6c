"""Command-line interface: formats, determinism, exit codes."""

import json
import math
import subprocess
import sys

import pytest

from diqkd.cli import main
from diqkd.correlations import CHSH_MAX
from diqkd.keyrate import ProtocolConfig, rate_two_basis
from diqkd.tradeoff import qubit_bound_chsh


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --------------------------------------------------------------- CSV output

def test_entropy_sweep_csv_shape_and_values(capsys):
    code, out, _ = run_cli(capsys, "entropy", "--bound", "chsh", "--q", "0",
                           "--s-range", f"2:{CHSH_MAX}:100")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("# diqkd entropy v1")
    assert lines[1].startswith("# job:")
    assert lines[2].split(",")[0] == "S"
    rows = lines[3:]
    assert len(rows) == 100
    last_s, last_val = rows[-1].split(",")
    assert float(last_s) == pytest.approx(CHSH_MAX, abs=1e-9)
    assert float(last_val) == pytest.approx(1.0, abs=1e-9)


def test_entropy_single_point_matches_library(capsys):
    code, out, _ = run_cli(capsys, "entropy", "--bound", "chsh", "--q", "0.2",
                           "--s", "2.5")
    assert code == 0
    val = float(out.strip().split("\n")[-1].split(",")[1])
    assert val == pytest.approx(qubit_bound_chsh(0.2, 2.5), abs=1e-12)


def test_entropy_two_basis_bound(capsys):
    code, out, _ = run_cli(capsys, "entropy", "--bound", "two-basis",
                           "--q", "0.1", "--p", "0.5", "--s", "2.4")
    assert code == 0
    from diqkd.tradeoff import qubit_bound_two_basis
    val = float(out.strip().split("\n")[-1].split(",")[1])
    assert val == pytest.approx(qubit_bound_two_basis(0.1, 0.5, 2.4),
                                abs=1e-12)


def test_cli_output_is_deterministic(capsys):
    argv = ("entropy", "--bound", "bias", "--q", "0.15", "--a1", "0.4",
            "--s-range", "2:2.6:40")
    _, first, _ = run_cli(capsys, *argv)
    _, second, _ = run_cli(capsys, *argv)
    assert first == second


def test_out_file_and_svg(tmp_path, capsys):
    out_file = tmp_path / "curve.csv"
    svg_file = tmp_path / "curve.svg"
    code, _, _ = run_cli(capsys, "entropy", "--bound", "chsh",
                         "--s-range", "2:2.8:30", "--out", str(out_file),
                         "--svg", str(svg_file))
    assert code == 0
    assert out_file.read_text().startswith("# diqkd entropy v1")
    svg = svg_file.read_text()
    assert "<svg" in svg and "polyline" in svg


# ------------------------------------------------------------------ keyrate

def test_keyrate_sweep_matches_library(capsys):
    code, out, _ = run_cli(capsys, "keyrate", "--variant", "two-basis",
                           "--q", "0", "--delta-range", "0:0.1:11")
    assert code == 0
    rows = [r for r in out.strip().split("\n") if not r.startswith("#")][1:]
    assert len(rows) == 11
    cfg = ProtocolConfig(variant="two-basis", q=0.0, p_prime=0.5)
    for row in (rows[0], rows[5], rows[-1]):
        fields = row.split(",")
        delta, rate = float(fields[0]), float(fields[1])
        assert rate == pytest.approx(rate_two_basis(delta, cfg).rate,
                                     abs=1e-12)
    rates = [float(r.split(",")[1]) for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))


def test_keyrate_bias_fixed_angles(capsys):
    code, out, _ = run_cli(capsys, "keyrate", "--variant", "bias",
                           "--q", "0", "--eta", "1.0",
                           "--theta", str(math.pi / 2),
                           "--phi-a", "0:1.5707963267948966",
                           "--phi-b", "0.7853981633974483:-0.7853981633974483:0")
    assert code == 0
    rows = [r for r in out.strip().split("\n") if not r.startswith("#")][1:]
    rate = float(rows[0].split(",")[1])
    assert rate == pytest.approx(1.0, abs=1e-9)


# ----------------------------------------------------------------- certify

def test_certify_trivial_plane_exit_zero(capsys):
    code, out, _ = run_cli(capsys, "certify", "--q", "0.3", "--beta", "-0.5",
                           "--alpha1", "0", "--alpha2", "0")
    assert code == 0
    rep = json.loads(out)
    assert rep["status"] == "certified"
    assert rep["covering_size"] == 1


def test_certify_refuted_exit_five(capsys):
    code, out, _ = run_cli(capsys, "certify", "--q", "0.3", "--beta", "1.5",
                           "--alpha1", "0", "--alpha2", "0")
    assert code == 5
    rep = json.loads(out)
    assert rep["status"] == "refuted"
    assert {"a1", "S", "violation"} <= set(rep["witness"])
    assert rep["witness"]["violation"] > 0.0


def test_certify_tangent_report(capsys):
    code, out, _ = run_cli(capsys, "certify", "--q", "0.3",
                           "--tangent-at", "0.5:2.2", "--epsilon", "0.025")
    assert code == 0
    rep = json.loads(out)
    assert rep["status"] == "certified"
    assert 0 < rep["covering_size"] <= 200


def test_certify_budget_exit_four(capsys):
    code, _, err = run_cli(capsys, "certify", "--q", "0.3",
                           "--tangent-at", "0.5:2.2", "--epsilon", "1e-9",
                           "--leaf-budget", "100")
    assert code == 4


# -------------------------------------------------------------- exit codes

def test_bad_sweep_syntax_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["entropy", "--bound", "chsh", "--s-range", "nonsense"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_missing_required_value_exit_two(capsys):
    code, _, err = run_cli(capsys, "entropy", "--bound", "bias", "--s", "2.2")
    assert code == 2
    assert "--a1" in err


def test_domain_error_exit_three(capsys):
    code, _, err = run_cli(capsys, "entropy", "--bound", "bias", "--q", "0.1",
                           "--a1", "1.0", "--s", "2.4")
    assert code == 3
    assert "domain error" in err


# ------------------------------------------------------------------- misc

def test_attack_compare_two_basis(capsys):
    code, out, _ = run_cli(capsys, "attack-compare", "--variant", "two-basis",
                           "--q", "0", "--delta-range", "0:0.1:6")
    assert code == 0
    rows = [r for r in out.strip().split("\n") if not r.startswith("#")][1:]
    assert len(rows) == 6
    for row in rows:
        _, upper, lower, gap = (float(v) for v in row.split(","))
        assert upper >= lower - 1e-9
        assert gap == pytest.approx(upper - lower, abs=1e-12)


def test_threshold_two_basis_json(capsys):
    code, out, _ = run_cli(capsys, "threshold", "--variant", "two-basis",
                           "--q", "0", "--mode", "certified", "--tol", "1e-5")
    assert code == 0
    rep = json.loads(out)
    assert rep["variant"] == "two-basis"
    # CLI default curve resolution 2000: threshold slightly below the
    # converged 8.3599% (discretization bias of the lower-vertex rule)
    assert rep["threshold_percent"] == pytest.approx(8.355, abs=5e-2)


def test_module_entrypoint_help():
    proc = subprocess.run([sys.executable, "-m", "diqkd", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "entropy" in proc.stdout and "threshold" in proc.stdout
