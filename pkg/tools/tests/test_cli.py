"""Tests for the smoothed-dp command line."""

import json

import numpy as np
import pytest

from tools.smoothed_dp.cli import hard_output_path, main
from tools.smoothed_dp.errors import CapExceededError, ContractError

from .conftest import SIGMA


def _value(stdout: str) -> float:
    first = stdout.splitlines()[0]
    assert first.startswith("value=")
    return float(first.split("=", 1)[1])


@pytest.fixture
def cost_file(tmp_path):
    path = tmp_path / "costs.csv"
    path.write_text("1,2\n3,1\n")
    return path


@pytest.fixture
def diamond_file(tmp_path):
    path = tmp_path / "diamond.json"
    path.write_text(json.dumps({"n_nodes": 4, "edges": [[2, 1, 1.0], [4, 2, 1.0], [3, 1, 0.0], [4, 3, 0.0]]}))
    return path


class TestAlign:
    def test_cost_matrix_to_stdout(self, cost_file, capsys):
        assert main(["align", "--cost", str(cost_file)]) == 0
        out = capsys.readouterr().out
        expected = 1.0 - np.log(np.exp(-3.0) + np.exp(-1.0) + np.exp(-4.0))
        assert _value(out) == pytest.approx(expected, abs=1e-12)
        rows = [list(map(float, line.split(","))) for line in out.splitlines()[1:]]
        assert np.asarray(rows).shape == (2, 2)
        assert rows[0][0] == pytest.approx(1.0)

    def test_hard_alignment_next_to_the_output(self, cost_file, tmp_path, capsys):
        out = tmp_path / "align.csv"
        assert main(["align", "--cost", str(cost_file), "--reg", "l2", "--gamma", "0.1", "--out", str(out), "--hard"]) == 0
        assert out.exists()
        hard = np.loadtxt(hard_output_path(out), delimiter=",")
        np.testing.assert_array_equal(hard, np.eye(2))

    def test_two_series(self, tmp_path, capsys):
        (tmp_path / "a.csv").write_text("0\n1\n")
        (tmp_path / "b.csv").write_text("0\n2\n")
        assert main(["align", "--a", str(tmp_path / "a.csv"), "--b", str(tmp_path / "b.csv")]) == 0
        expected = 1.0 - np.log(np.exp(-4.0) + 1.0 + np.exp(-1.0))
        assert _value(capsys.readouterr().out) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("reg", ["entropy", "l2"])
    def test_same_input_same_output(self, cost_file, reg, capsys):
        argv = ["align", "--cost", str(cost_file), "--reg", reg, "--gamma", "0.5", "--hard"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_header_line_is_skipped(self, tmp_path, capsys):
        path = tmp_path / "costs.csv"
        path.write_text("b1,b2\n1,2\n3,1\n")
        assert main(["align", "--cost", str(path), "--header"]) == 0

    def test_bad_entry_reports_the_line(self, tmp_path, capsys):
        path = tmp_path / "costs.csv"
        path.write_text("1,2\n3,x\n")
        assert main(["align", "--cost", str(path)]) == 2
        assert "costs.csv:2" in capsys.readouterr().err

    def test_error_report_is_json_on_the_last_stderr_line(self, tmp_path, capsys):
        path = tmp_path / "costs.csv"
        path.write_text("1,2\n3,x\n")
        assert main(["align", "--cost", str(path)]) == 2
        report = json.loads(capsys.readouterr().err.splitlines()[-1])
        assert report["error_code"] == "INPUT_ERROR"
        assert report["details"] == {"path": str(path), "line": 2}
        assert report["error"].startswith(f"{path}:2:")

    def test_missing_file(self, tmp_path, capsys):
        assert main(["align", "--cost", str(tmp_path / "missing.csv")]) == 2

    def test_needs_exactly_one_input(self, cost_file, capsys):
        assert main(["align"]) == 2
        assert main(["align", "--cost", str(cost_file), "--a", str(cost_file), "--b", str(cost_file)]) == 2

    def test_gamma_must_be_positive(self, cost_file, capsys):
        assert main(["align", "--cost", str(cost_file), "--gamma", "0"]) == 2


def test_tag(tmp_path, capsys):
    path = tmp_path / "potentials.json"
    path.write_text(json.dumps({"T": 1, "S": 2, "theta": [[[1.0, 1.0], [0.0, 0.0]]]}))
    assert main(["tag", str(path)]) == 0
    out = capsys.readouterr().out
    assert _value(out) == pytest.approx(np.log(np.e + 1.0), abs=1e-12)
    marginals = [float(x) for x in out.splitlines()[1].split(",")]
    np.testing.assert_allclose(marginals, [0.7310586, 0.2689414], atol=1e-7)


def test_tag_output_is_deterministic(tmp_path, capsys):
    path = tmp_path / "potentials.json"
    theta = np.random.default_rng(7).normal(size=(4, 3, 3))
    theta[0] = theta[0, :, :1]
    path.write_text(json.dumps({"T": 4, "S": 3, "theta": theta.tolist()}))
    out = tmp_path / "marginals.csv"
    assert main(["tag", str(path), "--reg", "l2", "--out", str(out)]) == 0
    first_stdout, first_file = capsys.readouterr().out, out.read_bytes()
    assert main(["tag", str(path), "--reg", "l2", "--out", str(out)]) == 0
    assert capsys.readouterr().out == first_stdout
    assert out.read_bytes() == first_file


def test_tag_rejects_a_bad_tensor(tmp_path, capsys):
    path = tmp_path / "potentials.json"
    path.write_text(json.dumps({"T": 2, "S": 2, "theta": [[[1.0, 1.0], [0.0, 0.0]]]}))
    assert main(["tag", str(path)]) == 2


class TestPaths:
    def test_enumeration_and_expected_path(self, diamond_file, capsys):
        assert main(["paths", str(diamond_file)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert _value("\n".join(lines)) == pytest.approx(np.log(np.exp(2.0) + 1.0), abs=1e-12)
        assert lines[1] == "paths=2"
        first, first_probability = lines[2].split("\t")
        second, second_probability = lines[3].split("\t")
        assert first == "1 -> 2 -> 4"
        assert second == "1 -> 3 -> 4"
        assert float(first_probability) == pytest.approx(SIGMA, abs=1e-12)
        assert float(second_probability) == pytest.approx(1 - SIGMA, abs=1e-12)
        assert lines[4] == "child,parent,probability"
        assert len(lines) == 5 + 4

    def test_cap_exceeded(self, diamond_file, capsys):
        assert main(["paths", str(diamond_file), "--cap", "1"]) == 3
        assert "CAP_EXCEEDED" in capsys.readouterr().err

    def test_invalid_dag(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_nodes": 3, "edges": [[2, 1, 1.0]]}))
        assert main(["paths", str(path)]) == 2


class TestGradcheck:
    def test_passes_and_is_deterministic(self, capsys):
        argv = ["gradcheck", "--reg", "entropy", "--sizes", "2", "--trials", "2", "--seed", "3"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first
        assert first.rstrip().endswith("PASS")

    def test_report_file(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert main(["gradcheck", "--reg", "entropy", "--sizes", "2", "--trials", "1", "--out", str(out)]) == 0
        assert out.read_text().startswith("suite,regularizer,check")

    def test_sizes_must_be_positive(self, capsys):
        assert main(["gradcheck", "--sizes", "0"]) == 2


def test_no_command_prints_help(capsys):
    assert main([]) == 2
    assert "smoothed-dp" in capsys.readouterr().out


def test_error_json_omits_empty_details():
    assert json.loads(ContractError("bad shape").to_json()) == {"error": "bad shape", "error_code": "CONTRACT_ERROR"}
    report = json.loads(CapExceededError("too many paths", 12, 10).to_json())
    assert report["details"] == {"count": 12, "cap": 10}
