import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from tailsitter.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def blocks(text):
    return [list(csv.reader(io.StringIO(b))) for b in text.strip().split("\n\n")]


class TestTrim:
    def test_fields(self, runner):
        res = runner.invoke(main, ["trim", "--speed", "5"])
        assert res.exit_code == 0, res.output
        header, values = [r for r in csv.reader(io.StringIO(res.output))]
        row = dict(zip(header, map(float, values)))
        assert row["airspeed"] == 5.0
        assert row["residual"] < 1e-8
        assert row["u1"] == pytest.approx(row["u2"])

    def test_custom_params(self, runner, tmp_path):
        f = tmp_path / "p.yaml"
        f.write_text("m: 0.6\n")
        res = runner.invoke(main, ["--params", str(f), "trim", "--speed", "8"])
        assert res.exit_code == 0, res.output


class TestLinearize:
    def test_hover(self, runner):
        res = runner.invoke(main, ["linearize", "--at", "hover"])
        assert res.exit_code == 0
        A, B = blocks(res.output)
        assert A[0][0] == "A" and A[0][1:] == [r[0] for r in A[1:]]
        assert len(A) == 13 and len(B) == 13 and len(B[0]) == 5

    def test_numeric_matches(self, runner):
        an = blocks(runner.invoke(main, ["linearize"]).output)[0]
        fd = blocks(runner.invoke(main, ["linearize", "--numeric"]).output)[0]
        a = np.array([[float(v) for v in r[1:]] for r in an[1:]])
        f = np.array([[float(v) for v in r[1:]] for r in fd[1:]])
        np.testing.assert_allclose(f, a, atol=1e-5)

    def test_trim_point(self, runner):
        res = runner.invoke(main, ["linearize", "--at", "trim:5"])
        A, _ = blocks(res.output)
        assert len(A) == 11 and A[1][0] == "p_z"

    def test_bad_point(self, runner):
        res = runner.invoke(main, ["linearize", "--at", "cruise"])
        assert res.exit_code != 0


class TestLqr:
    def test_gain_has_zero_scalar_column(self, runner):
        res = runner.invoke(main, ["lqr", "--scale", "1"])
        assert res.exit_code == 0
        K, S, eig = blocks(res.output)
        eta = K[0].index("eta")
        assert all(float(r[eta]) == 0.0 for r in K[1:])
        assert len(S) == 13
        assert all(float(r[1]) < 0 for r in eig[1:])

    def test_integrator(self, runner):
        res = runner.invoke(main, ["lqr", "--integrator"])
        K, S, _ = blocks(res.output)
        assert len(K[0]) == 17 and K[0][-1] == "xi_z"
        assert len(S) == 16


class TestSimulate:
    def test_writes_outputs(self, runner, tmp_path):
        scen = tmp_path / "mini.yaml"
        scen.write_text(json.dumps({
            "name": "mini", "controller": "hybrid", "t_end": 0.05,
            "initial": {"q": "hover"}, "targets": [[0.0, [0.0, 0.0, 0.0]]],
        }))
        out = tmp_path / "out"
        res = runner.invoke(main, ["simulate", "--scenario", str(scen), "--out", str(out), "--plot"])
        assert res.exit_code == 0, res.output
        assert "mini: 51 records, 1 jumps" in res.output
        assert (out / "mini.csv").exists()
        jumps = (out / "mini_jumps.csv").read_text().splitlines()
        assert jumps[1].split(",")[2:4] == ["NL_HOVER", "LIN_HOVER"]
        assert json.loads((out / "mini_settings.json").read_text())["controller"] == "hybrid"
        assert (out / "plots" / "lyapunov.svg").exists()

    def test_unknown_scenario(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--scenario", "nowhere", "--out", str(tmp_path)])
        assert res.exit_code != 0


class TestRoa:
    def test_single_sample(self, runner):
        res = runner.invoke(main, ["roa", "--samples", "1", "--seed", "2"])
        assert res.exit_code == 0, res.output
        lines = res.output.strip().splitlines()
        assert lines[0] == "sample,V0,converged"
        assert lines[-1].startswith("c_star,")


def test_contrast_registered(runner):
    res = runner.invoke(main, ["contrast", "--help"])
    assert res.exit_code == 0
