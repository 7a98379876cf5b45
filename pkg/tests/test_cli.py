import cmath
import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conflux.cli import family_instantiate, family_limit, parse_grid, run
from conflux.errors import ValidationError
from conftest import scalar_P_oracle

LAM, MU = 1j, 0.1

SCALAR_SYSTEM = {"n": 1, "h": 1.0, "A": {"rational": {"entries": [[
    {"num": [[-0.1, 0.0]], "den": [[-1.0, -1.0], [1.0, 0.0]]}]]}}}

# -mu/(x - h - lam) with the h-dependence written out
SCALAR_FAMILY = {"template": "hpoly", "A": {"entries": [[
    {"num": [[-0.1, 0.0]], "den": [[[0.0, -1.0], [-1.0, 0.0]], [1.0, 0.0]]}]]}}


def invoke(tmp_path, command, cfg, *extra):
    cfg_path = tmp_path / "cfg.json"
    out_path = tmp_path / "out.txt"
    cfg_path.write_text(json.dumps(cfg))
    code = run([command, "--config", str(cfg_path), "--out", str(out_path), *extra])
    text = out_path.read_text()
    return code, text


def cx(pair):
    return complex(*pair)


class TestSolve:
    def test_zero_system(self, tmp_path):
        cfg = {"system": {"h": 0.5, "A": {"rational": {"entries": [
            [{"num": [0]}, {"num": [0]}], [{"num": [0]}, {"num": [0]}]]}}},
            "grid": [[3.0, 1.0], [-2.2, 0.4]]}
        code, text = invoke(tmp_path, "solve", cfg)
        rep = json.loads(text)
        assert code == 0 and rep["partial"] is False
        for row in rep["samples"]:
            assert row["residual"] == 0
            Y = np.array([[cx(z) for z in r] for r in row["Y"]])
            assert np.allclose(Y, np.eye(2), atol=0)

    def test_partial_results(self, tmp_path):
        F = {"h": 1.0, "coeffs": [[[[0.2, 0.0]]], [[[0.1, 0.0]]], [[[0.05, 0.0]]]],
             "cert": [0.1, 0.5]}
        cfg = {"system": {"h": 1.0, "A": {"factorial": F}}, "grid": [[9.0, 0.0], [-9.0, 0.0]]}
        code, text = invoke(tmp_path, "solve", cfg)
        rep = json.loads(text)
        assert code == 4 and rep["partial"] is True
        assert len(rep["samples"]) == 1 and len(rep["failures"]) == 1


class TestConnect:
    def test_scalar_grid(self, tmp_path):
        rng = np.random.default_rng(5)
        pts = [[float(a), float(b)] for a, b in zip(rng.uniform(-3, 3, 50), rng.uniform(-2, 3, 50))]
        code, text = invoke(tmp_path, "connect", {"system": SCALAR_SYSTEM, "grid": pts})
        rep = json.loads(text)
        assert code == 0 and rep["periodicity_ok"]
        for row in rep["samples"]:
            x = cx(row["x"])
            assert abs(cx(row["P"][0][0]) - scalar_P_oracle(LAM, MU, 1.0, x)) <= 1e-8 * max(1, abs(scalar_P_oracle(LAM, MU, 1.0, x)))

    def test_csv(self, tmp_path):
        code, text = invoke(tmp_path, "connect", {"system": SCALAR_SYSTEM, "grid": [[0.5, 0.5], [1.5, -0.5]]},
                            "--format", "csv")
        assert code == 0
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0][:2] == ["x_re", "x_im"] and len(rows) == 3
        assert len(rows[1]) == 4

    def test_deterministic(self, tmp_path):
        cfg = {"system": SCALAR_SYSTEM, "grid": {"re": [-1, 1, 3], "im": [0.5, 1.5, 2]}, "seed": 7}
        a = invoke(tmp_path, "connect", cfg)[1]
        b = invoke(tmp_path, "connect", cfg)[1]
        assert a == b


class TestFamilies:
    def test_fixed_is_identical(self):
        tpl = {"template": "fixed", "A": SCALAR_SYSTEM["A"]}
        a, b = family_instantiate(tpl, 0.3), family_instantiate(tpl, 0.1)
        assert np.allclose(a.evaluate_A(2 + 1j), b.evaluate_A(2 + 1j))

    def test_scaled_constant(self):
        tpl = {"template": "scaled", "A": {"rational": {"entries": [[{"num": [[0.3, 0]]}]]}}}
        assert np.allclose(family_instantiate(tpl, 0.05).A0, [[0.3]])

    def test_scaled_reciprocal(self):
        tpl = {"template": "scaled", "A": {"rational": {"entries": [[{"num": [1.0], "den": [-1.0, 1.0]}]]}}}
        sys_ = family_instantiate(tpl, 0.5)
        for x in (2.0, 1 + 3j):
            assert abs(sys_.evaluate_A(x)[0, 0] - 0.5 / (x - 0.5)) < 1e-14

    def test_hpoly(self):
        sys_ = family_instantiate(SCALAR_FAMILY, 0.25)
        x = 3 + 1j
        assert abs(sys_.evaluate_A(x)[0, 0] - (-MU / (x - 0.25 - LAM))) < 1e-14
        assert abs(family_limit(SCALAR_FAMILY)(x)[0, 0] - (-MU / (x - LAM))) < 1e-14

    def test_unknown_template(self):
        with pytest.raises(ValidationError):
            family_instantiate({"template": "warped"}, 0.1)

    def test_grid_parsing(self):
        assert parse_grid({"re": [0, 1, 2], "im": [0, 0, 1]}) == [0j, 1 + 0j]
        assert parse_grid([[1, 2]]) == [1 + 2j]


class TestConflueMonodromy:
    def test_conflue(self, tmp_path):
        code, text = invoke(tmp_path, "conflue", {"family": SCALAR_FAMILY})
        rep = json.loads(text)
        assert code == 0
        target = [1.0, cmath.exp(-2j * math.pi * MU / LAM), 1.0]
        for row, t in zip(rep["strips"], target):
            assert abs(cx(row["limit"][0][0]) - t) <= 1e-3

    def test_monodromy(self, tmp_path):
        cfg = {"family": SCALAR_FAMILY, "h_sequence": [0.2, 0.1, 0.05, 0.025], "extrapolation": "linear"}
        code, text = invoke(tmp_path, "monodromy", cfg)
        rep = json.loads(text)
        assert code == 0
        M0 = cx(rep["monodromies"][0][0][0])
        assert abs(M0 - math.exp(0.2 * math.pi)) <= 1e-3
        assert all(o["ok"] for o in rep["oracle"])
        assert set(rep) >= {"poles", "strip_limits", "monodromies", "h_sequence", "diagnostics"}


class TestErrors:
    def test_missing_config(self, tmp_path, capsys):
        assert run(["solve"]) == 2
        err = json.loads(capsys.readouterr().out)
        assert err["error"]["type"] == "ValidationError"

    def test_small_order(self, tmp_path):
        code, text = invoke(tmp_path, "solve", {"system": SCALAR_SYSTEM}, "--order", "4")
        assert code == 2

    def test_bad_h_sequence(self, tmp_path):
        code, _ = invoke(tmp_path, "conflue", {"family": SCALAR_FAMILY, "h_sequence": [0.1, 0.2]})
        assert code == 2

    def test_hypothesis_violation(self, tmp_path):
        fam = {"template": "fixed", "A": {"rational": {"entries": [[{"num": [1.0], "den": [-2.0, 1.0]}]]}}}
        code, text = invoke(tmp_path, "conflue", {"family": fam})
        assert code == 2 and json.loads(text)["error"]["type"] == "HypothesisError"

    def test_numeric_failure(self, tmp_path):
        A = {"rational": {"entries": [[{"num": [0.2]}, {"num": [0]}], [{"num": [0]}, {"num": [1.2]}]]}}
        code, text = invoke(tmp_path, "solve", {"system": {"h": 1.0, "A": A}})
        assert code == 3 and json.loads(text)["error"]["type"] == "ResonanceError"

    def test_csv_only_for_connect(self, tmp_path):
        code, _ = invoke(tmp_path, "solve", {"system": SCALAR_SYSTEM}, "--format", "csv")
        assert code == 2

    def test_tol_override(self, tmp_path):
        code, text = invoke(tmp_path, "solve", {"system": SCALAR_SYSTEM}, "--tol", "oracle=0.5")
        assert code == 0 and json.loads(text)["tolerances"]["oracle"] == 0.5
        code, _ = invoke(tmp_path, "solve", {"system": SCALAR_SYSTEM}, "--tol", "oracle")
        assert code == 2


def test_selftest_entry_point():
    proc = subprocess.run([sys.executable, "-m", "conflux", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stderr.count("PASS") == 8
    assert json.loads(proc.stdout)["passed"] is True
