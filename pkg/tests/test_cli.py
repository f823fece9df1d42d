import json
import os
import stat
import subprocess
import sys

import numpy as np
import pytest

from platehom.cli import main

HOMOG = {"kind": "isotropic_analytic", "grid": [16, 16], "x3_nodes": 4,
         "mu": "1", "lambda": "1"}
LAYERED = {"kind": "isotropic_analytic", "grid": [64, 64], "x3_nodes": 2,
           "mu": "2 + cos(2*pi*y1)", "lambda": "0"}
FLAT_ANSATZ = {"isometry": {"kind": "flat"}}
CYL_ANSATZ = {"isometry": {"kind": "cylinder", "radius": 1.0}}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "homog.json").write_text(json.dumps(HOMOG))
    (tmp_path / "layered.json").write_text(json.dumps(LAYERED))
    (tmp_path / "flat.json").write_text(json.dumps(FLAT_ANSATZ))
    (tmp_path / "cyl.json").write_text(json.dumps(CYL_ANSATZ))
    return tmp_path


def run_cli(args):
    return main([str(a) for a in args])


class TestHomogenize:
    def test_value(self, workdir):
        out = workdir / "result.json"
        rc = run_cli(["homogenize", "--material", workdir / "homog.json",
                      "--A", "1,0,0", "--modes", "3", "--out", out])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["outputs"]["value"] == pytest.approx(1.0 / 9.0, rel=1e-10)
        assert doc["format_version"] == 1

    def test_zero_direction(self, workdir):
        out = workdir / "zero.json"
        rc = run_cli(["homogenize", "--material", workdir / "homog.json",
                      "--A", "0,0,0", "--modes", "3", "--out", out])
        assert rc == 0
        assert json.loads(out.read_text())["outputs"]["value"] == 0.0

    def test_missing_material_file(self, workdir):
        rc = run_cli(["homogenize", "--material", workdir / "nope.json",
                      "--A", "1,0,0"])
        assert rc == 3

    def test_bad_material_schema(self, workdir):
        bad = workdir / "bad.json"
        bad.write_text(json.dumps({"kind": "isotropic_analytic",
                                   "grid": [12, 16], "mu": "1", "lambda": "0"}))
        rc = run_cli(["homogenize", "--material", bad, "--A", "1,0,0"])
        assert rc == 1

    def test_solver_failure_exit_code(self, workdir):
        rc = run_cli(["homogenize", "--material", workdir / "layered.json",
                      "--A", "1,0,0", "--modes", "8", "--tol", "1e-12",
                      "--max-iter", "1"])
        assert rc == 2


class TestTensor:
    def test_homogeneous(self, workdir):
        out = workdir / "tensor.json"
        rc = run_cli(["tensor", "--material", workdir / "homog.json",
                      "--modes", "2", "--out", out])
        assert rc == 0
        doc = json.loads(out.read_text())
        from platehom.voigt import isotropic, reduce2d
        expect = reduce2d(isotropic(1.0, 1.0)).matrix / 12.0
        assert np.allclose(doc["outputs"]["matrix"], expect, rtol=1e-9)

    def test_nonpositive_modes(self, workdir):
        rc = run_cli(["tensor", "--material", workdir / "homog.json",
                      "--modes", "0"])
        assert rc == 1


class TestGammaSweep:
    def test_homogeneous_constant_column(self, workdir):
        out = workdir / "sweep.json"
        csv = workdir / "sweep.csv"
        rc = run_cli(["gamma-sweep", "--material", workdir / "homog.json",
                      "--A", "1,0,0", "--gammas", "1,0.5,0.25", "--modes", "2",
                      "--x3-elems", "8", "--out", out, "--csv", csv])
        assert rc == 0
        doc = json.loads(out.read_text())
        values = [r["value"] for r in doc["outputs"]["rows"]]
        assert max(values) - min(values) < 1e-10 * values[0]
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "gamma,value,gap,x3_elems"
        assert len(lines) == 4

    def test_empty_gammas(self, workdir):
        rc = run_cli(["gamma-sweep", "--material", workdir / "homog.json",
                      "--A", "1,0,0", "--gammas", ","])
        assert rc == 1


class TestValidate:
    def test_fresh_build_passes(self, workdir):
        out = workdir / "validate.json"
        rc = run_cli(["validate", "--quick", "--out", out])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["outputs"]["all_pass"] is True

    def test_corrupted_assembly(self, workdir, monkeypatch):
        monkeypatch.setenv("PLATEHOM_FAULT_INJECT", "1.2")
        rc = run_cli(["validate", "--quick",
                      "--out", workdir / "validate_bad.json"])
        assert rc == 2

    def test_unwritable_output(self, workdir):
        rc = run_cli(["validate", "--quick",
                      "--out", workdir / "no_such_dir" / "x.json"])
        assert rc == 3


class TestRecover:
    def test_flat_zero_rows(self, workdir):
        out = workdir / "recover.json"
        csv = workdir / "recover.csv"
        rc = run_cli(["recover", "--config", workdir / "flat.json",
                      "--material", workdir / "homog.json", "--k", "4,8",
                      "--out", out, "--csv", csv])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["outputs"]["target"] == 0.0
        assert all(r["energy"] == 0.0 for r in doc["outputs"]["rows"])
        assert csv.exists()

    def test_cylinder_converges(self, workdir):
        out = workdir / "recover_cyl.json"
        rc = run_cli(["recover", "--config", workdir / "cyl.json",
                      "--material", workdir / "homog.json", "--k", "4,8",
                      "--out", out])
        assert rc == 0
        doc = json.loads(out.read_text())
        gaps = [r["gap"] for r in doc["outputs"]["rows"]]
        assert gaps[1] < gaps[0]

    def test_k_one_rejected(self, workdir):
        rc = run_cli(["recover", "--config", workdir / "cyl.json",
                      "--material", workdir / "homog.json", "--k", "1,2"])
        assert rc == 1


class TestDeterminism:
    def test_byte_identical_documents(self, workdir):
        outs = []
        for name in ("d1.json", "d2.json"):
            out = workdir / name
            rc = run_cli(["homogenize", "--material", workdir / "layered.json",
                          "--A", "1,0,0", "--modes", "8", "--deterministic",
                          "--out", out])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_validate_deterministic(self, workdir):
        outs = []
        for name in ("v1.json", "v2.json"):
            out = workdir / name
            rc = run_cli(["validate", "--quick", "--deterministic",
                          "--out", out])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_wall_time_only_outside_deterministic(self, workdir):
        out = workdir / "wt.json"
        run_cli(["homogenize", "--material", workdir / "homog.json",
                 "--A", "1,0,0", "--modes", "2", "--out", out])
        assert "wall_time_s" in json.loads(out.read_text())
        run_cli(["homogenize", "--material", workdir / "homog.json",
                 "--A", "1,0,0", "--modes", "2", "--deterministic",
                 "--out", out])
        assert "wall_time_s" not in json.loads(out.read_text())


class TestRoundTrip:
    def test_rerun_from_embedded_config(self, workdir):
        out = workdir / "first.json"
        rc = run_cli(["homogenize", "--material", workdir / "layered.json",
                      "--A", "1,0,0", "--modes", "8", "--deterministic",
                      "--out", out])
        assert rc == 0
        doc = json.loads(out.read_text())
        mat2 = workdir / "rematerialized.json"
        mat2.write_text(json.dumps(doc["config"]["material"]))
        out2 = workdir / "second.json"
        a = doc["config"]["A"]
        a_text = f"{a[0]},{a[1]},{a[2] / np.sqrt(2.0)}"
        rc = run_cli(["homogenize", "--material", mat2, "--A", a_text,
                      "--modes", str(doc["config"]["modes"]),
                      "--tol", repr(doc["config"]["tol"]), "--deterministic",
                      "--out", out2])
        assert rc == 0
        doc2 = json.loads(out2.read_text())
        assert doc2["outputs"]["value"] == pytest.approx(
            doc["outputs"]["value"], rel=1e-14)


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "platehom", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.1.0"
