import json
import os

import pytest

from circuit_dilation.cli import main
from circuit_dilation.netlist import REFERENCE_NETLIST

from conftest import DATA


@pytest.fixture
def netlist(tmp_path):
    path = tmp_path / "demo.net"
    path.write_text(REFERENCE_NETLIST)
    return str(path)


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def test_compile_writes_model_and_manifest(netlist, tmp_path):
    out = tmp_path / "out"
    assert main(["compile", netlist, "--out", str(out)]) == 0
    model = _json(out / "model.json")
    assert model["metadata"]["gamma"].startswith("(R(I(p)) + M(q))")
    manifest = _json(out / "manifest.json")
    assert manifest["config"]["command"] == "compile" and manifest["passed"]
    assert manifest["seed"] == manifest["config"]["seed"]


def test_parse_error_exit_code(tmp_path, capsys):
    bad = os.path.join(DATA, "netlists", "malformed", "m06_missing_brace.net")
    assert main(["compile", bad, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    header = open(bad).readline().split()[2]
    assert f"{bad}:{header}:" in err


def test_missing_file_exit_code(tmp_path):
    assert main(["compile", str(tmp_path / "nope.net"), "--out", str(tmp_path)]) == 3


def test_unknown_config_key_is_rejected(netlist, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["compile", netlist, "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_config_overrides_flags_and_env_sets_out(netlist, tmp_path, monkeypatch):
    out = tmp_path / "env_out"
    monkeypatch.setenv("CIRCUIT_DILATION_OUT", str(out))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_paths": 3, "T": 0.05}))
    assert main(["simulate", netlist, "--n-paths", "50", "--dt", "0.01",
                 "--config", str(cfg)]) == 0
    manifest = _json(out / "manifest.json")
    assert manifest["config"]["n_paths"] == 3
    rows = (out / "trajectories.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 6


def test_simulate_is_reproducible_across_threads(netlist, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", netlist, "--n-paths", "20", "--T", "0.1", "--dt", "0.01",
            "--dilation", "symplectic", "--seed", "9"]
    assert main(args + ["--out", str(a), "--threads", "1"]) == 0
    assert main(args + ["--out", str(b), "--threads", "4"]) == 0
    assert (a / "trajectories.csv").read_bytes() == (b / "trajectories.csv").read_bytes()


def test_dilate_reports_residuals(netlist, tmp_path):
    assert main(["dilate", netlist, "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "residuals.json")
    assert rep["pass"] and rep["wiener"]["r0"] < 1e-10
    dil = _json(tmp_path / "dilation.json")
    assert dil["symplectic"]["pairs"] == [[0, 1], [2, 3]]


def test_dilate_rejects_parallel_model(tmp_path):
    path = os.path.join(DATA, "netlists", "valid", "v09_parallel.net")
    assert main(["dilate", path, "--out", str(tmp_path)]) == 1


def test_verify_wiener_and_symplectic(netlist, tmp_path):
    for kind in ("wiener", "symplectic"):
        out = tmp_path / kind
        assert main(["verify", netlist, "--dilation", kind, "--dt", "1e-3", "--T", "1",
                     "--n-paths", "5", "--out", str(out)]) == 0
        rep = _json(out / "verify_report.json")
        assert rep["passed"]
        assert (out / "brackets.csv").exists()


def test_quantum_command(netlist, tmp_path):
    assert main(["quantum", netlist, "--N", "40", "--m", "10", "--T", "0.5",
                 "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "quantum_report.json")
    assert rep["drift_q_rel"] < 1e-10 and rep["master"]["pass"]
    assert (tmp_path / "expectations.csv").read_text().startswith("t,q,p,N,purity,min_eig")


def test_approx_clt_small(tmp_path):
    code = main(["approx", "clt", "--replicates", "1000", "--horizon", "200",
                 "--out", str(tmp_path)])
    rep = _json(tmp_path / "clt_report.json")
    assert code == (0 if rep["pass"] else 1)
    assert [r["N"] for r in rep["reports"]] == [4, 16, 64]


def test_approx_wz_reports_fractions(tmp_path):
    code = main(["approx", "wz", "--case", "additive", "--seeds", "4", "--out", str(tmp_path)])
    rep = _json(tmp_path / "wz_report.json")
    assert code == (0 if rep["pass"] else 1)
    assert len(rep["per_doubling_fraction"]) == 4


def test_rerun_from_manifest_is_byte_identical(netlist, tmp_path):
    first = tmp_path / "first"
    assert main(["simulate", netlist, "--n-paths", "4", "--T", "0.05", "--dt", "0.01",
                 "--dilation", "wiener", "--out", str(first)]) == 0
    cfg = _json(first / "manifest.json")["config"]
    cfg["out"] = str(tmp_path / "second")
    path = tmp_path / "rerun.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path)]) == 0
    assert ((tmp_path / "second" / "trajectories.csv").read_bytes()
            == (first / "trajectories.csv").read_bytes())
