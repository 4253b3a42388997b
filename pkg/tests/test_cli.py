import csv
import json
from pathlib import Path

import pytest

from zonalmc import __version__
from zonalmc.cli import main
from zonalmc.search import certify_positive

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run(tmp_path, *argv, scenario=None):
    out = tmp_path / "out"
    args = list(argv)
    if scenario:
        args += ["--config", str(SCENARIOS / scenario)]
    status = main(args + ["--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return status, report, out


def test_verify_sphere(tmp_path, capsys):
    status, report, _ = run(tmp_path, "verify", scenario="sphere2.yaml")
    assert status == 0
    assert report["schema"] == "zonalmc.run/1" and report["status"] == 0
    assert report["tool_version"] == __version__ and len(report["input_digest"]) == 64
    assert report["result"]["failed"] == 0
    assert "[PASS]" in capsys.readouterr().out


def test_verify_corrupted_metric_fails(tmp_path):
    status, report, _ = run(tmp_path, "verify", scenario="corrupted.yaml")
    assert status == 4
    failed = [c["name"] for c in report["result"]["checks"] if not c["passed"]]
    assert any("positive definite" in n for n in failed)


def test_classify_writes_profile(tmp_path):
    status, report, out = run(tmp_path, "classify", scenario="certified.yaml")
    assert status == 0
    res = report["result"]
    assert res["is_zonal"] and res["is_S1"] and res["is_positive"] and not res["is_geodesic"]
    rows = list(csv.DictReader((out / "profile.csv").open()))
    assert set(rows[0]) == {"chi", "f", "f2", "norm2_X", "F"}
    assert len(rows) == 401


def test_classify_irrational_flow(tmp_path):
    status, report, _ = run(tmp_path, "classify", scenario="irrational.yaml")
    assert status == 0
    assert report["result"]["is_S1"] is False


def test_mc_self_pair_is_zero(tmp_path):
    status, report, out = run(tmp_path, "mc", scenario="ellipsoid2d_self.yaml")
    assert status == 0
    mc = report["result"]["mc"]
    assert mc["mc_direct"] == 0.0 and mc["verdict"] == "nonpositive"
    assert (out / "integrand.csv").exists()


def test_mc_unweighted_is_indeterminate(tmp_path, capsys):
    status, report, _ = run(tmp_path, "mc", scenario="unweighted.yaml")
    assert status == 5
    assert report["result"]["mc"]["verdict"] == "indeterminate"
    assert "not divergence-free" in capsys.readouterr().err


def test_certify_geodesic_is_not_applicable(tmp_path):
    status, report, _ = run(tmp_path, "certify", scenario="geodesic.yaml")
    assert status == 3
    assert report["message"].startswith("not applicable")


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("manifold: {kind: sphere2}\nflow: {profile: {family: nope}}\n")
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["verify", "--out", str(tmp_path / "o")]) == 2
    assert main(["verify", "--config", str(SCENARIOS / "sphere2.yaml"), "--resolution-scale", "0"]) == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


@pytest.fixture(scope="module")
def stored_certificate(tmp_path_factory, chart3, cert_flow):
    cert = certify_positive(chart3, cert_flow, 8, resolution=(8, 16, 32))
    path = tmp_path_factory.mktemp("cert") / "certificate.json"
    path.write_text(json.dumps(cert.to_dict()))
    return path


def test_replay_reproduces(tmp_path, stored_certificate):
    status, report, _ = run(tmp_path, "certify", "--from-certificate", str(stored_certificate))
    assert status == 0
    assert report["result"]["reproduced"] and report["result"]["replay_difference"] == 0.0


def test_replay_detects_tampering(tmp_path, stored_certificate):
    data = json.loads(stored_certificate.read_text())
    data["mc"]["mc_direct"] *= 1.01
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(data))
    status, report, _ = run(tmp_path, "certify", "--from-certificate", str(tampered))
    assert status == 4
    assert not report["result"]["reproduced"]
