import json
import math
import subprocess
import sys

import pytest

from eprblab.cli import CliConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def qm_row(out):
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, line.split(",")))) for line in lines[1:]]


def test_qm_right_angle(capsys):
    code, out, _ = run(capsys, "qm", "--phi-deg", "90")
    assert code == 0 and qm_row(out)[0]["joint_probability"] == 0.5


@pytest.mark.parametrize("deg, corr", [("0", -1.0), ("22.5", -0.7071067811865476)])
def test_qm_correlation(capsys, deg, corr):
    code, out, _ = run(capsys, "qm", "--phi-deg", deg)
    assert code == 0 and qm_row(out)[0]["correlation"] == pytest.approx(corr, abs=1e-16)


@pytest.mark.parametrize("bad", ["ninety", "nan", "inf"])
def test_qm_unparsable_angle(capsys, bad):
    with pytest.raises(SystemExit) as exc:
        main(["qm", "--phi-deg", bad])
    assert exc.value.code == 2


def test_qm_writes_curve_and_manifest(tmp_path, capsys):
    out = tmp_path / "qm.csv"
    assert run(capsys, "qm", "--phi-steps", "5", "--out", str(out))[0] == 0
    assert out.read_text().startswith("phi_rad,engine,mode,value,std_error")
    manifest = json.loads((tmp_path / "qm.csv.manifest.json").read_text())
    assert set(manifest) == {"version", "config", "seed", "created_at", "digests"}
    assert "qm.csv" in manifest["digests"]


def test_model_quad_literal_rows(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "model", "--engine", "quad", "--mode", "literal", "--phi-steps", "181",
                     "--quad-order", "16", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "phi_rad,engine,mode,value,std_error"
    assert len(lines) == 182
    assert all(line.split(",")[4] == "0.0" for line in lines[1:])
    assert (tmp_path / "curve.csv.manifest.json").exists()


def test_model_right_angle_matches_oracle(oracle, capsys):
    code, out, _ = run(capsys, "model", "--engine", "quad", "--mode", "literal", "--phi-deg", "90")
    value = float(out.splitlines()[1].split(",")[3])
    ref = next(p for p in oracle["points"] if p["phi_deg"] == 90)["rates"]["literal"]
    assert code == 0 and abs(value - ref) < 1e-8


def test_model_mc_deterministic_files(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run(capsys, "model", "--engine", "mc", "--samples", "1000000", "--seed", "42",
                   "--phi-steps", "19", "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_model_conflicting_flags(capsys):
    code, _, err = run(capsys, "model", "--engine", "quad", "--samples", "100")
    assert code == 2 and "only apply" in err
    code, _, _ = run(capsys, "model", "--phi-deg", "10", "--phi-steps", "5")
    assert code == 2


def test_audit_strategies(capsys):
    code, out, _ = run(capsys, "audit", "--strategy", "sign-cos", "--lambda-samples", "100000",
                       "--grid-step-deg", "5")
    doc = json.loads(out)
    assert code == 0 and doc["max_abs_S"] <= 2 + 3 * doc["std_error"]
    assert sorted(doc["limits"].values()) == pytest.approx([2, 2 * math.sqrt(2), 4, 8])
    code, out, _ = run(capsys, "audit", "--strategy", "qm-correlation", "--grid-step-deg", "1")
    assert abs(json.loads(out)["max_abs_S"] - 2 * math.sqrt(2)) < 1e-3
    code, out, _ = run(capsys, "audit", "--strategy", "constant-one", "--grid-step-deg", "5")
    doc = json.loads(out)
    assert doc["max_abs_S"] == 2.0 and doc["violated"] is False


def test_audit_unknown_strategy(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["audit", "--strategy", "telepathy"])
    assert exc.value.code == 2
    assert "sign-cos" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    cfg = CliConfig(phi_deg=12.5, modes=["literal"], samples=123, out="x")
    path = tmp_path / "c.json"
    cfg.save(path)
    again = CliConfig.load(path)
    again.save(tmp_path / "d.json")
    assert CliConfig.load(tmp_path / "d.json") == again == cfg


def test_config_file_and_flag_precedence(tmp_path, capsys):
    path = tmp_path / "c.json"
    CliConfig(phi_steps=3, quad_order=8).save(path)
    code, out, _ = run(capsys, "model", "--config", str(path), "--mode", "literal")
    assert code == 0 and len(out.splitlines()) == 4
    code, out, _ = run(capsys, "model", "--config", str(path), "--mode", "literal", "--phi-steps", "5")
    assert len(out.splitlines()) == 6


def test_bad_config_exit_2(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "qm", "--config", str(path))[0] == 2


def test_degree_round_trip():
    for deg in (0.0, 0.1, 22.5, 90.0, 179.9, 1234.567):
        assert abs(math.degrees(math.radians(deg)) - deg) <= 1e-12


def _small_sweep(capsys, out, *extra):
    return run(capsys, "sweep", "--out", str(out), "--phi-steps", "19", "--samples", "20000",
               "--quad-order", "16", "--grid-step-deg", "5", *extra)


def test_sweep_and_report(tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert _small_sweep(capsys, run_dir)[0] == 0
    assert run(capsys, "report", str(run_dir), "--no-render")[0] == 0
    for name in ("report.json", "report.md", "plot_report.py", "manifest.json", "curves.csv"):
        assert (run_dir / name).exists()
    doc = json.loads((run_dir / "report.json").read_text())
    from eprblab.harness import validate_report
    validate_report(doc)


def test_report_rerun_from_manifest_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    _small_sweep(capsys, a)
    run(capsys, "report", str(a), "--no-render")
    assert run(capsys, "sweep", "--manifest", str(a / "manifest.json"), "--out", str(b))[0] == 0
    run(capsys, "report", str(b), "--no-render")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_report_integrity_errors(tmp_path, capsys):
    run_dir = tmp_path / "run"
    _small_sweep(capsys, run_dir)
    with open(run_dir / "curves.csv", "a") as f:
        f.write("0.0,qm,none,0.0,0.0\n")
    code, _, err = run(capsys, "report", str(run_dir))
    assert code == 3 and "digest" in err
    assert run(capsys, "report", str(tmp_path / "empty"))[0] == 3


def test_sweep_manifest_excludes_flags(tmp_path, capsys):
    run_dir = tmp_path / "run"
    _small_sweep(capsys, run_dir)
    code, _, _ = run(capsys, "sweep", "--manifest", str(run_dir / "manifest.json"), "--samples", "5")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "eprblab", "qm", "--phi-deg", "45"],
                          capture_output=True, text=True, check=True)
    assert float(proc.stdout.splitlines()[1].split(",")[3]) == pytest.approx(0.25, abs=1e-15)
