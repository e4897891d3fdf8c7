import hashlib
import json

import pytest

from sepergy import cli
from sepergy.experiments import EpsSchedule, VerifyResult


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_schedule_parse_and_snap():
    s = EpsSchedule.parse("0.05:0.4:geometric:6")
    snap = s.snap(1 / 128)
    assert snap["steps"] == [51, 34, 22, 15, 10, 6]
    assert snap["eps"][0] == 51 / 128
    assert len(snap["requested"]) == 6


@pytest.mark.parametrize("bad", ["0.1:0.2", "0.2:0.1:geometric:4", "0.1:0.2:linear:4",
                                 "a:0.2:geometric:4", "0.1:0.2:geometric:1"])
def test_schedule_rejects(bad):
    with pytest.raises(ValueError):
        EpsSchedule.parse(bad)


def test_energy_command(capsys, tmp_path):
    out = tmp_path / "corner.json"
    code, _, _ = run(capsys, "energy", "--gallery", "corner", "--p", "2", "--grid", "128",
                     "--eps", "0.1:0.4:geometric:4", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["energy"]["meta"]["eps_snap"]["spacing"] == 1 / 64
    assert rep["energy"]["extrapolated"] == pytest.approx(0.0795775, rel=0.03)
    assert (tmp_path / "corner.csv").read_text().startswith("eps,value\n")


def test_reports_are_byte_identical(capsys, tmp_path):
    argv = ["energy", "--gallery", "roof", "--p", "2", "--grid", "64",
            "--eps", "0.1:0.3:geometric:4", "--out"]
    run(capsys, *argv, str(tmp_path / "a.json"))
    run(capsys, *argv, str(tmp_path / "b.json"))
    assert (tmp_path / "a.json").read_bytes().replace(b"a.json", b"") == \
        (tmp_path / "b.json").read_bytes().replace(b"b.json", b"")


def test_gallery_render_is_deterministic(capsys, tmp_path):
    digests = []
    for name in ("a.bin", "b.bin"):
        code, _, _ = run(capsys, "gallery", "render", "roof", "--grid", "128",
                         "--out", str(tmp_path / name))
        assert code == 0
        digests.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_gallery_list(capsys):
    code, out, _ = run(capsys, "gallery", "list")
    assert code == 0 and "corner:" in out and "hat_array:" in out


def test_pipeline_from_rendered_file(capsys, tmp_path):
    grid = tmp_path / "corner.bin"
    run(capsys, "gallery", "render", "corner", "--grid", "64", "--out", str(grid))
    code, out, _ = run(capsys, "defect", "--input", str(grid), "--bump", "0", "0", "0.5")
    assert code == 0
    rep = json.loads(out)
    assert rep["defect"]["total_variation"] == pytest.approx(1.0)
    code, out, _ = run(capsys, "pstar", "--input", str(grid), "--eps", "0.1:0.2:geometric:5")
    assert code == 0 and json.loads(out)["p_star"]["probes"] == [1.0, 2.0]
    code, out, _ = run(capsys, "decompose", "--input", str(grid), "--eps", "0.2:0.4:geometric:3")
    assert code == 0 and json.loads(out)["decompose"]["ratio"] > 0


@pytest.mark.parametrize("argv,needle", [
    (["gallery", "render", "nope", "--grid", "8", "--out", "x.bin"], "unknown gallery id"),
    (["gallery", "render", "hat_array", "--grid", "20", "--out", "x.bin"], "minimal grid"),
    (["energy", "--gallery", "corner", "--p", "2", "--grid", "8",
      "--eps", "0.05:0.1:geometric:3"], "collapses"),
    (["energy", "--gallery", "corner", "--grid", "8", "--eps", "0.1:0.5:geometric:3"], "--p"),
    (["energy", "--gallery", "corner", "--p", "2", "--grid", "64",
      "--eps", "0.5:2:geometric:3"], "exceeds domain"),
    (["energy", "--input", "missing.bin", "--p", "2", "--eps", "0.1:0.2:geometric:3"],
     "does not exist"),
    (["verify", "nope"], "unknown experiment"),
])
def test_validation_errors_exit_one(capsys, tmp_path, monkeypatch, argv, needle):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err.startswith("error: ") and needle in err
    assert err.count("\n") == 1


def test_malformed_grid_file(capsys, tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    code, _, err = run(capsys, "energy", "--input", str(bad), "--p", "2",
                       "--eps", "0.1:0.2:geometric:3")
    assert code == 1 and "header" in err


def test_thread_variable(capsys, monkeypatch):
    monkeypatch.setenv("SEPERGY_THREADS", "zero")
    code, _, err = run(capsys, "gallery", "list")
    assert code == 1 and "SEPERGY_THREADS" in err
    monkeypatch.setenv("SEPERGY_THREADS", "1")
    assert run(capsys, "gallery", "list")[0] == 0


def test_numerical_failure_exit_two(capsys, monkeypatch):
    def boom(cfg):
        raise FloatingPointError("non-finite energy accumulation")
    monkeypatch.setitem(cli.__dict__, "cmd_energy", boom)
    code, _, err = run(capsys, "energy", "--gallery", "corner")
    assert code == 2 and "numerical failure" in err


def test_verify_single(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "separable-zero", "--out", str(tmp_path))
    assert code == 0 and out.startswith("PASS [ 4] separable-zero")
    rep = json.loads((tmp_path / "separable-zero.json").read_text())
    assert rep["passed"] is True


def test_verify_failure_exit_two(capsys, monkeypatch):
    from sepergy import experiments
    monkeypatch.setitem(experiments.EXPERIMENTS, "separable-zero",
                        lambda: VerifyResult("separable-zero", 4, False, {"max_abs": 1.0}, "0"))
    code, out, _ = run(capsys, "verify", "separable-zero")
    assert code == 2 and out.startswith("FAIL")
