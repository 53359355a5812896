import json
import struct

import numpy as np
import pytest

from mocha import selftest
from mocha.cli import main
from mocha.core import DisparityMap
from mocha.cost_volume import volume_from_bytes
from mocha.formats import load_pfm, save_pfm, save_pnm
from mocha.pipeline import synthetic_pair


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    left, right, gt = synthetic_pair(48, 64, 4, seed=2)
    save_pnm(d / "left.ppm", left)
    save_pnm(d / "right.ppm", right)
    save_pfm(d / "gt.pfm", DisparityMap(gt.astype(np.float32)))
    (d / "cfg.json").write_text(json.dumps({"max_disparity": 32, "hidden_channels": 16,
                                            "context_channels": 16, "iterations": 2}))
    return d


def match_args(scene, out, *extra):
    return ["match", "--left", str(scene / "left.ppm"), "--right", str(scene / "right.ppm"),
            "--out", str(out), "--config", str(scene / "cfg.json"), "--seed", "5", *extra]


def test_match_outputs(scene, tmp_path, capsys):
    out = tmp_path / "d.pfm"
    rc = main(match_args(scene, out, "--viz", str(tmp_path / "v.ppm"),
                         "--dump-iterations", str(tmp_path / "it"),
                         "--dump-motif-graphs", str(tmp_path / "g"), "--with-distances"))
    assert rc == 0
    d = load_pfm(out).values
    assert d.shape == (48, 64) and np.all(np.isfinite(d)) and d.min() >= 0 and d.max() <= 32
    assert json.loads(capsys.readouterr().out)["iterations"] == 2
    assert (tmp_path / "v.ppm").read_bytes().startswith(b"P6\n64 48\n255\n")
    assert sorted(p.name for p in (tmp_path / "it").iterdir()) == ["iter_00.pfm", "iter_01.pfm",
                                                                   "iter_02.pfm"]
    graphs = json.loads((tmp_path / "g" / "graphs_left.json").read_text())
    assert graphs and "distance_matrix" in graphs[0]
    assert any(p.suffix == ".dot" for p in (tmp_path / "g").iterdir())


def test_match_is_byte_deterministic(scene, tmp_path):
    a, b = tmp_path / "a.pfm", tmp_path / "b.pfm"
    assert main(match_args(scene, a)) == 0
    assert main(match_args(scene, b, "--threads", "3")) == 0
    assert a.read_bytes() == b.read_bytes()


def test_match_toggle(scene, tmp_path):
    a, b = tmp_path / "a.pfm", tmp_path / "b.pfm"
    assert main(match_args(scene, a, "--dump-volume", str(tmp_path / "a.mcvv"))) == 0
    assert main(match_args(scene, b, "--toggle", "mcg=off",
                           "--dump-volume", str(tmp_path / "b.mcvv"))) == 0
    assert a.read_bytes() != b.read_bytes()
    va, _ = volume_from_bytes((tmp_path / "a.mcvv").read_bytes())
    vb, _ = volume_from_bytes((tmp_path / "b.mcvv").read_bytes())
    assert va.shape == (8, 12, 16) and np.max(np.abs(va - vb)) > 0
    assert main(match_args(scene, b, "--toggle", "mcg")) == 2


def test_match_dimension_mismatch(scene, tmp_path, capsys):
    save_pnm(tmp_path / "small.ppm", np.zeros((3, 48, 60)))
    rc = main(["match", "--left", str(scene / "left.ppm"), "--right", str(tmp_path / "small.ppm"),
               "--out", str(tmp_path / "x.pfm")])
    assert rc == 2 and "differ" in capsys.readouterr().err


def test_match_bad_image_is_io_error(scene, tmp_path):
    (tmp_path / "bad.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    rc = main(["match", "--left", str(tmp_path / "bad.ppm"), "--right", str(scene / "right.ppm"),
               "--out", str(tmp_path / "x.pfm")])
    assert rc == 3


def test_eval(scene, tmp_path, capsys):
    assert main(["eval", "--disp", str(scene / "gt.pfm"), "--gt", str(scene / "gt.pfm"),
                 "--thresholds", "1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"epe": 0.0, "bad": {"1.0": 0.0},
                                                   "valid": 48 * 64}
    save_pfm(tmp_path / "d.pfm", np.array([[1.0, 2.0]], np.float32))
    save_pfm(tmp_path / "g.pfm", np.array([[1.0, 4.0]], np.float32))
    assert main(["eval", "--disp", str(tmp_path / "d.pfm"), "--gt", str(tmp_path / "g.pfm"),
                 "--thresholds", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["epe"] == 1.0 and rep["bad"]["1.0"] == 50.0


def test_eval_mask_nonpositive(scene, tmp_path, capsys):
    save_pfm(tmp_path / "d.pfm", np.array([[9.0, 2.0]], np.float32))
    save_pfm(tmp_path / "g.pfm", np.array([[0.0, 2.0]], np.float32))
    main(["eval", "--disp", str(tmp_path / "d.pfm"), "--gt", str(tmp_path / "g.pfm"),
          "--mask-nonpositive"])
    rep = json.loads(capsys.readouterr().out)
    assert rep["epe"] == 0.0 and rep["valid"] == 1


def test_eval_errors(scene, tmp_path):
    assert main(["eval", "--disp", str(tmp_path / "missing.pfm"), "--gt", str(scene / "gt.pfm")]) == 3
    save_pfm(tmp_path / "small.pfm", np.zeros((2, 2), np.float32))
    assert main(["eval", "--disp", str(tmp_path / "small.pfm"), "--gt", str(scene / "gt.pfm")]) == 2
    (tmp_path / "trunc.pfm").write_bytes(b"Pf\n1 1\n-1.0\n" + struct.pack("<f", 1.0)[:2])
    assert main(["eval", "--disp", str(tmp_path / "trunc.pfm"), "--gt", str(scene / "gt.pfm")]) == 3


def test_selftest_passes(capsys):
    assert main(["selftest", "--trials", "20"]) == 0
    captured = capsys.readouterr()
    summary = json.loads(captured.out)
    assert summary["passed"] and len(summary["suites"]) == len(selftest.SUITES)
    assert "PASS" in captured.err


def test_selftest_reports_injected_fault(monkeypatch, capsys):
    def broken(trials, rng):
        assert False, "vote conservation"

    monkeypatch.setitem(selftest.SUITES, "mcg_oracle", (broken, 1.0))
    assert main(["selftest", "--trials", "5"]) == 1
    captured = capsys.readouterr()
    assert "FAIL  mcg_oracle" in captured.err and "vote conservation" in captured.err


def test_dwt_command(scene, tmp_path, capsys):
    out = tmp_path / "back.ppm"
    assert main(["dwt", "--in", str(scene / "left.ppm"), "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["max_abs_error"] <= 1e-12
    assert out.read_bytes() == (scene / "left.ppm").read_bytes()


def test_sweep(scene, capsys):
    rc = main(["sweep", "--left", str(scene / "left.ppm"), "--right", str(scene / "right.ppm"),
               "--config", str(scene / "cfg.json"), "--iters-list", "1,2",
               "--gt", str(scene / "gt.pfm")])
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)["sweep"]
    assert [r["iters"] for r in rows] == [1, 2] and all(r["seconds"] > 0 for r in rows)
    assert all(np.isfinite(r["epe"]) for r in rows)


def test_synth_command(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), "--height", "32", "--width", "40"]) == 0
    assert load_pfm(tmp_path / "gt.pfm").shape == (32, 40)


def test_unknown_config_field(scene, tmp_path):
    (tmp_path / "c.json").write_text('{"bogus": 1}')
    rc = main(["match", "--left", str(scene / "left.ppm"), "--right", str(scene / "right.ppm"),
               "--out", str(tmp_path / "x.pfm"), "--config", str(tmp_path / "c.json")])
    assert rc == 2
