import json

import numpy as np
import pytest

import mcam


def test_presets_and_design_report():
    names = mcam.presets()
    assert {"multi_view", "continuous", "tiled"} <= set(names)
    rows = mcam.design_report("continuous").strip().splitlines()
    assert len(rows) >= 2
    assert mcam.classify_regime("multi_view")["aggregate"] == "MultiView"
    assert mcam.classify_regime("tiled")["aggregate"] == "Tiled"


def test_array_json_round_trip():
    text = mcam.array_config("tiled")
    assert mcam.array_config(text) == text


def test_validate_config_overrides():
    c = mcam.validate_config({"preset": "continuous"}, mode="stitch", seed=9)
    assert c["mode"] == "stitch"
    assert c["seed"] == 9
    with pytest.raises(mcam.ConfigError):
        mcam.validate_config('{"preset": "continuous", "bogus": 1}', mode="design")
    with pytest.raises(mcam.ConfigError):
        mcam.validate_config("{", mode="design")


def test_errors_share_a_base():
    assert issubclass(mcam.DomainError, mcam.Error)
    with pytest.raises(mcam.DomainError):
        mcam.triangulate(0.0, 0.0, 19500.0, 30000.0)


def test_throughput_is_exact():
    r = mcam.throughput("multi_view")
    assert r["frame_bytes"] == mcam.frame_bytes("multi_view")
    assert r["max_fps"] == pytest.approx(5e9 / r["frame_bytes"])
    assert mcam.frame_bytes("multi_view", binning=2) * 4 == r["frame_bytes"]


def test_tiled_scan_covers_the_footprint():
    p = mcam.plan_tiled_scan("tiled", overlap=0.1)
    assert p["uncovered"] == 0
    assert p["snapshots"] == p["counts"][0] * p["counts"][1]


def test_analytic_sweep_is_exact():
    r = mcam.analytic_depth_sweep("multi_view", -300.0, 300.0, 100.0)
    assert len(r["planes"]) == 7
    assert r["rmse_um"] < 1e-6


def test_stitch_returns_a_composite():
    s = mcam.stitch({"preset": "continuous"}, mode="stitch", seed=3)
    assert s["composite"].ndim == 2
    a = json.loads(mcam.array_config("continuous"))
    pix = a["sensor"]["pixel_um"] / a["magnification"]
    assert s["pixel_um"] == pytest.approx(pix)
    assert s["resolution_um"] == pytest.approx(2 * pix)
    assert s["contrast"]


def test_focus_prefers_the_sharp_slice():
    rng = np.random.default_rng(0)
    sharp = rng.random((64, 64)).astype(np.float32)
    blurred = (sharp + np.roll(sharp, 1, 0) + np.roll(sharp, 1, 1) + np.roll(sharp, 1, (0, 1))) / 4
    flat = np.full((64, 64), 0.5, np.float32)
    assert mcam.focus_metric(sharp) > mcam.focus_metric(blurred)
    assert mcam.select_focus([flat, blurred, sharp, blurred]) == 2


def test_png_round_trip(tmp_path):
    img = np.linspace(0, 1, 48 * 32, dtype=np.float32).reshape(32, 48)
    path = str(tmp_path / "ramp.png")
    mcam.write_png(path, img, 16)
    back = mcam.read_png(path)
    assert back.shape == (32, 48)
    assert np.max(np.abs(back - img)) <= 0.5 / 65535 + 1e-7


def test_run_writes_a_manifest(tmp_path):
    out = tmp_path / "design"
    summary = mcam.run({"preset": "continuous"}, mode="design", output_dir=str(out))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["summary"] == summary
