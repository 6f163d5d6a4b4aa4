"""End-to-end smoke checks for the python bindings."""

import json
import math

import numpy as np
import pytest

try:
    import spineone as so
except ImportError:  # running against the in-tree build dir
    import _spineone as so


def test_encode_decode_round_trip():
    kps = [(20.0, 30.0, 0), (40.0, 12.5, 1)]
    enc = so.encode_targets(kps, radius_px=6, num_classes=2, height=64, width=64)
    heat, off = enc["heatmap"], enc["offset"]
    assert heat.shape == (2, 64, 64)
    assert off.shape == (4, 64, 64)
    # one interior R=6 disk covers exactly 113 lattice points
    assert int(heat[0].sum()) == 113

    scores = so.hough_vote(heat, off, radius_px=6)
    dets = so.select_top_keypoints(scores, k=1, suppression_px=6.0)
    assert len(dets) == 1
    row, col, label, score = dets[0]
    assert math.hypot(row - 20.0, col - 30.0) <= 1.0
    assert label == 0
    assert score > 0.9


def test_focal_loss_matches_formula():
    target = np.zeros((1, 4, 4), dtype=np.float32)
    target[0, 1, 1] = 1.0
    pred = np.full((1, 4, 4), 0.25, dtype=np.float32)
    got = so.focal_loss(pred, target, gamma=2.0)
    expect = 0.0
    for r in range(4):
        for c in range(4):
            q = 0.25 if target[0, r, c] > 0 else 0.75
            expect += -((1.0 - q) ** 2.0) * math.log(q)
    assert got == pytest.approx(expect, rel=1e-6)


def test_pck_conventions():
    assert so.pck(3, 1, 0) == pytest.approx(1.0)
    assert so.pck(0, 0, 0) == 0.0
    assert so.micro_ap_score(3, 1) == pytest.approx(0.75)


def test_phantom_exam_contract():
    slices, keypoints, meta = so.phantom_exam(seed=11, index=0)
    assert slices.ndim == 3 and slices.shape[1] == slices.shape[2] == 160
    assert slices.shape[0] >= 7
    assert len(keypoints) == 10
    names = [k["structure"] for k in keypoints]
    assert names == ["D1", "D2", "D3", "D4", "D5", "V1", "V2", "V3", "V4", "V5"]
    assert meta["spacing_row"] > 0

    again, _, _ = so.phantom_exam(seed=11, index=0)
    np.testing.assert_array_equal(slices, again)


def test_phantom_dataset_and_config(tmp_path):
    dirs = so.write_phantom_dataset(str(tmp_path / "data"), count=2, seed=5)
    assert len(dirs) == 2

    cfg = json.loads(so.default_config("desk"))
    assert cfg["canvas"] == 160 and cfg["crop"] == 128 and cfg["radius_px"] == 2
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert len(so.config_hash(str(cfg_path))) == 16


def test_bad_input_raises():
    with pytest.raises(so.SpineOneError):
        so.encode_targets([(10.0, 10.0, 7)], radius_px=6, num_classes=2, height=64, width=64)
