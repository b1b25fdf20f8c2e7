import json
import math

import numpy as np
import pytest

import camadapt as ca


def test_zero_gate_is_identity():
    p = ca.lai_init(8, 2, seed=3)
    p.s = 0.0
    z = np.linspace(-1.0, 1.0, 8)
    assert np.array_equal(ca.forward(p, z), z)


def test_param_count():
    assert ca.param_count(768, 64) == 2 * 64 * 768 + 64 * 64 + 1
    assert ca.wide_bottleneck(8, 4)
    assert not ca.wide_bottleneck(768, 64)


def test_lai_shapes_and_scale_range():
    p = ca.lai_init(32, 8, seed=11)
    assert p.w_down.shape == (8, 32)
    assert p.w_mid.shape == (8, 8)
    assert p.w_up.shape == (32, 8)
    assert 0.075 <= p.s <= 0.225


def test_lai_rejects_bad_ordering():
    with pytest.raises(ca.ConfigError):
        ca.lai_init(8, 2, sigma_down=0.01, sigma_mid=0.02)


def test_cross_entropy_example():
    loss, grad = ca.cross_entropy(np.array([2.0, 0.0]), 0)
    assert loss == pytest.approx(math.log(1.0 + math.exp(-2.0)), abs=1e-12)
    assert grad.sum() == pytest.approx(0.0, abs=1e-15)


def test_tta_symmetric_views():
    out = ca.tta_aggregate([np.array([2.0, 0.0]), np.array([0.0, 2.0])], tau=1.0)
    assert out == pytest.approx([0.5, 0.5], abs=1e-9)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    p = ca.AdapterParams(rng.normal(size=(2, 5)), rng.normal(size=(2, 2)), rng.normal(size=(5, 2)), 0.7)
    z = rng.normal(size=5)
    dy = rng.normal(size=5)
    g = ca.backward(p, z, dy)
    h = 1e-6
    for i in range(5):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        num = (dy @ ca.forward(p, zp) - dy @ ca.forward(p, zm)) / (2 * h)
        assert g["z"][i] == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_metrics_on_perfect_prediction():
    gt = np.zeros((6, 6))
    gt[1:4, 2:5] = 1.0
    m = ca.segmentation_metrics(gt, gt)
    assert m["iou"] == 1.0
    assert m["mae"] == 0.0
    assert m["sm"] == pytest.approx(1.0)
    assert m["em"] == pytest.approx(1.0)
    assert m["wfm"] == pytest.approx(1.0)


def test_class_aware_gating():
    gt = np.zeros((4, 4))
    gt[0:2, 0:2] = 1.0
    sample = {"id": "a", "pred": gt, "gt": gt, "pred_class": "x", "true_class": "y"}
    r = ca.class_aware_report([sample])
    assert r["iou"] == 0.0 and r["mae"] == 1.0
    r = ca.class_aware_report([sample], gated=False)
    assert r["iou"] == 1.0


def test_pgm_round_trip(tmp_path):
    mask = np.array([[0.0, 1.0], [128 / 255, 64 / 255]])
    data = ca.encode_pgm(mask)
    assert data.startswith(b"P5\n2 2\n255\n")
    assert np.array_equal(ca.parse_pgm(data), mask)
    path = str(tmp_path / "m.pgm")
    ca.save_mask(path, mask)
    assert np.array_equal(ca.load_gt_mask(path), np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_synth_train_classify(tmp_path):
    info = ca.synth_generate(str(tmp_path), seed=0)
    assert info["baseline_test_accuracy"] <= 0.70
    prompts = ca.load_prompts(str(tmp_path / "prompts.jsonl"))
    train = ca.load_embeddings(str(tmp_path / "train.jsonl"))
    test = ca.load_embeddings(str(tmp_path / "test.jsonl"))
    assert len(prompts) == 5 and prompts.dim == 32

    p0 = ca.lai_init(32, 8, sigma_down=0.4, sigma_mid=0.2, sigma_up=0.1, seed=0)
    params, history = ca.train(p0, prompts, train, seed=0)
    assert len(history) == 10
    assert history[-1]["mean_loss"] < history[0]["mean_loss"]

    base = ca.evaluate_accuracy(ca.AdapterParams.zeros(32, 8), prompts, test, condition="gt_mask")
    tuned = ca.evaluate_accuracy(params, prompts, test, condition="gt_mask")
    assert tuned["accuracy"] > base["accuracy"]

    ckpt = str(tmp_path / "a.adapter.json")
    ca.save_checkpoint(ckpt, params)
    assert ca.load_checkpoint(ckpt) == params


def test_loader_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": "a", "class": "c", "condition": "gt_mask", "view": 0,
                               "embedding": [0.5, 0.5]}) + "\n")
    with pytest.raises(ca.DataError):
        ca.load_embeddings(str(bad))
    with pytest.raises(ca.IoError):
        ca.load_prompts(str(tmp_path / "missing.jsonl"))


def test_cli_in_process(tmp_path):
    code, out, _ = ca.run_cli(["synth", "--out", str(tmp_path / "s"), "--seed", "1"])
    assert code == 0 and "baseline" in out
    code, _, _ = ca.run_cli(["no-such-command"])
    assert code == 2
    code, _, _ = ca.run_cli(["seg-eval", "--manifest", str(tmp_path / "missing.json")])
    assert code == 3
