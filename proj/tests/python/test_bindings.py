import json
import math

import numpy as np
import pytest

import bbkd


def test_schedule_values():
    s = bbkd.make_schedule(4)
    assert s.T == 4
    assert s.k == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert s.var == pytest.approx([0.0, 0.375, 0.5, 0.375, 0.0])


def test_forward_sample_endpoints():
    s = bbkd.make_schedule(10)
    rng = np.random.default_rng(0)
    p0, q, z = (rng.standard_normal((1, 1, 8, 8)) for _ in range(3))
    np.testing.assert_array_equal(bbkd.forward_sample(p0, q, 0, s, z), p0)
    np.testing.assert_array_equal(bbkd.forward_sample(p0, q, 10, s, z), q)


def test_transition_at_last_step_is_condition():
    a, b, var = bbkd.transition_coeffs(bbkd.make_schedule(6), 6, 5)
    assert (a, b, var) == pytest.approx((0.0, 1.0, 0.0))


def test_posterior_example():
    s = bbkd.make_schedule(4)
    mean, var = bbkd.posterior_params(np.array([1.0]), np.array([0.0]), np.array([1.0]), 2, s)
    assert mean[0] == pytest.approx(0.5)
    assert var == pytest.approx(0.25)


def test_sample_translation_with_python_predictor():
    s = bbkd.make_schedule(6)
    q = np.full((1, 1, 4, 4), 0.3)
    seen = []

    def predict(p, t):
        seen.append(t)
        return np.zeros_like(p)

    out = bbkd.sample_translation(q, predict, s, seed=1, stride=2)
    assert out.shape == q.shape
    assert seen == [6, 4, 2]
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_phantom_and_degradation():
    pct = bbkd.generate_phantom(3, 32)
    assert pct.shape == (1, 32, 32)
    assert pct.min() >= 0.0 and pct.max() <= 1.0
    cbct = bbkd.degrade_to_cbct(pct, seed=3)
    assert cbct.shape == pct.shape
    assert not np.array_equal(cbct, pct)
    norm = bbkd.normalize_intensity(pct)
    assert norm.min() >= -1.0 and norm.max() <= 1.0


def test_radon_fbp_shapes():
    img = bbkd.generate_phantom(1, 32)
    angles = bbkd.equally_spaced_angles(45)
    sino = bbkd.radon_transform(img, angles)
    assert sino.shape[0] == 45
    rec = bbkd.fbp_reconstruct(sino, angles, 32)
    assert rec.shape == (1, 32, 32)


def test_metrics():
    a = np.zeros((16, 16))
    b = np.full((16, 16), 0.1)
    assert bbkd.mse(a, b) == pytest.approx(0.01)
    assert bbkd.psnr(a, b) == pytest.approx(20.0)
    assert math.isinf(bbkd.psnr(a, a))
    assert bbkd.ssim(b, b) == pytest.approx(1.0)


def test_denoiser_identity_at_init_and_checkpoint(tmp_path):
    params = bbkd.init_params(seed=4, base_channels=4, num_blocks=1, time_embed_dim=4)
    assert bbkd.parameter_count(params) == sum(v.size for v in params.values())
    x = np.random.default_rng(2).uniform(-1, 1, (1, 8, 8))
    np.testing.assert_allclose(bbkd.predict_x0(params, x, 3), x, atol=1e-12)
    path = tmp_path / "m.bbkd"
    bbkd.save_checkpoint(params, path)
    back = bbkd.load_checkpoint(path)
    assert back.keys() == params.keys()
    for k in params:
        np.testing.assert_array_equal(back[k], params[k])


def test_default_parameter_count():
    assert bbkd.parameter_count(bbkd.init_params()) == 78817


def test_imgf_round_trip(tmp_path):
    img = np.linspace(-1, 1, 48).reshape(1, 6, 8)
    bbkd.write_imgf(img, tmp_path / "x.imgf")
    np.testing.assert_allclose(bbkd.read_imgf(tmp_path / "x.imgf"), img, atol=1e-7)


def test_errors_map_to_bbkd_error(tmp_path):
    bad = tmp_path / "bad.bbkd"
    bad.write_bytes(b"nope")
    with pytest.raises(bbkd.BbkdError, match="format: .*not a BBKD1 checkpoint"):
        bbkd.load_checkpoint(bad)
    with pytest.raises(bbkd.BbkdError, match="T must be >= 2"):
        bbkd.make_schedule(1)


def test_build_dataset(tmp_path):
    manifest = bbkd.build_dataset(2, 3, 1, 16, 9, tmp_path)
    data = json.loads(manifest.read_text())
    assert len(data["items"]) == 6


def test_run_pipeline_tiny(tmp_path):
    cfg = {
        "image_size": 16, "T": 4, "n_paired": 2, "n_unpaired": 2, "n_test": 2, "seed": 3,
        "teacher": {"train_steps": 2, "batch_size": 2, "denoiser": {"base_channels": 4, "num_blocks": 1, "time_embed_dim": 4}},
        "student": {"train_steps": 2, "batch_size": 2},
    }
    rows = bbkd.run_pipeline(json.dumps(cfg), tmp_path)
    assert [r["model"] for r in rows] == ["Input", "Teacher", "Student"]
    assert (tmp_path / "report.json").exists()
