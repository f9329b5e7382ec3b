import math

import numpy as np
import pytest

import tactile


def test_plant_wrench_is_finite_and_mirrors():
    w = np.asarray(tactile.plant_wrench(tactile.ContactPose(3.0, 2.0, 0.4)))
    m = np.asarray(tactile.plant_wrench(tactile.ContactPose(3.0, -2.0, -0.4)))
    assert w.shape == (6,)
    assert np.all(np.isfinite(w))
    assert abs(w[2]) > 0.1
    assert np.allclose(np.abs(w), np.abs(m), rtol=1e-9, atol=1e-9)


def test_no_contact_gives_zero_wrench():
    w = np.asarray(tactile.plant_wrench(tactile.ContactPose(0.0, 0.0, 0.0)))
    assert np.all(np.abs(w) < 1e-12)


def test_pose_out_of_range():
    with pytest.raises(tactile.DomainError):
        tactile.plant_wrench(tactile.ContactPose(6.0, 0.0, 0.0))


def test_observe_is_thresholded_and_deterministic():
    pose = tactile.ContactPose(2.0, 1.0, 0.3)
    a = tactile.observe(pose, seed=7, image_size=32)
    b = tactile.observe(pose, seed=7, image_size=32)
    assert a.shape == (32, 32)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
    background = a[a < 0.5]
    assert np.all(background == 0.0)


def test_kl_matches_closed_form():
    rng = np.random.default_rng(3)
    mu = rng.normal(size=5)
    lv = rng.normal(size=5)
    expect = 0.5 * np.sum(mu**2 + np.exp(lv) - 1 - lv)
    assert tactile.kl_diag_gaussian(mu.tolist(), lv.tolist()) == pytest.approx(expect, rel=1e-12)
    assert tactile.kl_diag_gaussian([0.0] * 4, [0.0] * 4) == 0.0
    z = tactile.reparameterize([1.0], [math.log(4.0)], [0.5])
    assert z[0] == pytest.approx(2.0)


def test_r2():
    assert tactile.r2([1, 2, 3], [1, 2, 3]) == 1.0
    assert tactile.r2([2, 2, 2], [1, 2, 3]) == pytest.approx(0.0)


def test_plant_force_and_projection():
    assert tactile.plant_force(10.0) == 0.0
    assert tactile.plant_force(23.5) == pytest.approx(1.25)
    with pytest.raises(tactile.RangeError):
        tactile.plant_force(36.0)
    assert tactile.project_grip_force([0, 2.0, 0, 5, 5, 5]) == pytest.approx(2.0)
    assert tactile.project_grip_force([2.0, 0, 0, 0, 0, 0], math.pi / 2) == pytest.approx(2.0)


def test_tracking_settles():
    tr = tactile.track([0.4, 1.6, 3.0])
    assert len(tr["t"]) == 360
    assert all(s is not None and s <= 10 for s in tr["ticks_to_settle"])
    assert abs(tr["f_estimate"][-1] - 3.0) <= 0.05


def test_contraction():
    r = tactile.verify_contraction(20, 5)
    assert r["pass_rate"] == 1.0
    assert r["eligible"] > 0
    assert not r["boundary_equal_converged"]
    assert not r["boundary_below_converged"]


def test_dataset_train_and_model(tmp_path):
    data = tmp_path / "data"
    assert tactile.generate_dataset(40, 2, str(data), image_size=64) == 40
    images, wrenches = tactile.load_split(str(data), "train")
    assert images.shape == (28, 64, 64)
    assert wrenches.shape == (28, 6)
    ckpt = tmp_path / "m.ckpt"
    history = tactile.train(str(data), str(ckpt), epochs=1, latent=6)
    assert len(history) == 1 and math.isfinite(history[0])
    model = tactile.Model(str(ckpt))
    assert model.latent_dim == 6
    mu, logvar = model.encode(images[0])
    assert mu.shape == (6,) and logvar.shape == (6,)
    assert np.asarray(model.predict(images[0])).shape == (6,)
    assert model.decode(mu).shape == (64, 64)
    report = model.evaluate(str(data), "test")
    assert report["count"] == 8
    with pytest.raises(tactile.ShapeError):
        model.encode(np.zeros((8, 8), dtype=np.float32))
    with pytest.raises(tactile.IoError):
        tactile.Model(str(tmp_path / "missing.ckpt"))
