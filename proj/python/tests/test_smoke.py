import math

import numpy as np
import pytest

import splatcull as sc


@pytest.fixture(scope="module")
def shell():
    return sc.make_shell(2000, thickness=0.08, seed=3)


def front_camera(distance, size=64):
    return sc.Camera.look_at([0, 0, distance], [0, 0, 0], [0, 1, 0], math.pi / 3, size, size)


def test_shell_geometry(shell):
    arrays = shell.arrays()
    radii = np.linalg.norm(arrays["means"], axis=1)
    assert len(shell) == 2000
    np.testing.assert_allclose(radii, 1.0, atol=1e-5)
    assert 0 < shell.d_near < shell.d_far


def test_render_transmittance_and_counts(shell):
    out = sc.render(shell, front_camera(3.0), record_contributions=True, threads=1)
    assert out.image.shape == (64, 64, 3)
    assert out.transmittance.shape == (64, 64)
    assert np.all((out.transmittance >= 0) & (out.transmittance <= 1))
    used = int(np.count_nonzero(out.contribution_max > 0))
    assert used == out.used_count <= out.passed_count <= len(shell)


def test_image_metrics():
    rng = np.random.default_rng(0)
    a = rng.random((32, 32, 3), dtype=np.float32)
    assert sc.psnr(a, a) == pytest.approx(99.0)
    assert sc.ssim(a, a) == pytest.approx(1.0)
    b = np.clip(a + 0.1, 0, 1).astype(np.float32)
    assert sc.psnr(a, b) < 25


def test_ply_round_trip(tmp_path, shell):
    path = tmp_path / "shell.ply"
    sc.save_ply(shell, path)
    back = sc.load_ply(path)
    assert back.hash() == shell.hash()
    with pytest.raises(ValueError):
        sc.load_ply(tmp_path / "missing.ply")


def test_corrected_distance():
    assert sc.corrected_distance(10.0, 2.0, 1.0, 4.0) == pytest.approx(5.0)


def test_gradients():
    assert sc.grad_check(seed=2) < 1e-4


def test_extract_train_and_cull(tmp_path):
    asset = sc.make_shell(800, thickness=0.1, seed=4)
    cfg = sc.SamplingConfig()
    cfg.n_directions = 32
    cfg.n_distances = 2
    cfg.n_aux_views = 2
    cfg.image_size = 64
    data = sc.extract_dataset(asset, cfg, threads=1)
    assert data.n_views == 64
    assert data.labels(0).shape == (800,)
    assert 0 < data.positive_count() < 64 * 800

    tcfg = sc.TrainConfig()
    tcfg.iterations = 100
    tcfg.batch_size = 1024
    model = sc.train(data, asset, tcfg)
    assert model.asset_hash == asset.hash()
    sc.save_model(model, tmp_path / "a.vismlp")
    assert sc.load_model(tmp_path / "a.vismlp").final_loss == model.final_loss

    stats = sc.orbit_eval(asset, model, views=4, distance=2 * asset.d_near, image_size=64)
    assert stats["views"] == 4
    assert 0.0 <= stats["recall"] <= 1.0
