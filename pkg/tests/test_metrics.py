"""PSNR, evaluation reports, material export and light probes."""

import json
import math
import os

import numpy as np
import pytest

from matlight import autodiff as ad
from matlight.brdf import R_MIN
from matlight.envmap import direction_grid
from matlight.fields import DirectionalLightField, PixelEnvMap
from matlight.metrics import (
    EvalReport,
    PSNR_CAP,
    evaluate,
    export_brdf_maps,
    material_maps,
    mae,
    mse,
    probe_light,
    psnr,
    write_report,
)
from matlight.trainer import build_models, TrainConfig
from matlight.imageio import read_pfm
from tests.conftest import TINY_BRDF_CFG, TINY_LIGHT_CFG


def test_psnr_identical_hits_cap(rng):
    img = rng.random((8, 8, 3))
    assert psnr(img, img.copy()) == PSNR_CAP


def test_psnr_uniform_errors():
    a = np.full((4, 4, 3), 0.5)
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert psnr(a, a + 0.01) == pytest.approx(40.0, abs=1e-6)


def test_psnr_symmetric_and_monotone(rng):
    a = rng.random((6, 6, 3))
    b = rng.random((6, 6, 3))
    assert psnr(a, b) == pytest.approx(psnr(b, a), rel=1e-12)
    base = psnr(a, np.clip(a + 0.02, 0, 1), clamp=False)
    worse = psnr(a, np.clip(a + 0.05, 0, 1), clamp=False)
    assert worse < base


def test_psnr_empty_mask_errors(rng):
    a = rng.random((4, 4, 3))
    with pytest.raises(ValueError, match="empty mask"):
        psnr(a, a, mask=np.zeros((4, 4), dtype=bool))


def test_psnr_masking(rng):
    a = rng.random((4, 4, 3))
    b = a.copy()
    b[0, 0] = 1000.0  # corrupt a background pixel
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = False
    assert psnr(a, b, mask=mask) == PSNR_CAP


def test_mse_shape_mismatch(rng):
    with pytest.raises(ValueError, match="shape mismatch"):
        mse(rng.random((2, 2)), rng.random((3, 2)))


def test_mae():
    assert mae(np.zeros(4), np.full(4, 0.25)) == pytest.approx(0.25)


def test_evaluate_produces_report(tiny_scene):
    cfg = TrainConfig(total_iters=10, batch_size=8, train_samples=4, eval_samples=4,
                      decay_iters=(4, 8))
    models = build_models(cfg, TINY_BRDF_CFG, TINY_LIGHT_CFG, "hdr")
    report = evaluate(tiny_scene, models.brdf_field, models.lighting, models.tonemap_params,
                      eval_samples=8)
    assert [v.view_id for v in report.views] == tiny_scene.test_ids
    v = report.views[0]
    assert math.isfinite(v.psnr_render) and v.mse_unclamped >= 0
    assert v.psnr_base_color is not None  # tiny scene ships ground-truth maps
    assert report.mean_psnr_render == pytest.approx(v.psnr_render)
    text = report.to_text()
    assert "mean rendering PSNR" in text


def test_report_json_round_trip(tmp_path, tiny_scene):
    cfg = TrainConfig(total_iters=10, batch_size=8, train_samples=4, eval_samples=4,
                      decay_iters=(4, 8))
    models = build_models(cfg, TINY_BRDF_CFG, TINY_LIGHT_CFG, "hdr")
    report = evaluate(tiny_scene, models.brdf_field, models.lighting, models.tonemap_params,
                      eval_samples=4)
    path = tmp_path / "report.json"
    write_report(report, path)
    loaded = json.load(open(path))
    assert loaded["mean"]["psnr_render"] == pytest.approx(report.mean_psnr_render)
    assert len(loaded["views"]) == 1


def test_evaluate_without_gt_maps(tiny_scene):
    view = tiny_scene.view(tiny_scene.test_ids[0])
    saved = view.gt_base_color
    view.gt_base_color = None
    try:
        cfg = TrainConfig(total_iters=10, batch_size=8, train_samples=4, eval_samples=4,
                          decay_iters=(4, 8))
        models = build_models(cfg, TINY_BRDF_CFG, TINY_LIGHT_CFG, "hdr")
        report = evaluate(tiny_scene, models.brdf_field, models.lighting,
                          models.tonemap_params, eval_samples=4)
        assert report.views[0].psnr_base_color is None
        assert report.to_dict()["mean"]["psnr_base_color"] is None
    finally:
        view.gt_base_color = saved


def test_export_maps_ranges_and_background(tmp_path, tiny_scene):
    cfg = TrainConfig(total_iters=10, batch_size=8, train_samples=4, eval_samples=4,
                      decay_iters=(4, 8))
    models = build_models(cfg, TINY_BRDF_CFG, TINY_LIGHT_CFG, "hdr")
    out = export_brdf_maps(tiny_scene, models.brdf_field, tiny_scene.test_ids, str(tmp_path))
    assert len(out) == 1
    base = read_pfm(os.path.join(out[0], "basecolor.pfm"))
    rough = read_pfm(os.path.join(out[0], "roughness.pfm"))
    metal = read_pfm(os.path.join(out[0], "metallic.pfm"))
    view = tiny_scene.view(tiny_scene.test_ids[0])
    fg = view.mask
    assert np.all((base[fg] >= 0) & (base[fg] <= 1))
    assert np.all((rough[fg] >= R_MIN) & (rough[fg] <= 1))
    assert np.all((metal[fg] >= 0) & (metal[fg] <= 1))
    assert np.all(base[~fg] == 0)


def test_probe_is_position_independent_for_directional_field(rng):
    field = DirectionalLightField(TINY_LIGHT_CFG, rng)
    a = probe_light(field, (0.0, 0.0, 0.0), resolution=16)
    b = probe_light(field, (5.0, -3.0, 1.0), resolution=16)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (8, 16, 3)


def test_probe_pix_env_reproduces_grid(rng):
    env = PixelEnvMap()
    grid = rng.random((env.HEIGHT, env.WIDTH, 3)).astype(np.float32)
    env.grid.data = grid.copy()
    probe = probe_light(env, (0, 0, 0), resolution=env.WIDTH)
    np.testing.assert_allclose(probe, grid, atol=1e-6)


def test_probe_matches_direct_field_eval(rng):
    field = DirectionalLightField(TINY_LIGHT_CFG, rng)
    probe = probe_light(field, (0, 0, 0), resolution=8)
    dirs = direction_grid(8, 4).reshape(-1, 3).astype(np.float32)
    direct = ad.value(field.radiance(None, dirs)).reshape(4, 8, 3)
    np.testing.assert_allclose(probe, direct, atol=1e-7)
