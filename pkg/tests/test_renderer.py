"""Rendering checks: white furnace, linearity, tonemap, determinism."""

import math

import numpy as np
import pytest

from matlight import autodiff as ad
from matlight.fields import ConstantBrdfField, PixelEnvMap
from matlight.renderer import (
    RenderError,
    SurfacePoint,
    TonemapParams,
    render_batch,
    render_point,
    render_view,
    tonemap,
    tonemap_np,
)


def constant_light(value=1.0):
    return PixelEnvMap(init_value=value)


def up_point():
    return SurfacePoint(x=(0.1, -0.2, 0.0), n=(0, 0, 1), omega_o=(0, 0.6, 0.8))


class _NanLight:
    def radiance(self, x, dirs):
        out = np.ones((dirs.shape[0], 3), dtype=np.float32)
        out[3, 1] = np.nan
        return out


def test_white_furnace_reproduces_albedo():
    """Lambertian BRDF under unit constant light integrates back to the albedo."""
    albedo = np.array([0.23, 0.55, 0.81])
    field = ConstantBrdfField(albedo, roughness=1.0, metallic=0.0)
    for count, tol in ((128, 0.01), (256, 0.005)):
        out = render_point(up_point(), constant_light(1.0), field, count=count, diffuse_only=True)
        np.testing.assert_allclose(out, albedo, rtol=tol)


def test_zero_lighting_renders_black():
    field = ConstantBrdfField((0.5, 0.5, 0.5), roughness=0.4, metallic=0.3)
    out = render_point(up_point(), constant_light(0.0), field, count=64)
    np.testing.assert_array_equal(out, np.zeros(3))


def test_lighting_scale_linearity():
    field = ConstantBrdfField((0.4, 0.6, 0.2), roughness=0.5, metallic=0.2)
    base = render_point(up_point(), constant_light(1.0), field, count=64)
    scaled = render_point(up_point(), constant_light(3.0), field, count=64)
    np.testing.assert_allclose(scaled, 3.0 * base, rtol=1e-5)


def test_pointwise_larger_lighting_never_darkens(rng):
    field = ConstantBrdfField((0.4, 0.6, 0.2), roughness=0.5, metallic=0.2)
    lo_env = PixelEnvMap()
    hi_env = PixelEnvMap()
    base = rng.random((lo_env.HEIGHT, lo_env.WIDTH, 3)).astype(np.float32)
    lo_env.grid.data = base
    hi_env.grid.data = base + rng.random(base.shape).astype(np.float32)
    lo = render_point(up_point(), lo_env, field, count=128)
    hi = render_point(up_point(), hi_env, field, count=128)
    assert np.all(hi >= lo - 1e-6)


class _SmoothLight:
    """Analytic, infinitely differentiable directional radiance for quadrature tests."""

    def radiance(self, x, dirs):
        lobe = 1.0 + 0.6 * np.sin(2.0 * dirs[:, 0]) * np.cos(dirs[:, 1]) + 0.3 * dirs[:, 2]
        return np.stack([lobe, 0.5 + 0.5 * lobe, np.full_like(lobe, 0.8)], axis=1)


def test_self_convergence_with_sample_count(rng):
    """Quadrature error against a 4096-sample reference shrinks as counts double."""
    field = ConstantBrdfField((0.7, 0.5, 0.3), roughness=0.5, metallic=0.4)
    pt = up_point()
    ref = render_point(pt, _SmoothLight(), field, count=4096)
    errs = [np.abs(render_point(pt, _SmoothLight(), field, count=c) - ref).max()
            for c in (64, 128, 256)]
    assert errs[0] > errs[1] > errs[2]


def test_render_point_fibonacci_is_pure():
    env = PixelEnvMap(init_value=0.8)
    field = ConstantBrdfField((0.3, 0.3, 0.9), roughness=0.3, metallic=0.6)
    a = render_point(up_point(), env, field, count=128)
    b = render_point(up_point(), env, field, count=128)
    assert a.tobytes() == b.tobytes()


def test_render_batch_random_sampler_needs_seed(rng):
    field = ConstantBrdfField((0.5, 0.5, 0.5), 0.5, 0.0)
    x = np.zeros((2, 3), dtype=np.float32)
    n = np.tile([0, 0, 1.0], (2, 1)).astype(np.float32)
    wo = np.tile([0, 0, 1.0], (2, 1)).astype(np.float32)
    with pytest.raises(ValueError, match="rng_seed"):
        render_batch(x, n, wo, field.eval(x), constant_light(), 8, sampler_kind="random")
    out1 = render_batch(x, n, wo, field.eval(x), constant_light(), 8, sampler_kind="random", rng_seed=5)
    out2 = render_batch(x, n, wo, field.eval(x), constant_light(), 8, sampler_kind="random", rng_seed=5)
    np.testing.assert_array_equal(ad.value(out1), ad.value(out2))


def test_render_batch_rejects_nonfinite_lighting():
    field = ConstantBrdfField((0.5, 0.5, 0.5), 0.5, 0.0)
    x = np.zeros((2, 3), dtype=np.float32)
    n = np.tile([0, 0, 1.0], (2, 1)).astype(np.float32)
    with pytest.raises(RenderError, match="non-finite lighting"):
        render_batch(x, n, n, field.eval(x), _NanLight(), 4)


def test_tonemap_values():
    tm = TonemapParams(1.0)
    hdr = np.array([0.25, 0.5, 1.0], dtype=np.float32)
    np.testing.assert_allclose(ad.value(tonemap(hdr, tm)), hdr, rtol=1e-6)

    tm_any = TonemapParams(3.7)
    np.testing.assert_allclose(ad.value(tonemap(np.ones(3, dtype=np.float32), tm_any)), 1.0, rtol=1e-6)

    tm22 = TonemapParams(1 / 2.2)
    got = ad.value(tonemap(np.full(3, 0.5, dtype=np.float32), tm22))
    np.testing.assert_allclose(got, 0.5 ** (1 / 2.2), rtol=1e-5)  # scalar power oracle


def test_tonemap_monotone_and_bounded(rng):
    for gamma in (0.4, 1.0, 2.4):
        tm = TonemapParams(gamma)
        x = np.sort(rng.random(32).astype(np.float32))
        y = ad.value(tonemap(x, tm))
        assert np.all(np.diff(y) >= -1e-7)
        assert np.all((y >= 0) & (y <= 1))
        np.testing.assert_allclose(tonemap_np(x, gamma), y, atol=1e-7)


def test_tonemap_gradients(rng):
    tm = TonemapParams(0.7, dtype=np.float64)
    hdr = ad.parameter(rng.uniform(0.05, 0.9, (4, 3)))
    out = ad.sum_(tonemap(hdr, tm))
    ad.backward(out)
    h = 1e-6

    def val(g=None, arr=None):
        t2 = TonemapParams(math.e ** g if g is not None else tm.gamma, dtype=np.float64)
        a = arr if arr is not None else hdr.data
        return float(np.sum(ad.value(tonemap(a, t2))))

    g0 = float(tm.log_gamma.data[0])
    fd_g = (val(g=g0 + h) - val(g=g0 - h)) / (2 * h)
    assert tm.log_gamma.grad[0] == pytest.approx(fd_g, rel=1e-5)

    ap = hdr.data.copy()
    ap[1, 2] += h
    am = hdr.data.copy()
    am[1, 2] -= h
    fd_a = (val(arr=ap) - val(arr=am)) / (2 * h)
    assert hdr.grad[1, 2] == pytest.approx(fd_a, rel=1e-5)


def test_surface_point_validation():
    with pytest.raises(ValueError, match="unit length"):
        SurfacePoint(x=(0, 0, 0), n=(0, 0, 2), omega_o=(0, 0, 1))
    with pytest.raises(ValueError, match="back-facing"):
        SurfacePoint(x=(0, 0, 0), n=(0, 0, 1), omega_o=(0, 0.6, -0.8))


def test_render_view_deterministic_and_fills_background(tiny_scene):
    field = ConstantBrdfField((0.5, 0.4, 0.3), 0.9, 0.0)
    env = constant_light(1.0)
    a = render_view(tiny_scene, tiny_scene.test_ids[0], field, env, count=16)
    b = render_view(tiny_scene, tiny_scene.test_ids[0], field, env, count=16)
    assert a.tobytes() == b.tobytes()
    view = tiny_scene.view(tiny_scene.test_ids[0])
    assert np.all(a[~view.usable_mask()] == 0.0)
    assert np.any(a[view.usable_mask()] > 0.0)


def test_render_view_unknown_view(tiny_scene):
    field = ConstantBrdfField((0.5, 0.4, 0.3), 0.9, 0.0)
    with pytest.raises(KeyError):
        render_view(tiny_scene, 999, field, constant_light(), count=8)
