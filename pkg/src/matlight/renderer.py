"""Discretized hemisphere rendering and the learnable HDR-to-LDR mapping.

The outgoing radiance at a surface point is the fixed-weight sum

    L_o(w_o, x) = (2 pi / |S|) * sum_s f(w_o, w_s, x) L(w_s, x) (w_s . n)

over a Fibonacci (or, for the ablation, seeded-random) direction set above
the normal. The same batched path serves training (autodiff Tensors) and
inference (plain arrays).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import hemisphere
from .brdf import HALF_VECTOR_EPS, eval_brdf_batch

SAMPLER_KINDS = ("fibonacci", "random")
HDR_FLOOR = 1e-6  # keeps the gamma gradient finite at zero radiance


class RenderError(RuntimeError):
    """Non-finite radiance or BRDF value encountered while rendering."""


@dataclass(frozen=True)
class SurfacePoint:
    """A shading location: position, unit normal, unit view direction, source pixel."""

    x: np.ndarray
    n: np.ndarray
    omega_o: np.ndarray
    pixel: tuple = (0, 0, 0)  # (view id, row, col)

    def __post_init__(self):
        for name in ("x", "n", "omega_o"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        for name in ("n", "omega_o"):
            v = getattr(self, name)
            if abs(np.linalg.norm(v) - 1.0) > 1e-6:
                raise ValueError(f"{name} must be unit length")
        if float(np.dot(self.n, self.omega_o)) <= 0.0:
            raise ValueError("back-facing point: n . omega_o must be positive")


class TonemapParams:
    """Learnable gamma, parameterized as log(gamma) so gamma stays positive."""

    def __init__(self, gamma: float = 1.0, dtype=np.float32):
        self.log_gamma = ad.parameter(np.array([math.log(gamma)], dtype=dtype))

    @property
    def gamma(self) -> float:
        return float(np.exp(self.log_gamma.data[0]))

    def named_parameters(self):
        return {"tonemap.log_gamma": self.log_gamma}

    def astype(self, dtype):
        self.log_gamma.data = self.log_gamma.data.astype(dtype)
        return self


def tonemap(hdr, tm: TonemapParams):
    """LDR = clamp(HDR^gamma, 0, 1), differentiable in HDR and log_gamma."""
    gamma = ad.exp(tm.log_gamma)
    safe = ad.maximum(hdr, HDR_FLOOR)
    return ad.clip(ad.exp(gamma * ad.log(safe)), 0.0, 1.0)


def tonemap_np(hdr: np.ndarray, gamma: float) -> np.ndarray:
    """Inference-path tonemap; same arithmetic as :func:`tonemap`."""
    safe = np.maximum(hdr, np.asarray(HDR_FLOOR, dtype=hdr.dtype))
    return np.clip(np.exp(hdr.dtype.type(gamma) * np.log(safe)), 0.0, 1.0)


def shading_dots(n: np.ndarray, omega_o: np.ndarray, dirs: np.ndarray):
    """Constant geometry terms for a batch: cosines, half-vector dots, masks."""
    dt = dirs.dtype
    i_n = np.einsum("bsc,bc->bs", dirs, n)
    o_n = np.sum(omega_o * n, axis=1, keepdims=True).astype(dt)
    h_raw = dirs + omega_o[:, None, :]
    h_len = np.linalg.norm(h_raw, axis=2)
    degenerate = h_len <= HALF_VECTOR_EPS
    h = h_raw / np.maximum(h_len, HALF_VECTOR_EPS)[:, :, None]
    h_n = np.clip(np.einsum("bsc,bc->bs", h, n), -1.0, 1.0).astype(dt)
    o_h = np.clip(np.einsum("bsc,bc->bs", h, omega_o), 0.0, 1.0).astype(dt)
    spec_mask = (~degenerate).astype(dt)
    return {"i_n": i_n.astype(dt), "o_n": o_n, "h_n": h_n, "o_h": o_h, "spec_mask": spec_mask}


def sample_directions(sampler_kind: str, count: int, normals: np.ndarray, rng_seed=None):
    if sampler_kind == "fibonacci":
        return hemisphere.fibonacci_directions_batch(count, normals)
    if sampler_kind == "random":
        if rng_seed is None:
            raise ValueError("random sampler needs an rng_seed")
        return hemisphere.random_directions_batch(count, normals, rng_seed)
    raise ValueError(f"unknown sampler {sampler_kind!r}, expected one of {SAMPLER_KINDS}")


def _fail_on_nonfinite(arr: np.ndarray, what: str):
    if np.all(np.isfinite(arr)):
        return
    flat = np.argwhere(~np.isfinite(arr.reshape(arr.shape[0], -1)))
    point, offset = int(flat[0, 0]), int(flat[0, 1])
    raise RenderError(f"non-finite {what} at batch point {point} (flat sample offset {offset})")


def render_batch(x: np.ndarray, n: np.ndarray, omega_o: np.ndarray, material, lighting,
                 count: int, sampler_kind: str = "fibonacci", rng_seed=None,
                 fresnel_form: str = "printed", diffuse_only: bool = False):
    """Outgoing HDR radiance for a batch of surface points, shape (B, 3).

    ``material`` is the (b, r, m) triple from the material field (Tensors
    during training, arrays at inference); ``lighting`` is any of the light
    models (``.radiance(x, dirs)``).
    """
    if count < 1:
        raise ValueError("sample count must be >= 1")
    b, r, m = material
    batch = x.shape[0]
    dirs = sample_directions(sampler_kind, count, n, rng_seed)
    dots = shading_dots(n, omega_o, dirs)

    x_rep = np.repeat(x, count, axis=0)
    radiance = lighting.radiance(x_rep, dirs.reshape(-1, 3))
    _fail_on_nonfinite(ad.value(radiance), "lighting radiance")
    radiance = ad.reshape(radiance, (batch, count, 3))

    f = eval_brdf_batch(b, r, m, dots["i_n"], dots["o_n"], dots["h_n"], dots["o_h"],
                        dots["spec_mask"], fresnel_form=fresnel_form, diffuse_only=diffuse_only)
    _fail_on_nonfinite(ad.value(f), "BRDF value")

    weight = ((2.0 * math.pi / count) * dots["i_n"])[:, :, None]
    return ad.sum_(f * radiance * weight, axis=1)


def render_point(point: SurfacePoint, lighting, brdf_field, sampler_kind: str = "fibonacci",
                 count: int = 128, rng_seed=None, fresnel_form: str = "printed",
                 diffuse_only: bool = False) -> np.ndarray:
    """Single-point form of :func:`render_batch` using a material field."""
    x = point.x[None, :].astype(np.float32)
    n = point.n[None, :].astype(np.float32)
    wo = point.omega_o[None, :].astype(np.float32)
    material = brdf_field.eval(x)
    out = render_batch(x, n, wo, material, lighting, count, sampler_kind=sampler_kind,
                       rng_seed=rng_seed, fresnel_form=fresnel_form, diffuse_only=diffuse_only)
    return ad.value(out)[0]


def render_view(scene, view_id: int, brdf_field, lighting, tonemap_params=None,
                count: int = 256, chunk: int = 2048, fresnel_form: str = "printed"):
    """Render one view's foreground pixels; background is filled with zeros.

    Returns the HDR image, plus the LDR image when ``tonemap_params`` is
    given. Deterministic: the sampler is the Fibonacci lattice.
    """
    view = scene.view(view_id)
    height, width = view.mask.shape
    hdr = np.zeros((height, width, 3), dtype=np.float32)

    rows, cols = np.nonzero(view.usable_mask())
    x = scene.normalize_positions(view.position[rows, cols]).astype(np.float32)
    n = view.normal[rows, cols].astype(np.float32)
    wo = view.view_dirs()[rows, cols].astype(np.float32)

    for lo in range(0, rows.size, chunk):
        hi = min(lo + chunk, rows.size)
        material = brdf_field.eval(x[lo:hi])
        out = render_batch(x[lo:hi], n[lo:hi], wo[lo:hi], material, lighting, count,
                           sampler_kind="fibonacci", fresnel_form=fresnel_form)
        hdr[rows[lo:hi], cols[lo:hi]] = ad.value(out)

    if tonemap_params is None:
        return hdr
    ldr = np.zeros_like(hdr)
    ldr[rows, cols] = tonemap_np(hdr[rows, cols], tonemap_params.gamma)
    return hdr, ldr
