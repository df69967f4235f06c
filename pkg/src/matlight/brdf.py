"""Closed-form microfacet BRDF with base color, roughness and metallic.

The model is a diffuse lobe plus a single specular lobe built from a
spherical-Gaussian normal distribution ``D``, a Schlick-style Fresnel ``F``
and a GGX geometry factor ``G``:

    f = f_d + f_s
    f_d = (1 - m) / pi * b
    f_s = D(h; r) * F(o.h; b, m) * G(i.n, o.n; r) / ((n.i) * (n.o))

All functions accept plain numpy inputs or autodiff Tensors and broadcast
numpy-style, so the same code serves the forward oracle, training graphs and
scalar unit probes.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

R_MIN = 0.01           # roughness floor; D(h; r) diverges as r -> 0
COS_EPS = 1e-4         # denominator floor for the specular term only
HALF_VECTOR_EPS = 1e-8  # |w_i + w_o| below this: half vector undefined
DIELECTRIC_F0 = 0.04
FRESNEL_FORMS = ("printed", "schlick")


@dataclass(frozen=True)
class BrdfParams:
    """Per-point material: base color in [0,1]^3, roughness in [R_MIN,1], metallic in [0,1]."""

    base_color: np.ndarray
    roughness: float
    metallic: float

    def __post_init__(self):
        object.__setattr__(self, "base_color", np.asarray(self.base_color, dtype=np.float64))

    def validate(self):
        b, r, m = self.base_color, self.roughness, self.metallic
        if b.shape != (3,) or not np.all(np.isfinite(b)) or b.min() < 0 or b.max() > 1:
            raise ValueError(f"base_color outside [0,1]^3: {b}")
        if not (math.isfinite(r) and R_MIN <= r <= 1.0):
            raise ValueError(f"roughness outside [{R_MIN}, 1]: {r}")
        if not (math.isfinite(m) and 0.0 <= m <= 1.0):
            raise ValueError(f"metallic outside [0, 1]: {m}")
        return self


@dataclass(frozen=True)
class ShadingVectors:
    """Unit view/light/normal directions for one shading configuration."""

    omega_o: np.ndarray
    omega_i: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        for name in ("omega_o", "omega_i", "normal"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector, got {v}")
            if abs(np.linalg.norm(v) - 1.0) > 1e-6:
                raise ValueError(f"{name} must be unit length, |v|={np.linalg.norm(v)}")
            object.__setattr__(self, name, v)

    @property
    def half(self):
        """Normalized w_i + w_o, or None when the two are exactly opposed."""
        h = self.omega_i + self.omega_o
        norm = np.linalg.norm(h)
        if norm <= HALF_VECTOR_EPS:
            return None
        return h / norm


def ndf_sg(h_dot_n, r):
    """Spherical-Gaussian normal distribution: exp((2/r^2)(h.n - 1)) / (pi r^2)."""
    r2 = r * r
    return ad.exp((h_dot_n - 1.0) * (2.0 / r2)) * (1.0 / math.pi / r2)


def fresnel_schlick(o_dot_h, base_color, metallic, form="printed"):
    """Fresnel with F0 = 0.04 (1 - m) + b m.

    ``form="printed"`` uses F0 + (1 - F0)(1 - (o.h)^5); ``form="schlick"``
    uses the conventional F0 + (1 - F0)(1 - o.h)^5. Both agree at o.h in
    {0, 1}.
    """
    if form not in FRESNEL_FORMS:
        raise ValueError(f"unknown fresnel form {form!r}, expected one of {FRESNEL_FORMS}")
    f0 = base_color * metallic + DIELECTRIC_F0 * (1.0 - metallic)
    if form == "printed":
        away = 1.0 - np.power(o_dot_h, 5)
    else:
        away = np.power(1.0 - o_dot_h, 5)
    return f0 + (1.0 - f0) * away


def geometry_ggx(i_dot_n, o_dot_n, r):
    """GGX shadowing-masking G_GGX(i.n) * G_GGX(o.n) with
    G_GGX(z) = 2z / (z + sqrt(r^2 + (1 - r^2) z^2))."""
    r2 = r * r

    def g1(z):
        return (2.0 * z) / (z + ad.sqrt(r2 + (1.0 - r2) * (z * z)))

    return g1(i_dot_n) * g1(o_dot_n)


def eval_brdf(vectors: ShadingVectors, params: BrdfParams, fresnel_form="printed",
              diffuse_only=False) -> np.ndarray:
    """Full BRDF value at a single shading configuration.

    Returns a zero spectrum for below-horizon light (w_i.n <= 0) and the
    diffuse term alone when the half vector is undefined (exactly opposed
    directions).
    """
    n = vectors.normal
    i_n = float(np.dot(vectors.omega_i, n))
    o_n = float(np.dot(vectors.omega_o, n))
    if i_n <= 0.0:
        return np.zeros(3)

    f_d = (1.0 - params.metallic) / math.pi * params.base_color
    if diffuse_only:
        return f_d
    h = vectors.half
    if h is None:
        return f_d

    h_n = float(np.clip(np.dot(h, n), -1.0, 1.0))
    o_h = float(np.clip(np.dot(vectors.omega_o, h), 0.0, 1.0))
    d = ndf_sg(h_n, params.roughness)
    f = fresnel_schlick(o_h, params.base_color, params.metallic, form=fresnel_form)
    g = geometry_ggx(i_n, o_n, params.roughness)
    denom = max(i_n, COS_EPS) * max(o_n, COS_EPS)
    return f_d + d * g / denom * f


def eval_brdf_batch(base_color, roughness, metallic, i_dot_n, o_dot_n, h_dot_n,
                    o_dot_h, spec_mask, fresnel_form="printed", diffuse_only=False):
    """Vectorized BRDF over a batch of points and sample directions.

    Args:
        base_color: (B, 3) Tensor or array.
        roughness, metallic: (B, 1) Tensor or array.
        i_dot_n, h_dot_n, o_dot_h: (B, S) constants; caller guarantees
            i_dot_n > 0 (samples above the horizon).
        o_dot_n: (B, 1) or (B, S) constant.
        spec_mask: (B, S) multiplier, zero where the specular lobe is invalid
            (degenerate half vector).

    Returns:
        (B, S, 3) when the specular lobe is active, else the direction-free
        diffuse term with shape (B, 1, 3); both broadcast against (B, S, 3).
    """
    b3 = ad.reshape(base_color, (-1, 1, 3))
    m3 = ad.reshape(metallic, (-1, 1, 1))
    f_d = b3 * ((1.0 - m3) * (1.0 / math.pi))
    if diffuse_only:
        return f_d

    d = ndf_sg(h_dot_n, roughness)
    g = geometry_ggx(i_dot_n, o_dot_n, roughness)
    denom = np.maximum(i_dot_n, COS_EPS) * np.maximum(o_dot_n, COS_EPS)
    scale = d * g * (spec_mask / denom)
    f = fresnel_schlick(o_dot_h[:, :, None], b3, m3, form=fresnel_form)
    return f_d + f * ad.reshape(scale, (*ad.value(scale).shape, 1))
