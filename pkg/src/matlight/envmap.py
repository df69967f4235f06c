"""Lat-long environment grids: direction parameterization and sky builders.

Grids are (height, width, 3) arrays over the full sphere with azimuth along
the width (wrapping) and polar angle from +z along the height. Texel centers
sit at phi_i = 2 pi (i + 0.5) / W and theta_j = pi (j + 0.5) / H. Bilinear
lookup lives in :mod:`matlight.kernels` and is shared with the trainable
pixel-grid lighting model.
"""

import math

import numpy as np


def direction_grid(width: int, height: int) -> np.ndarray:
    """Unit directions at the texel centers of a (height, width) lat-long grid."""
    i = (np.arange(width) + 0.5) / width
    j = (np.arange(height) + 0.5) / height
    phi = 2.0 * math.pi * i[None, :]
    theta = math.pi * j[:, None]
    st = np.sin(theta)
    return np.stack(
        [st * np.cos(phi), st * np.sin(phi), np.broadcast_to(np.cos(theta), (height, width))],
        axis=2,
    )


def constant_grid(value, width: int = 32, height: int = 16) -> np.ndarray:
    value = np.asarray(value, dtype=np.float64).reshape(3)
    return np.tile(value, (height, width, 1))


def gradient_sky(width: int = 64, height: int = 32,
                 horizon=(0.50, 0.45, 0.38), zenith=(0.26, 0.34, 0.50),
                 sun_dir=(0.45, 0.35, 0.82), sun_intensity=2.6, sun_sharpness=32.0) -> np.ndarray:
    """Smooth procedural sky: horizon-to-zenith gradient plus a sun lobe.

    Tuned so surface radiances in the toy scenes stay mostly inside [0, 1]
    (the microfacet lobe roughly doubles the diffuse energy here), keeping
    LDR encodes of the same scenes away from saturation. The sun is bright
    and fairly tight: the directional structure is what disambiguates albedo
    from Fresnel sheen when materials and lighting are fit jointly.
    """
    dirs = direction_grid(width, height)
    t = (dirs[:, :, 2] + 1.0) * 0.5
    horizon = np.asarray(horizon, dtype=np.float64)
    zenith = np.asarray(zenith, dtype=np.float64)
    base = horizon[None, None, :] * (1.0 - t[:, :, None]) + zenith[None, None, :] * t[:, :, None]
    s = np.asarray(sun_dir, dtype=np.float64)
    s = s / np.linalg.norm(s)
    lobe = np.maximum(dirs @ s, 0.0) ** sun_sharpness
    return base + sun_intensity * lobe[:, :, None]


def spherical_mean(grid: np.ndarray) -> np.ndarray:
    """Solid-angle-weighted mean radiance of a lat-long grid (per channel)."""
    height = grid.shape[0]
    theta = math.pi * (np.arange(height) + 0.5) / height
    w = np.sin(theta)
    w = w / w.sum()
    return (grid * w[:, None, None]).mean(axis=1).sum(axis=0)
