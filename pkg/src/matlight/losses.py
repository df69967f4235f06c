"""Training objective: L1 image term, bilateral smoothness, Lambertian prior."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

DEFAULT_W_SMOOTH = 1e-4
DEFAULT_W_LAMBERTIAN = 1e-3


@dataclass(frozen=True)
class LossWeights:
    w_s: float = DEFAULT_W_SMOOTH
    w_l: float = DEFAULT_W_LAMBERTIAN

    def __post_init__(self):
        if self.w_s < 0 or self.w_l < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class PixelBatch:
    """A sampled pixel set: surface geometry, observed colors and the
    precomputed image-gradient magnitudes used by the bilateral weight."""

    x: np.ndarray          # (B, 3) normalized positions
    n: np.ndarray          # (B, 3) unit normals
    omega_o: np.ndarray    # (B, 3) unit directions toward the camera
    observed: np.ndarray   # (B, 3) image colors (HDR or LDR per the scene)
    grad_mag: np.ndarray   # (B,) image-gradient magnitude at the pixel
    view_ids: np.ndarray = field(default=None)
    rows: np.ndarray = field(default=None)
    cols: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x.shape[0] < 1:
            raise ValueError("batch must contain at least one pixel")
        if np.any(self.grad_mag < 0) or not np.all(np.isfinite(self.observed)):
            raise ValueError("invalid batch: gradient magnitudes must be >= 0 and colors finite")

    @property
    def size(self):
        return self.x.shape[0]


def image_l1(observed: np.ndarray, rendered):
    """Mean over the batch of the channel-summed absolute difference."""
    per_pixel = ad.sum_(ad.absolute(rendered - observed), axis=-1)
    return ad.mean_(per_pixel)


def smoothness_loss(grad_r, grad_m, grad_mag: np.ndarray):
    """Bilateral smoothness: mean of (|grad_x r| + |grad_x m|) exp(-|grad_p I|)."""
    attenuation = np.exp(-np.asarray(grad_mag))
    norms = ad.l2norm_last(grad_r) + ad.l2norm_last(grad_m)
    return ad.mean_(norms * attenuation)


def lambertian_loss(r, m):
    """Lambertian prior: mean of |r - 1| + |m|; zero iff r = 1 and m = 0."""
    per_pixel = ad.absolute(r - 1.0) + ad.absolute(m)
    return ad.mean_(per_pixel)


def total_loss(l_image, l_smooth, l_lambertian, weights: LossWeights, w_image: float = 1.0):
    """Weighted sum of the three terms. Aborts on non-finite components."""
    for name, term in (("image", l_image), ("smoothness", l_smooth), ("lambertian", l_lambertian)):
        if not np.all(np.isfinite(ad.value(term))):
            raise FloatingPointError(f"non-finite {name} loss component")
    return w_image * l_image + weights.w_s * l_smooth + weights.w_l * l_lambertian
