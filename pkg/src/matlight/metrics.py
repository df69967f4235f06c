"""Evaluation: PSNR scores on the test split, material-map export, light probes."""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .dataset import SceneDataset, view_dir_name
from .envmap import direction_grid
from .imageio import write_pfm
from .renderer import render_view, tonemap_np

PSNR_CAP = 99.0  # reported for identical images (zero MSE)


def mse(a: np.ndarray, b: np.ndarray, mask: np.ndarray = None) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if mask is not None:
        if not np.any(mask):
            raise ValueError("empty mask")
        a, b = a[mask], b[mask]
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray = None, max_val: float = 1.0,
         clamp: bool = True) -> float:
    """10 log10(max^2 / MSE) over masked pixels, capped at 99 dB for zero MSE.

    With ``clamp`` both images are clipped to [0, max_val] first (the PSNR
    convention used for HDR renderings here).
    """
    if clamp:
        a = np.clip(a, 0.0, max_val)
        b = np.clip(b, 0.0, max_val)
    err = mse(a, b, mask)
    if err == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(max_val * max_val / err), PSNR_CAP)


def mae(a: np.ndarray, b: np.ndarray, mask: np.ndarray = None) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if mask is not None:
        a, b = a[mask], b[mask]
    return float(np.mean(np.abs(a - b)))


@dataclass
class ViewScore:
    view_id: int
    psnr_render: float
    mse_unclamped: float
    psnr_base_color: float = None
    psnr_roughness: float = None
    psnr_metallic: float = None


@dataclass
class EvalReport:
    color_space: str
    views: list = field(default_factory=list)

    def _mean(self, attr):
        vals = [getattr(v, attr) for v in self.views if getattr(v, attr) is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_psnr_render(self):
        return self._mean("psnr_render")

    def to_dict(self):
        return {
            "color_space": self.color_space,
            "views": [vars(v) for v in self.views],
            "mean": {
                "psnr_render": self.mean_psnr_render,
                "psnr_base_color": self._mean("psnr_base_color"),
                "psnr_roughness": self._mean("psnr_roughness"),
                "psnr_metallic": self._mean("psnr_metallic"),
            },
        }

    def to_text(self):
        lines = [f"{'view':>5} {'render':>8} {'base':>8} {'rough':>8} {'metal':>8}"]
        for v in self.views:
            cells = [f"{v.view_id:>5d}", f"{v.psnr_render:8.2f}"]
            for val in (v.psnr_base_color, v.psnr_roughness, v.psnr_metallic):
                cells.append(f"{val:8.2f}" if val is not None else f"{'-':>8}")
            lines.append(" ".join(cells))
        mean = self.mean_psnr_render
        lines.append(f"mean rendering PSNR: {mean:.2f} dB" if mean is not None else "no views")
        return "\n".join(lines)


def material_maps(scene: SceneDataset, view, brdf_field):
    """Evaluate the material field over a view's foreground positions."""
    height, width = view.mask.shape
    base = np.zeros((height, width, 3), dtype=np.float32)
    rough = np.zeros((height, width), dtype=np.float32)
    metal = np.zeros((height, width), dtype=np.float32)
    rows, cols = np.nonzero(view.mask & np.all(np.isfinite(view.position), axis=2))
    if rows.size:
        x = scene.normalize_positions(view.position[rows, cols]).astype(np.float32)
        b, r, m = brdf_field.eval(x)
        base[rows, cols] = ad.value(b)
        rough[rows, cols] = ad.value(r)[:, 0]
        metal[rows, cols] = ad.value(m)[:, 0]
    return base, rough, metal


def evaluate(scene: SceneDataset, brdf_field, lighting, tonemap_params, eval_samples: int = 256,
             view_ids=None, fresnel_form: str = "printed") -> EvalReport:
    """Score the held-out views: rendering PSNR plus material PSNRs when the
    scene carries ground-truth maps."""
    ids = list(view_ids) if view_ids is not None else list(scene.test_ids)
    report = EvalReport(color_space=scene.color_space)
    for vid in ids:
        view = scene.view(vid)
        hdr = render_view(scene, vid, brdf_field, lighting, count=eval_samples,
                          fresnel_form=fresnel_form)
        if scene.color_space == "ldr":
            rendered = tonemap_np(hdr, tonemap_params.gamma)
        else:
            rendered = hdr
        mask = view.usable_mask()
        score = ViewScore(
            view_id=vid,
            psnr_render=psnr(rendered, view.image, mask=mask),
            mse_unclamped=mse(rendered, view.image, mask=mask),
        )
        if view.gt_base_color is not None:
            base, rough, metal = material_maps(scene, view, brdf_field)
            score.psnr_base_color = psnr(base, view.gt_base_color, mask=mask)
            score.psnr_roughness = psnr(rough, view.gt_roughness, mask=mask)
            score.psnr_metallic = psnr(metal, view.gt_metallic, mask=mask)
        report.views.append(score)
    return report


def write_report(report: EvalReport, path: str):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)


def export_brdf_maps(scene: SceneDataset, brdf_field, view_ids, out_dir: str):
    """Write per-view base color / roughness / metallic PFM maps (background 0)."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for vid in view_ids:
        view = scene.view(vid)
        base, rough, metal = material_maps(scene, view, brdf_field)
        prefix = os.path.join(out_dir, view_dir_name(vid))
        os.makedirs(prefix, exist_ok=True)
        write_pfm(os.path.join(prefix, "basecolor.pfm"), base)
        write_pfm(os.path.join(prefix, "roughness.pfm"), rough)
        write_pfm(os.path.join(prefix, "metallic.pfm"), metal)
        written.append(prefix)
    return written


def probe_light(lighting, x, resolution: int = 64) -> np.ndarray:
    """Incident radiance L(x, w) on a lat-long direction grid of the full sphere.

    Returns a (resolution//2, resolution, 3) HDR image (azimuth horizontal).
    """
    height = max(resolution // 2, 1)
    dirs = direction_grid(resolution, height).reshape(-1, 3).astype(np.float32)
    x = np.asarray(x, dtype=np.float32).reshape(3)
    xs = np.broadcast_to(x, dirs.shape).copy()
    out = ad.value(lighting.radiance(xs, dirs))
    return out.reshape(height, resolution, 3).astype(np.float32)
