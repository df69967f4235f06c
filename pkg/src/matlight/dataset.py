"""Scene ingestion and pixel-batch sampling.

A scene directory holds ``cameras.json`` (pinhole cameras, bounding box,
color space), ``split.json`` (train/test view ids) and one ``view_NNNN``
directory per view with the radiance image (``image.pfm`` HDR or
``image.png`` LDR), ``position.pfm``, ``normal.pfm``, ``mask.png`` and
optional ground-truth material maps. Positions are normalized into
[-1, 1]^3 on load; the transform is recorded on the dataset.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .imageio import (
    gradient_magnitude,
    read_pfm,
    read_png_gray,
    read_png_rgb,
)
from .losses import PixelBatch


class SceneValidationError(RuntimeError):
    """A scene directory violates the documented layout or invariants."""


@dataclass
class Camera:
    """Pinhole camera: x_cam = R x_world + t, pixel = (fx X/Z + cx, fy Y/Z + cy)."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def ray_directions(self) -> np.ndarray:
        """World-space unit directions through every pixel center, (H, W, 3)."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=2)
        d_world = d_cam @ self.rotation  # row-vector form of R^T d
        return d_world / np.linalg.norm(d_world, axis=2, keepdims=True)

    def to_json(self):
        w2c = np.concatenate([self.rotation, self.translation[:, None]], axis=1)
        return {
            "world_to_camera": w2c.tolist(),
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_json(cls, d):
        w2c = np.asarray(d["world_to_camera"], dtype=np.float64)
        if w2c.shape != (3, 4):
            raise SceneValidationError(f"world_to_camera must be 3x4, got {w2c.shape}")
        return cls(rotation=w2c[:, :3], translation=w2c[:, 3],
                   fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
                   width=int(d["width"]), height=int(d["height"]))


@dataclass
class SceneView:
    view_id: int
    camera: Camera
    image: np.ndarray      # (H, W, 3) float32; LDR images are kept as stored [0,1]
    position: np.ndarray   # (H, W, 3) world units, non-finite off the mask
    normal: np.ndarray     # (H, W, 3) unit on the mask
    mask: np.ndarray       # (H, W) bool
    grad_mag: np.ndarray   # (H, W) float32, precomputed at ingestion
    gt_base_color: np.ndarray = None
    gt_roughness: np.ndarray = None
    gt_metallic: np.ndarray = None
    prim_id: np.ndarray = None
    _view_dirs: np.ndarray = field(default=None, repr=False)

    def view_dirs(self) -> np.ndarray:
        """Unit directions from each surface point toward the camera center."""
        if self._view_dirs is None:
            delta = self.camera.center[None, None, :] - self.position
            norm = np.linalg.norm(delta, axis=2, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                self._view_dirs = (delta / norm).astype(np.float32)
        return self._view_dirs

    def usable_mask(self) -> np.ndarray:
        """Foreground pixels that are front-facing (n . omega_o > 0)."""
        facing = np.einsum("hwc,hwc->hw", self.normal, self.view_dirs())
        with np.errstate(invalid="ignore"):
            return self.mask & np.isfinite(facing) & (facing > 0.0)


@dataclass
class SceneDataset:
    root: str
    color_space: str  # "hdr" | "ldr"
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    views: dict
    train_ids: list
    test_ids: list
    _train_index: dict = field(default=None, repr=False)

    @property
    def norm_center(self) -> np.ndarray:
        return (self.bbox_min + self.bbox_max) / 2.0

    @property
    def norm_scale(self) -> float:
        return float(np.max((self.bbox_max - self.bbox_min) / 2.0))

    def normalize_positions(self, p: np.ndarray) -> np.ndarray:
        return (p - self.norm_center) / self.norm_scale

    def view(self, view_id: int) -> SceneView:
        if view_id not in self.views:
            raise KeyError(f"view id {view_id} not in scene (have {sorted(self.views)})")
        return self.views[view_id]

    def train_index(self):
        """Flattened arrays over all usable foreground pixels of the training views."""
        if self._train_index is None:
            xs, ns, wos, obs, gms, vids, rows, cols = [], [], [], [], [], [], [], []
            for vid in self.train_ids:
                view = self.views[vid]
                r, c = np.nonzero(view.usable_mask())
                xs.append(self.normalize_positions(view.position[r, c]))
                ns.append(view.normal[r, c])
                wos.append(view.view_dirs()[r, c])
                obs.append(view.image[r, c])
                gms.append(view.grad_mag[r, c])
                vids.append(np.full(r.size, vid, dtype=np.int32))
                rows.append(r.astype(np.int32))
                cols.append(c.astype(np.int32))
            if not xs or sum(x.shape[0] for x in xs) == 0:
                raise SceneValidationError("scene has no usable foreground pixels in the training views")
            self._train_index = {
                "x": np.concatenate(xs).astype(np.float32),
                "n": np.concatenate(ns).astype(np.float32),
                "omega_o": np.concatenate(wos).astype(np.float32),
                "observed": np.concatenate(obs).astype(np.float32),
                "grad_mag": np.concatenate(gms).astype(np.float32),
                "view_ids": np.concatenate(vids),
                "rows": np.concatenate(rows),
                "cols": np.concatenate(cols),
            }
        return self._train_index


def view_dir_name(view_id: int) -> str:
    return f"view_{view_id:04d}"


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise SceneValidationError(f"missing file: {path}")
    return path


def _load_view(root: str, view_id: int, camera: Camera, color_space: str,
               gradient_mode: str) -> SceneView:
    vdir = os.path.join(root, view_dir_name(view_id))
    if color_space == "hdr":
        image = read_pfm(_require(os.path.join(vdir, "image.pfm")))
    else:
        image = read_png_rgb(_require(os.path.join(vdir, "image.png")))
    position = read_pfm(_require(os.path.join(vdir, "position.pfm")))
    normal = read_pfm(_require(os.path.join(vdir, "normal.pfm")))
    mask = read_png_gray(_require(os.path.join(vdir, "mask.png"))) > 127

    expected = (camera.height, camera.width)
    for name, arr in (("image", image), ("position", position), ("normal", normal), ("mask", mask)):
        if arr.shape[:2] != expected:
            raise SceneValidationError(
                f"{os.path.join(vdir, name)}: resolution {arr.shape[:2]} does not match camera {expected}")

    norms = np.linalg.norm(normal, axis=2)
    with np.errstate(invalid="ignore"):
        bad = mask & ~(np.abs(norms - 1.0) < 1e-3)
    if np.any(bad):
        r, c = np.argwhere(bad)[0]
        raise SceneValidationError(
            f"{os.path.join(vdir, 'normal.pfm')}: non-unit normal on foreground at pixel ({r}, {c})")
    if not np.all(np.isfinite(position[mask])):
        r, c = np.argwhere(mask & ~np.all(np.isfinite(position), axis=2))[0]
        raise SceneValidationError(
            f"{os.path.join(vdir, 'position.pfm')}: non-finite position on foreground at pixel ({r}, {c})")

    view = SceneView(
        view_id=view_id, camera=camera, image=image, position=position,
        normal=normal, mask=mask,
        grad_mag=gradient_magnitude(image, mode=gradient_mode),
    )
    for attr, fname in (("gt_base_color", "gt_basecolor.pfm"),
                        ("gt_roughness", "gt_roughness.pfm"),
                        ("gt_metallic", "gt_metallic.pfm")):
        fpath = os.path.join(vdir, fname)
        if os.path.exists(fpath):
            setattr(view, attr, read_pfm(fpath))
    prim_path = os.path.join(vdir, "prim_id.png")
    if os.path.exists(prim_path):
        view.prim_id = read_png_gray(prim_path)
    return view


def load_scene(root: str, gradient_mode: str = "grayscale") -> SceneDataset:
    """Load and validate a scene directory."""
    cam_path = _require(os.path.join(root, "cameras.json"))
    try:
        with open(cam_path) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneValidationError(f"{cam_path}: unreadable JSON ({exc})") from exc

    color_space = meta.get("color_space", "hdr")
    if color_space not in ("hdr", "ldr"):
        raise SceneValidationError(f"{cam_path}: color_space must be 'hdr' or 'ldr', got {color_space!r}")
    bbox_min = np.asarray(meta["bbox"]["min"], dtype=np.float64)
    bbox_max = np.asarray(meta["bbox"]["max"], dtype=np.float64)
    if bbox_min.shape != (3,) or bbox_max.shape != (3,) or np.any(bbox_max <= bbox_min):
        raise SceneValidationError(f"{cam_path}: invalid bounding box")

    views = {}
    for entry in meta["views"]:
        vid = int(entry["view_id"])
        camera = Camera.from_json(entry)
        views[vid] = _load_view(root, vid, camera, color_space, gradient_mode)

    split_path = _require(os.path.join(root, "split.json"))
    with open(split_path) as fh:
        split = json.load(fh)
    train_ids = [int(v) for v in split["train"]]
    test_ids = [int(v) for v in split["test"]]
    unknown = [v for v in train_ids + test_ids if v not in views]
    if unknown:
        raise SceneValidationError(f"{split_path}: split references unknown view ids {unknown}")

    scene = SceneDataset(root=root, color_space=color_space, bbox_min=bbox_min, bbox_max=bbox_max,
                         views=views, train_ids=train_ids, test_ids=test_ids)

    half = scene.norm_scale * (1.0 + 1e-6) + 1e-9
    for vid, view in views.items():
        pos = view.position[view.mask]
        if pos.size and np.any(np.abs(pos - scene.norm_center) > half):
            raise SceneValidationError(
                f"{os.path.join(root, view_dir_name(vid))}: foreground positions outside the bounding box")
    return scene


def sample_batch(scene: SceneDataset, size: int, rng) -> PixelBatch:
    """Uniform with-replacement sample over all training foreground pixels.

    ``rng`` is either an integer seed or a numpy Generator (the trainer passes
    its own stream so batches are reproducible from the run seed).
    """
    if size < 1:
        raise ValueError("batch size must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    index = scene.train_index()
    total = index["x"].shape[0]
    pick = rng.integers(0, total, size=size)
    return PixelBatch(
        x=index["x"][pick],
        n=index["n"][pick],
        omega_o=index["omega_o"][pick],
        observed=index["observed"][pick],
        grad_mag=index["grad_mag"][pick],
        view_ids=index["view_ids"][pick],
        rows=index["rows"][pick],
        cols=index["cols"][pick],
    )
