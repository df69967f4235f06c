"""Analytic scenes and the forward-rendering oracle.

Scenes are unions of spheres and finite disks with constant materials, lit by
a lat-long environment grid plus optional point lights. The oracle renders
ground-truth HDR images with exact analytic visibility: environment lighting
is integrated by high-count Fibonacci quadrature with shadow rays, point
lights contribute inverse-square falloff behind occlusion tests, and the BRDF
uses the same closed forms as the differentiable renderer. It also emits the
geometry maps (position, normal, mask) and per-view ground-truth material
maps that make a scene directory a complete training input.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import envmap, kernels
from .brdf import BrdfParams, eval_brdf_batch
from .dataset import Camera, view_dir_name
from .hemisphere import fibonacci_directions_batch
from .imageio import write_pfm, write_png_gray, write_png_rgb
from .renderer import shading_dots, tonemap_np

_SHADOW_EPS = 1e-5


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    material: BrdfParams

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Plane:
    """A finite disk: point on the plane, unit normal, extent radius."""

    point: np.ndarray
    normal: np.ndarray
    radius: float
    material: BrdfParams

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))
        n = np.asarray(self.normal, dtype=np.float64)
        object.__setattr__(self, "normal", n / np.linalg.norm(n))
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    intensity: np.ndarray  # radiant intensity per channel; falls off as 1/d^2

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        inten = np.asarray(self.intensity, dtype=np.float64)
        if np.any(inten < 0):
            raise ValueError("light intensity must be nonnegative")
        object.__setattr__(self, "intensity", inten)


@dataclass
class AnalyticScene:
    primitives: list
    environment: np.ndarray = None      # lat-long grid (H, W, 3) or None
    point_lights: list = field(default_factory=list)
    name: str = "scene"

    def spheres(self):
        return [p for p in self.primitives if isinstance(p, Sphere)]

    def planes(self):
        return [p for p in self.primitives if isinstance(p, Plane)]

    def packed(self):
        """Primitive arrays for the intersection kernels."""
        sp = self.spheres()
        pl = self.planes()
        spheres = np.array([[*s.center, s.radius] for s in sp], dtype=np.float64).reshape(-1, 4)
        planes = np.array([[*p.point, *p.normal, p.radius] for p in pl], dtype=np.float64).reshape(-1, 7)
        return spheres, planes

    def materials_in_kernel_order(self):
        return [p.material for p in self.spheres()] + [p.material for p in self.planes()]

    def bbox(self, pad: float = 0.05):
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        for p in self.primitives:
            if isinstance(p, Sphere):
                lo = np.minimum(lo, p.center - p.radius)
                hi = np.maximum(hi, p.center + p.radius)
            else:
                lo = np.minimum(lo, p.point - p.radius)
                hi = np.maximum(hi, p.point + p.radius)
        return lo - pad, hi + pad


def look_at_camera(position, target, fov_deg: float, width: int, height: int,
                   up=(0.0, 0.0, 1.0)) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - position
    z = z / np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)  # image y points down in world space
    rotation = np.stack([x, y, z], axis=0)
    f = 0.5 * width / math.tan(math.radians(fov_deg) / 2.0)
    return Camera(rotation=rotation, translation=-rotation @ position,
                  fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def camera_ring(count: int, orbit_radius: float, target, fov_deg: float, width: int, height: int,
                altitudes_deg=(0.0, 22.5, 45.0)) -> list:
    """Cameras on circles at the given altitudes, looking at the target."""
    if count < 2:
        raise ValueError("need at least 2 cameras")
    target = np.asarray(target, dtype=np.float64)
    per_ring = [count // len(altitudes_deg)] * len(altitudes_deg)
    for i in range(count - sum(per_ring)):
        per_ring[i] += 1
    cameras = []
    for ring, (alt, n_ring) in enumerate(zip(altitudes_deg, per_ring)):
        alt_r = math.radians(alt)
        for i in range(n_ring):
            az = 2.0 * math.pi * (i + 0.4 * ring) / max(n_ring, 1)
            pos = target + orbit_radius * np.array(
                [math.cos(alt_r) * math.cos(az), math.cos(alt_r) * math.sin(az), math.sin(alt_r)])
            cameras.append(look_at_camera(pos, target, fov_deg, width, height))
    return cameras


def _hit_geometry(scene: AnalyticScene, origins, dirs):
    """Trace primary rays; returns mask, positions, normals, prim ids (1-based)."""
    spheres, planes = scene.packed()
    t, kind, index = kernels.trace_rays(origins, dirs, spheres, planes)
    hit = kind != kernels.MISS
    pos = origins + dirs * t[:, None]
    normal = np.zeros_like(pos)
    prim = np.zeros(origins.shape[0], dtype=np.uint8)
    n_spheres = spheres.shape[0]
    sph = hit & (kind == kernels.KIND_SPHERE)
    if np.any(sph):
        centers = spheres[index[sph], :3]
        radii = spheres[index[sph], 3:]
        normal[sph] = (pos[sph] - centers) / radii
        prim[sph] = index[sph] + 1
    pla = hit & (kind == kernels.KIND_PLANE)
    if np.any(pla):
        normal[pla] = planes[index[pla], 3:6]
        prim[pla] = n_spheres + index[pla] + 1
    # Reject back-facing hits (e.g. a disk seen from below).
    facing = np.einsum("pc,pc->p", normal, -dirs) > 0
    hit &= facing
    prim[~hit] = 0
    return hit, pos, normal, prim


def _material_arrays(scene: AnalyticScene, prim: np.ndarray):
    mats = scene.materials_in_kernel_order()
    b = np.zeros((prim.size, 3))
    r = np.ones(prim.size)
    m = np.zeros(prim.size)
    for i, mat in enumerate(mats, start=1):
        sel = prim == i
        b[sel] = mat.base_color
        r[sel] = mat.roughness
        m[sel] = mat.metallic
    return b, r[:, None], m[:, None]


def _direct_lighting(scene: AnalyticScene, pos, normal, omega_o, b, r, m, spp: int,
                     fresnel_form: str, diffuse_only: bool = False):
    spheres, planes = scene.packed()
    out = np.zeros((pos.shape[0], 3))
    offset = pos + normal * _SHADOW_EPS

    if scene.environment is not None:
        dirs = fibonacci_directions_batch(spp, normal)
        flat_dirs = dirs.reshape(-1, 3)
        flat_orig = np.repeat(offset, spp, axis=0)
        blocked = kernels.occluded(flat_orig, flat_dirs, np.full(flat_orig.shape[0], np.inf),
                                   spheres, planes)
        radiance = kernels.env_lookup(scene.environment, flat_dirs)
        radiance[blocked] = 0.0
        radiance = radiance.reshape(pos.shape[0], spp, 3)
        dots = shading_dots(normal, omega_o, dirs)
        f = eval_brdf_batch(b, r, m, dots["i_n"], dots["o_n"], dots["h_n"], dots["o_h"],
                            dots["spec_mask"], fresnel_form=fresnel_form,
                            diffuse_only=diffuse_only)
        weight = (2.0 * math.pi / spp) * dots["i_n"]
        out += np.sum(f * radiance * weight[:, :, None], axis=1)

    for light in scene.point_lights:
        delta = light.position[None, :] - pos
        dist = np.linalg.norm(delta, axis=1)
        wi = delta / dist[:, None]
        cos_i = np.einsum("pc,pc->p", wi, normal)
        lit = cos_i > 0
        if np.any(lit):
            blocked = kernels.occluded(offset[lit], wi[lit], dist[lit] - 2.0 * _SHADOW_EPS,
                                       spheres, planes)
            lit_idx = np.nonzero(lit)[0][~blocked]
        else:
            lit_idx = np.array([], dtype=np.int64)
        if lit_idx.size == 0:
            continue
        dots = shading_dots(normal[lit_idx], omega_o[lit_idx], wi[lit_idx][:, None, :])
        f = eval_brdf_batch(b[lit_idx], r[lit_idx], m[lit_idx], dots["i_n"], dots["o_n"],
                            dots["h_n"], dots["o_h"], dots["spec_mask"],
                            fresnel_form=fresnel_form, diffuse_only=diffuse_only)
        irradiance = light.intensity[None, :] / (dist[lit_idx, None] ** 2) * cos_i[lit_idx, None]
        out[lit_idx] += np.broadcast_to(f[:, 0, :], (lit_idx.size, 3)) * irradiance
    return out


def oracle_render(scene: AnalyticScene, camera: Camera, spp: int = 512,
                  fresnel_form: str = "printed", diffuse_only: bool = False) -> dict:
    """Render ground truth for one camera.

    Returns hdr image, position/normal maps (NaN off the mask), mask,
    per-pixel material maps and the primitive index map.
    """
    height, width = camera.height, camera.width
    dirs = camera.ray_directions().reshape(-1, 3)
    origins = np.broadcast_to(camera.center, dirs.shape).copy()
    hit, pos, normal, prim = _hit_geometry(scene, origins, dirs)
    if not np.any(hit):
        raise ValueError("camera sees no primitive")

    hdr = np.zeros((height * width, 3))
    b, r, m = _material_arrays(scene, prim)
    idx = np.nonzero(hit)[0]
    omega_o = -dirs[idx]
    hdr[idx] = _direct_lighting(scene, pos[idx], normal[idx], omega_o,
                                b[idx], r[idx], m[idx], spp, fresnel_form,
                                diffuse_only=diffuse_only)

    position_map = np.full((height * width, 3), np.nan)
    normal_map = np.full((height * width, 3), np.nan)
    position_map[idx] = pos[idx]
    normal_map[idx] = normal[idx]

    shape3 = (height, width, 3)
    return {
        "hdr": hdr.reshape(shape3).astype(np.float32),
        "position": position_map.reshape(shape3).astype(np.float32),
        "normal": normal_map.reshape(shape3).astype(np.float32),
        "mask": hit.reshape(height, width),
        "base_color": b.reshape(shape3).astype(np.float32) * hit.reshape(height, width, 1),
        "roughness": (r[:, 0] * hit).reshape(height, width).astype(np.float32),
        "metallic": (m[:, 0] * hit).reshape(height, width).astype(np.float32),
        "prim_id": prim.reshape(height, width),
    }


def generate_dataset(scene: AnalyticScene, out_dir: str, views: int = 12, resolution: int = 64,
                     spp: int = 512, holdout_k: int = 4, orbit_radius: float = 2.7,
                     target=(0.0, 0.0, 0.4), fov_deg: float = 40.0, color_space: str = "hdr",
                     ldr_gamma: float = 1.0 / 2.2, fresnel_form: str = "printed") -> str:
    """Render a full scene directory (every k-th view held out for testing)."""
    if color_space not in ("hdr", "ldr"):
        raise ValueError("color_space must be 'hdr' or 'ldr'")
    cameras = camera_ring(views, orbit_radius, target, fov_deg, resolution, resolution)
    os.makedirs(out_dir, exist_ok=True)

    lo, hi = scene.bbox()
    meta = {"color_space": color_space, "scene_name": scene.name,
            "bbox": {"min": lo.tolist(), "max": hi.tolist()}, "views": []}
    for vid, camera in enumerate(cameras):
        maps = oracle_render(scene, camera, spp=spp, fresnel_form=fresnel_form)
        vdir = os.path.join(out_dir, view_dir_name(vid))
        os.makedirs(vdir, exist_ok=True)
        if color_space == "hdr":
            write_pfm(os.path.join(vdir, "image.pfm"), maps["hdr"])
        else:
            write_png_rgb(os.path.join(vdir, "image.png"), tonemap_np(maps["hdr"], ldr_gamma))
        write_pfm(os.path.join(vdir, "position.pfm"), maps["position"])
        write_pfm(os.path.join(vdir, "normal.pfm"), maps["normal"])
        write_png_gray(os.path.join(vdir, "mask.png"), maps["mask"].astype(np.uint8) * 255)
        write_pfm(os.path.join(vdir, "gt_basecolor.pfm"), maps["base_color"])
        write_pfm(os.path.join(vdir, "gt_roughness.pfm"), maps["roughness"])
        write_pfm(os.path.join(vdir, "gt_metallic.pfm"), maps["metallic"])
        write_png_gray(os.path.join(vdir, "prim_id.png"), maps["prim_id"])
        entry = {"view_id": vid}
        entry.update(camera.to_json())
        meta["views"].append(entry)

    if scene.environment is not None:
        write_pfm(os.path.join(out_dir, "env.pfm"), scene.environment.astype(np.float32))
    with open(os.path.join(out_dir, "cameras.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
    test_ids = [i for i in range(views) if holdout_k > 0 and i % holdout_k == holdout_k - 1]
    train_ids = [i for i in range(views) if i not in test_ids]
    with open(os.path.join(out_dir, "split.json"), "w") as fh:
        json.dump({"train": train_ids, "test": test_ids}, fh, indent=1)
    return out_dir


# ---------------------------------------------------------------------------
# named toy scenes
# ---------------------------------------------------------------------------

SCENE_NAMES = ("sphere-plane", "sphere-plane-gloss", "plane")

_SPHERE_MAT = BrdfParams(base_color=(0.74, 0.28, 0.20), roughness=0.75, metallic=0.05)
_SPHERE_MAT_GLOSS = BrdfParams(base_color=(0.85, 0.72, 0.45), roughness=0.30, metallic=0.85)
_PLANE_MAT = BrdfParams(base_color=(0.32, 0.40, 0.52), roughness=0.95, metallic=0.0)

_POINT_LIGHTS = [
    PointLight(position=(1.6, -1.1, 1.5), intensity=(2.6, 2.4, 2.1)),
    PointLight(position=(-1.3, 1.4, 1.2), intensity=(1.7, 1.9, 2.2)),
]


def make_scene(name: str, lights: str = "env", env_width: int = 64, env_height: int = 32) -> AnalyticScene:
    """Build one of the named toy scenes with environment or mixed lighting."""
    if name not in SCENE_NAMES:
        raise ValueError(f"unknown scene {name!r}, expected one of {SCENE_NAMES}")
    if lights not in ("env", "mixed"):
        raise ValueError("lights must be 'env' or 'mixed'")
    env = envmap.gradient_sky(env_width, env_height)
    disk = Plane(point=(0, 0, 0), normal=(0, 0, 1), radius=1.3, material=_PLANE_MAT)
    if name == "plane":
        prims = [disk]
    else:
        mat = _SPHERE_MAT_GLOSS if name.endswith("gloss") else _SPHERE_MAT
        prims = [Sphere(center=(0, 0, 0.45), radius=0.45, material=mat), disk]
    point_lights = list(_POINT_LIGHTS) if lights == "mixed" else []
    return AnalyticScene(primitives=prims, environment=env, point_lights=point_lights,
                         name=f"{name}/{lights}")
