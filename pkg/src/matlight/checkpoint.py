"""Versioned binary checkpoint container.

Layout, all little-endian:

====================  =========================================================
bytes 0..3            magic ``MLCK``
uint32                format version (currently 1)
uint32                header length in bytes
bytes                 UTF-8 JSON header: iteration, lighting_kind, color_space,
                      fresnel_form, brdf_config, light_config
uint32                tensor record count
per record            uint16 name length, name bytes (UTF-8), uint8 ndim,
                      ndim x uint32 dims, float32 payload (C order)
====================  =========================================================
"""

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .fields import BrdfField, FieldConfig, PixelEnvMap, build_lighting
from .renderer import TonemapParams

MAGIC = b"MLCK"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    iteration: int
    lighting_kind: str
    color_space: str
    fresnel_form: str
    brdf_config: FieldConfig
    light_config: FieldConfig
    tensors: dict


def save_checkpoint(path, iteration: int, lighting_kind: str, color_space: str,
                    fresnel_form: str, brdf_config: FieldConfig, light_config: FieldConfig,
                    tensors: dict):
    header = json.dumps({
        "iteration": int(iteration),
        "lighting_kind": lighting_kind,
        "color_space": color_space,
        "fresnel_form": fresnel_form,
        "brdf_config": dataclasses.asdict(brdf_config),
        "light_config": dataclasses.asdict(light_config) if light_config else None,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            data = np.ascontiguousarray(ad.value(tensors[name]), dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a matlight checkpoint")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version} (expected {VERSION})")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(4 * size), dtype="<f4").reshape(shape)
            tensors[name] = data.astype(np.float32)
    light_cfg = header["light_config"]
    return Checkpoint(
        iteration=header["iteration"],
        lighting_kind=header["lighting_kind"],
        color_space=header["color_space"],
        fresnel_form=header["fresnel_form"],
        brdf_config=FieldConfig(**header["brdf_config"]),
        light_config=FieldConfig(**light_cfg) if light_cfg else None,
        tensors=tensors,
    )


def restore_models(ckpt: Checkpoint):
    """Rebuild the material field, lighting model and tonemap from a checkpoint."""
    rng = np.random.default_rng(0)  # shapes are overwritten below
    brdf_field = BrdfField(ckpt.brdf_config, rng)
    if ckpt.lighting_kind == "pix_env":
        grid = ckpt.tensors["light.grid"]
        lighting = PixelEnvMap(width=grid.shape[1], height=grid.shape[0])
    else:
        lighting = build_lighting(ckpt.lighting_kind, ckpt.light_config, rng)
    tonemap_params = TonemapParams(1.0)

    params = {}
    params.update(brdf_field.named_parameters())
    params.update(lighting.named_parameters())
    params.update(tonemap_params.named_parameters())
    for name, tensor in params.items():
        if name not in ckpt.tensors:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        stored = ckpt.tensors[name]
        if stored.shape != tensor.data.shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {stored.shape}, model expects {tensor.data.shape}")
        tensor.data = stored.copy()
    return brdf_field, lighting, tonemap_params
