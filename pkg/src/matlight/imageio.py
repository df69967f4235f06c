"""Image file IO: PFM for float maps, PNG for LDR images and masks.

PFM layout (bit-exact): ``PF``/``Pf`` magic, ``width height``, a negative
scale line marking little-endian, then float32 rows stored bottom-to-top.
"""

import numpy as np
from PIL import Image


def write_pfm(path, data: np.ndarray):
    """Write a (H, W) or (H, W, 3) float map as little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        magic = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM expects (H,W) or (H,W,3), got {data.shape}")
    height, width = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n")
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file (magic {magic!r})")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        count = width * height * (3 if magic == b"PF" else 1)
        raw = np.frombuffer(fh.read(count * 4), dtype="<f4" if scale < 0 else ">f4")
        if raw.size != count:
            raise ValueError(f"{path}: truncated PFM payload")
    shape = (height, width, 3) if magic == b"PF" else (height, width)
    return raw.reshape(shape)[::-1].astype(np.float32)


def write_png_rgb(path, data: np.ndarray):
    """Write float [0,1] RGB as 8-bit PNG (round-to-nearest quantization)."""
    arr = np.clip(np.asarray(data), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(path)


def read_png_rgb(path) -> np.ndarray:
    """Read an 8-bit RGB PNG as float [0,1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def write_png_gray(path, data: np.ndarray):
    """Write a uint8 single-channel image (masks, index maps)."""
    Image.fromarray(np.asarray(data, dtype=np.uint8), mode="L").save(path)


def read_png_gray(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def luminance(rgb: np.ndarray) -> np.ndarray:
    return 0.2126 * rgb[..., 0] + 0.7152 * rgb[..., 1] + 0.0722 * rgb[..., 2]


def gradient_magnitude(image: np.ndarray, mode: str = "grayscale") -> np.ndarray:
    """Image-gradient magnitude by central differences (one-sided at edges).

    ``grayscale`` takes the norm of the luminance gradient; ``per_channel``
    the norm of the stacked per-channel gradients.
    """
    if mode == "grayscale":
        gy, gx = np.gradient(luminance(image))
        return np.hypot(gx, gy).astype(np.float32)
    if mode == "per_channel":
        total = np.zeros(image.shape[:2])
        for c in range(image.shape[2]):
            gy, gx = np.gradient(image[..., c])
            total += gx * gx + gy * gy
        return np.sqrt(total).astype(np.float32)
    raise ValueError(f"unknown gradient mode {mode!r}")
