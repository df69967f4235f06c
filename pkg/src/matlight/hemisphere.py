"""Deterministic Fibonacci point sets over the hemisphere around a normal.

The lattice is the golden-angle spiral with midpoint offsets,

    z_k = (k + 0.5) / N,   phi_k = 2 pi k (sqrt(5) - 1) / 2,

mapped into world space through a branchless orthonormal tangent frame. Every
sample sits strictly above the horizon, and the constant quadrature weight is
the hemisphere area over the sample count, A = 2 pi / N. A seeded
uniform-random variant (same weight) exists for the sampling ablation.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TangentFrame:
    """Right-handed orthonormal basis (t, bt, n)."""

    t: np.ndarray
    bt: np.ndarray
    n: np.ndarray


@dataclass(frozen=True)
class DirectionSet:
    """Unit sample directions plus the constant solid angle per sample."""

    directions: np.ndarray  # (count, 3)
    solid_angle: float

    @property
    def count(self):
        return self.directions.shape[0]


def build_tangent_frame(n) -> TangentFrame:
    """Branchless orthonormal frame around a unit normal (keyed on sign of n_z)."""
    n = np.asarray(n, dtype=np.float64)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise ValueError(f"normal must be a finite 3-vector, got {n}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ValueError(f"normal must be unit length, |n|={np.linalg.norm(n)}")
    s = math.copysign(1.0, n[2])
    a = -1.0 / (s + n[2])
    b = n[0] * n[1] * a
    t = np.array([1.0 + s * n[0] * n[0] * a, s * b, -s * n[0]])
    bt = np.array([b, s + n[1] * n[1] * a, -n[1]])
    return TangentFrame(t=t, bt=bt, n=n)


def tangent_frames(normals: np.ndarray):
    """Vectorized frame construction for (N, 3) unit normals."""
    n = np.asarray(normals)
    s = np.copysign(1.0, n[:, 2])
    a = -1.0 / (s + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    t = np.stack([1.0 + s * n[:, 0] ** 2 * a, s * b, -s * n[:, 0]], axis=1)
    bt = np.stack([b, s + n[:, 1] ** 2 * a, -n[:, 1]], axis=1)
    return t.astype(n.dtype), bt.astype(n.dtype)


def fibonacci_lattice(count: int, dtype=np.float64) -> np.ndarray:
    """Local-frame lattice points (count, 3); z strictly in (0, 1)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    k = np.arange(count, dtype=np.float64)
    z = (k + 0.5) / count
    phi = (TWO_PI * kernels.GOLDEN_CONJUGATE * k) % TWO_PI
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1).astype(dtype)


def fibonacci_hemisphere(count: int, frame: TangentFrame) -> DirectionSet:
    """Deterministic Fibonacci direction set above the frame's normal."""
    local = fibonacci_lattice(count)
    dirs = (
        frame.t[None, :] * local[:, 0:1]
        + frame.bt[None, :] * local[:, 1:2]
        + frame.n[None, :] * local[:, 2:3]
    )
    return DirectionSet(directions=dirs, solid_angle=TWO_PI / count)


def random_hemisphere(count: int, frame: TangentFrame, rng_seed: int) -> DirectionSet:
    """I.i.d. uniform hemisphere samples, reproducible from the seed.

    The solid angle is kept at the fixed 2 pi / count of the deterministic
    lattice (the ablation varies sample placement only).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    z = rng.random(count)
    phi = TWO_PI * rng.random(count)
    rho = np.sqrt(1.0 - z * z)
    local = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    dirs = (
        frame.t[None, :] * local[:, 0:1]
        + frame.bt[None, :] * local[:, 1:2]
        + frame.n[None, :] * local[:, 2:3]
    )
    return DirectionSet(directions=dirs, solid_angle=TWO_PI / count)


def fibonacci_directions_batch(count: int, normals: np.ndarray) -> np.ndarray:
    """Fibonacci sets for a batch of normals, shape (N, count, 3)."""
    t, bt = tangent_frames(normals)
    return kernels.fibonacci_directions(count, t, bt, np.ascontiguousarray(normals))


def random_directions_batch(count: int, normals: np.ndarray, rng_seed: int) -> np.ndarray:
    """Seeded uniform hemisphere sets for a batch of normals, (N, count, 3)."""
    n = np.asarray(normals)
    rng = np.random.default_rng(rng_seed)
    z = rng.random((n.shape[0], count), dtype=np.float64)
    phi = TWO_PI * rng.random((n.shape[0], count), dtype=np.float64)
    rho = np.sqrt(1.0 - z * z)
    local = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=2).astype(n.dtype)
    t, bt = tangent_frames(n)
    return kernels.frame_transform_np(local, t, bt, n)
