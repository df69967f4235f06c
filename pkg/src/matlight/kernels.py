"""Hot numeric kernels: numba ``@njit`` implementations and numpy twins.

Kernels with branchy inner loops or scatter/gather (ray tracing, occlusion,
environment lookups, lattice generation) default to numba and fall back to
the numpy implementation when numba is unavailable or MATLIGHT_PURE_NUMPY is
set. The plain transcendental kernels (sine layers, sigmoid) default to the
numpy path outright: numpy's SIMD-vectorized float32 ufuncs beat a scalar
njit loop on AVX machines. ``benchmarks/bench_kernels.py`` times every pair.
"""

import math

import numpy as np

from .accel import NUMBA_ENABLED, njit, prange

GOLDEN_CONJUGATE = (math.sqrt(5.0) - 1.0) / 2.0
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# sine layers
# ---------------------------------------------------------------------------

def sine_forward_np(z: np.ndarray, omega: float) -> np.ndarray:
    out = z * z.dtype.type(omega)
    np.sin(out, out=out)
    return out


@njit(cache=True, fastmath=True)
def _sine_forward_nb(z, omega, out):
    for i in range(z.size):
        out[i] = math.sin(omega * z[i])


def sine_forward(z: np.ndarray, omega: float) -> np.ndarray:
    # numpy's SIMD sin outperforms a scalar njit loop for this op; the numba
    # variant exists for the fallback benchmark comparison.
    return sine_forward_np(z, omega)


def sine_backward_np(z: np.ndarray, omega: float, grad_out: np.ndarray) -> np.ndarray:
    om = z.dtype.type(omega)
    out = z * om
    np.cos(out, out=out)
    out *= grad_out
    out *= om
    return out


@njit(cache=True, fastmath=True)
def _sine_backward_nb(z, omega, grad_out, out):
    for i in range(z.size):
        out[i] = grad_out[i] * omega * math.cos(omega * z[i])


def sine_backward(z: np.ndarray, omega: float, grad_out: np.ndarray) -> np.ndarray:
    return sine_backward_np(z, omega, grad_out)


def sincos_forward_np(z: np.ndarray, omega: float):
    om = z.dtype.type(omega)
    zz = z * om
    s = np.sin(zz)
    np.cos(zz, out=zz)
    zz *= om
    return s, zz


@njit(cache=True, fastmath=True)
def _sincos_forward_nb(z, omega, s, d):
    for i in range(z.size):
        s[i] = math.sin(omega * z[i])
        d[i] = omega * math.cos(omega * z[i])


def sincos_forward(z: np.ndarray, omega: float):
    """sin(omega z) and its derivative omega*cos(omega z)."""
    return sincos_forward_np(z, omega)


# ---------------------------------------------------------------------------
# sigmoid
# ---------------------------------------------------------------------------

def sigmoid_np(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@njit(cache=True)
def _sigmoid_nb(z, out):
    for i in range(z.size):
        v = z[i]
        if v >= 0:
            out[i] = 1.0 / (1.0 + math.exp(-v))
        else:
            e = math.exp(v)
            out[i] = e / (1.0 + e)


def sigmoid(z: np.ndarray) -> np.ndarray:
    if not NUMBA_ENABLED:
        return sigmoid_np(z)
    zc = np.ascontiguousarray(z)
    out = np.empty_like(zc)
    _sigmoid_nb(zc.reshape(-1), out.reshape(-1))
    return out


# ---------------------------------------------------------------------------
# hemisphere direction batches
# ---------------------------------------------------------------------------

def fibonacci_directions_np(count: int, t: np.ndarray, bt: np.ndarray, n: np.ndarray) -> np.ndarray:
    dtype = n.dtype
    k = np.arange(count, dtype=dtype)
    z = (k + dtype.type(0.5)) / dtype.type(count)
    phi = (TWO_PI * GOLDEN_CONJUGATE * k) % TWO_PI
    rho = np.sqrt(1.0 - z * z)
    lx = (rho * np.cos(phi)).astype(dtype)
    ly = (rho * np.sin(phi)).astype(dtype)
    lz = z.astype(dtype)
    return (
        t[:, None, :] * lx[None, :, None]
        + bt[:, None, :] * ly[None, :, None]
        + n[:, None, :] * lz[None, :, None]
    )


@njit(cache=True, fastmath=True)
def _fibonacci_directions_nb(count, t, bt, n, out):
    for i in prange(n.shape[0]):
        for s in range(count):
            z = (s + 0.5) / count
            phi = (TWO_PI * GOLDEN_CONJUGATE * s) % TWO_PI
            rho = math.sqrt(1.0 - z * z)
            lx = rho * math.cos(phi)
            ly = rho * math.sin(phi)
            for c in range(3):
                out[i, s, c] = t[i, c] * lx + bt[i, c] * ly + n[i, c] * z


def fibonacci_directions(count: int, t: np.ndarray, bt: np.ndarray, n: np.ndarray) -> np.ndarray:
    if not NUMBA_ENABLED:
        return fibonacci_directions_np(count, t, bt, n)
    out = np.empty((n.shape[0], count, 3), dtype=n.dtype)
    _fibonacci_directions_nb(count, t, bt, n, out)
    return out


def frame_transform_np(local: np.ndarray, t: np.ndarray, bt: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Map per-point local hemisphere coordinates (N,S,3) into world space."""
    return (
        t[:, None, :] * local[:, :, 0:1]
        + bt[:, None, :] * local[:, :, 1:2]
        + n[:, None, :] * local[:, :, 2:3]
    )


# ---------------------------------------------------------------------------
# lat-long environment grid lookup (bilinear, azimuthal wraparound)
# ---------------------------------------------------------------------------

def _latlong_coords(dirs: np.ndarray, height: int, width: int):
    u = np.arctan2(dirs[:, 1], dirs[:, 0]) / TWO_PI
    u = u - np.floor(u)
    v = np.arccos(np.clip(dirs[:, 2], -1.0, 1.0)) / math.pi
    fx = u * width - 0.5
    fy = v * height - 0.5
    x0f = np.floor(fx)
    y0f = np.floor(fy)
    wx = fx - x0f
    wy = fy - y0f
    x0 = (x0f.astype(np.int64)) % width
    x1 = (x0 + 1) % width
    y0 = np.clip(y0f.astype(np.int64), 0, height - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, height - 1)
    return x0, x1, y0, y1, wx, wy


def env_lookup_np(grid: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    height, width = grid.shape[0], grid.shape[1]
    x0, x1, y0, y1, wx, wy = _latlong_coords(dirs, height, width)
    wx = wx[:, None]
    wy = wy[:, None]
    return (
        grid[y0, x0] * (1 - wx) * (1 - wy)
        + grid[y0, x1] * wx * (1 - wy)
        + grid[y1, x0] * (1 - wx) * wy
        + grid[y1, x1] * wx * wy
    ).astype(grid.dtype)


@njit(cache=True)
def _env_lookup_nb(grid, dirs, out):
    height, width = grid.shape[0], grid.shape[1]
    for i in prange(dirs.shape[0]):
        u = math.atan2(dirs[i, 1], dirs[i, 0]) / TWO_PI
        u = u - math.floor(u)
        cz = dirs[i, 2]
        if cz > 1.0:
            cz = 1.0
        elif cz < -1.0:
            cz = -1.0
        v = math.acos(cz) / math.pi
        fx = u * width - 0.5
        fy = v * height - 0.5
        x0f = math.floor(fx)
        y0f = math.floor(fy)
        wx = fx - x0f
        wy = fy - y0f
        x0 = int(x0f) % width
        x1 = (x0 + 1) % width
        y0 = int(y0f)
        if y0 < 0:
            y0 = 0
        elif y0 > height - 1:
            y0 = height - 1
        y1 = int(y0f) + 1
        if y1 < 0:
            y1 = 0
        elif y1 > height - 1:
            y1 = height - 1
        for c in range(3):
            out[i, c] = (
                grid[y0, x0, c] * (1 - wx) * (1 - wy)
                + grid[y0, x1, c] * wx * (1 - wy)
                + grid[y1, x0, c] * (1 - wx) * wy
                + grid[y1, x1, c] * wx * wy
            )


def env_lookup(grid: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    if not NUMBA_ENABLED:
        return env_lookup_np(grid, dirs)
    out = np.empty((dirs.shape[0], 3), dtype=grid.dtype)
    _env_lookup_nb(grid, np.ascontiguousarray(dirs), out)
    return out


def env_lookup_backward_np(grid_shape, dirs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    height, width = grid_shape[0], grid_shape[1]
    x0, x1, y0, y1, wx, wy = _latlong_coords(dirs, height, width)
    wx = wx[:, None]
    wy = wy[:, None]
    grad = np.zeros(grid_shape, dtype=grad_out.dtype)
    np.add.at(grad, (y0, x0), grad_out * (1 - wx) * (1 - wy))
    np.add.at(grad, (y0, x1), grad_out * wx * (1 - wy))
    np.add.at(grad, (y1, x0), grad_out * (1 - wx) * wy)
    np.add.at(grad, (y1, x1), grad_out * wx * wy)
    return grad


@njit(cache=True)
def _env_lookup_backward_nb(grad, dirs, grad_out):
    height, width = grad.shape[0], grad.shape[1]
    for i in range(dirs.shape[0]):  # serial: scatter-add must stay deterministic
        u = math.atan2(dirs[i, 1], dirs[i, 0]) / TWO_PI
        u = u - math.floor(u)
        cz = dirs[i, 2]
        if cz > 1.0:
            cz = 1.0
        elif cz < -1.0:
            cz = -1.0
        v = math.acos(cz) / math.pi
        fx = u * width - 0.5
        fy = v * height - 0.5
        x0f = math.floor(fx)
        y0f = math.floor(fy)
        wx = fx - x0f
        wy = fy - y0f
        x0 = int(x0f) % width
        x1 = (x0 + 1) % width
        y0 = int(y0f)
        if y0 < 0:
            y0 = 0
        elif y0 > height - 1:
            y0 = height - 1
        y1 = int(y0f) + 1
        if y1 < 0:
            y1 = 0
        elif y1 > height - 1:
            y1 = height - 1
        for c in range(3):
            g = grad_out[i, c]
            grad[y0, x0, c] += g * (1 - wx) * (1 - wy)
            grad[y0, x1, c] += g * wx * (1 - wy)
            grad[y1, x0, c] += g * (1 - wx) * wy
            grad[y1, x1, c] += g * wx * wy


def env_lookup_backward(grid_shape, dirs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    if not NUMBA_ENABLED:
        return env_lookup_backward_np(grid_shape, dirs, grad_out)
    grad = np.zeros(grid_shape, dtype=grad_out.dtype)
    _env_lookup_backward_nb(grad, np.ascontiguousarray(dirs), np.ascontiguousarray(grad_out))
    return grad


# ---------------------------------------------------------------------------
# ray intersection tests (spheres as (cx,cy,cz,r), planes as disks
# (px,py,pz,nx,ny,nz,radius))
# ---------------------------------------------------------------------------

MISS = -1
KIND_SPHERE = 0
KIND_PLANE = 1

_RAY_EPS = 1e-6


def trace_rays_np(origins: np.ndarray, dirs: np.ndarray, spheres: np.ndarray, planes: np.ndarray):
    m = origins.shape[0]
    best_t = np.full(m, np.inf)
    kind = np.full(m, MISS, dtype=np.int8)
    index = np.zeros(m, dtype=np.int32)
    for i in range(spheres.shape[0]):
        oc = origins - spheres[i, :3]
        b = np.sum(oc * dirs, axis=1)
        c = np.sum(oc * oc, axis=1) - spheres[i, 3] ** 2
        disc = b * b - c
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > _RAY_EPS, t0, t1)
        hit = ok & (t > _RAY_EPS) & (t < best_t)
        best_t = np.where(hit, t, best_t)
        kind = np.where(hit, np.int8(KIND_SPHERE), kind)
        index = np.where(hit, np.int32(i), index)
    for i in range(planes.shape[0]):
        p0, nrm, rad = planes[i, :3], planes[i, 3:6], planes[i, 6]
        denom = dirs @ nrm
        ok = np.abs(denom) > 1e-12
        t = np.where(ok, ((p0 - origins) @ nrm) / np.where(ok, denom, 1.0), np.inf)
        hit_pt = origins + dirs * t[:, None]
        within = np.sum((hit_pt - p0) ** 2, axis=1) <= rad * rad
        hit = ok & (t > _RAY_EPS) & (t < best_t) & within
        best_t = np.where(hit, t, best_t)
        kind = np.where(hit, np.int8(KIND_PLANE), kind)
        index = np.where(hit, np.int32(i), index)
    return best_t, kind, index


@njit(cache=True, fastmath=True)
def _trace_rays_nb(origins, dirs, spheres, planes, best_t, kind, index):
    for r in prange(origins.shape[0]):
        bt = np.inf
        bk = MISS
        bi = 0
        for i in range(spheres.shape[0]):
            ocx = origins[r, 0] - spheres[i, 0]
            ocy = origins[r, 1] - spheres[i, 1]
            ocz = origins[r, 2] - spheres[i, 2]
            b = ocx * dirs[r, 0] + ocy * dirs[r, 1] + ocz * dirs[r, 2]
            c = ocx * ocx + ocy * ocy + ocz * ocz - spheres[i, 3] * spheres[i, 3]
            disc = b * b - c
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            t = -b - sq
            if t <= _RAY_EPS:
                t = -b + sq
            if _RAY_EPS < t < bt:
                bt = t
                bk = KIND_SPHERE
                bi = i
        for i in range(planes.shape[0]):
            denom = dirs[r, 0] * planes[i, 3] + dirs[r, 1] * planes[i, 4] + dirs[r, 2] * planes[i, 5]
            if abs(denom) <= 1e-12:
                continue
            t = (
                (planes[i, 0] - origins[r, 0]) * planes[i, 3]
                + (planes[i, 1] - origins[r, 1]) * planes[i, 4]
                + (planes[i, 2] - origins[r, 2]) * planes[i, 5]
            ) / denom
            if t <= _RAY_EPS or t >= bt:
                continue
            hx = origins[r, 0] + dirs[r, 0] * t - planes[i, 0]
            hy = origins[r, 1] + dirs[r, 1] * t - planes[i, 1]
            hz = origins[r, 2] + dirs[r, 2] * t - planes[i, 2]
            if hx * hx + hy * hy + hz * hz <= planes[i, 6] * planes[i, 6]:
                bt = t
                bk = KIND_PLANE
                bi = i
        best_t[r] = bt
        kind[r] = bk
        index[r] = bi


def trace_rays(origins: np.ndarray, dirs: np.ndarray, spheres: np.ndarray, planes: np.ndarray):
    if not NUMBA_ENABLED:
        return trace_rays_np(origins, dirs, spheres, planes)
    m = origins.shape[0]
    best_t = np.empty(m)
    kind = np.empty(m, dtype=np.int8)
    index = np.empty(m, dtype=np.int32)
    _trace_rays_nb(
        np.ascontiguousarray(origins), np.ascontiguousarray(dirs), spheres, planes, best_t, kind, index
    )
    return best_t, kind, index


def occluded_np(origins: np.ndarray, dirs: np.ndarray, tmax: np.ndarray,
                spheres: np.ndarray, planes: np.ndarray) -> np.ndarray:
    t, kind, _ = trace_rays_np(origins, dirs, spheres, planes)
    return (kind != MISS) & (t < tmax)


@njit(cache=True, fastmath=True)
def _occluded_nb(origins, dirs, tmax, spheres, planes, out):
    for r in prange(origins.shape[0]):
        blocked = False
        for i in range(spheres.shape[0]):
            ocx = origins[r, 0] - spheres[i, 0]
            ocy = origins[r, 1] - spheres[i, 1]
            ocz = origins[r, 2] - spheres[i, 2]
            b = ocx * dirs[r, 0] + ocy * dirs[r, 1] + ocz * dirs[r, 2]
            c = ocx * ocx + ocy * ocy + ocz * ocz - spheres[i, 3] * spheres[i, 3]
            disc = b * b - c
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            t = -b - sq
            if t <= _RAY_EPS:
                t = -b + sq
            if _RAY_EPS < t < tmax[r]:
                blocked = True
                break
        if not blocked:
            for i in range(planes.shape[0]):
                denom = dirs[r, 0] * planes[i, 3] + dirs[r, 1] * planes[i, 4] + dirs[r, 2] * planes[i, 5]
                if abs(denom) <= 1e-12:
                    continue
                t = (
                    (planes[i, 0] - origins[r, 0]) * planes[i, 3]
                    + (planes[i, 1] - origins[r, 1]) * planes[i, 4]
                    + (planes[i, 2] - origins[r, 2]) * planes[i, 5]
                ) / denom
                if t <= _RAY_EPS or t >= tmax[r]:
                    continue
                hx = origins[r, 0] + dirs[r, 0] * t - planes[i, 0]
                hy = origins[r, 1] + dirs[r, 1] * t - planes[i, 1]
                hz = origins[r, 2] + dirs[r, 2] * t - planes[i, 2]
                if hx * hx + hy * hy + hz * hz <= planes[i, 6] * planes[i, 6]:
                    blocked = True
                    break
        out[r] = blocked


def occluded(origins: np.ndarray, dirs: np.ndarray, tmax: np.ndarray,
             spheres: np.ndarray, planes: np.ndarray) -> np.ndarray:
    if not NUMBA_ENABLED:
        return occluded_np(origins, dirs, tmax, spheres, planes)
    out = np.empty(origins.shape[0], dtype=np.bool_)
    _occluded_nb(
        np.ascontiguousarray(origins), np.ascontiguousarray(dirs), np.ascontiguousarray(tmax),
        spheres, planes, out,
    )
    return out
