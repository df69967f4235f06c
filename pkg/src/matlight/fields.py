"""Trainable fields: the material field, the incident-light fields and the
pixel-grid environment baseline.

All fields are sinusoidal MLPs over positionally-encoded inputs, carried by
the tape engine in :mod:`matlight.autodiff`. Feeding plain arrays gives a
tape-free inference pass; feeding anything downstream of a parameter records
gradients. The material field additionally exposes forward-mode tangents so
the spatial gradients of roughness and metallic are themselves differentiable
(the smoothness regularizer needs their parameter gradients).
"""

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import autodiff as ad
from .brdf import R_MIN

EXP_CLIP = 80.0  # keeps exp() finite in float32; radiance is still unbounded in practice
INIT_RADIANCE = 0.5  # initial light level; mid-gray starts keep LDR clamps unsaturated


@dataclass
class FieldConfig:
    """Architecture of one sinusoidal MLP field."""

    hidden_layers: int = 8
    width: int = 512
    skip_at: int = 4  # hidden-layer index whose input gets the encoding concatenated; 0 disables
    pe_frequencies: int = 6  # octaves for position inputs
    pe_frequencies_dir: int = 4  # octaves for direction inputs
    output_activation: str = "bounded01"  # "bounded01" | "exponential"
    omega0: float = 30.0

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if not (0 <= self.skip_at < self.hidden_layers):
            raise ValueError("skip_at must satisfy 0 <= skip_at < hidden_layers")
        if self.pe_frequencies < 0 or self.pe_frequencies_dir < 0:
            raise ValueError("encoding frequency counts must be >= 0")
        if self.output_activation not in ("bounded01", "exponential"):
            raise ValueError(f"unknown output_activation {self.output_activation!r}")


def encoding_dim(k: int, freqs: int) -> int:
    return k + 2 * k * freqs


def positional_encoding(v, freqs: int):
    """[v, sin(2^j pi v), cos(2^j pi v)] for j = 0..freqs-1, along the last axis.

    Accepts a Tensor when the caller wants gradients with respect to the
    input coordinates; plain arrays take a fast numpy path.
    """
    if isinstance(v, ad.Tensor):
        if freqs == 0:
            return v
        parts = [v]
        for j in range(freqs):
            f = (2.0 ** j) * math.pi
            parts.append(ad.sine(v, omega=f))
            parts.append(ad.cosine(v, omega=f))
        return ad.concat(parts, axis=-1)
    v = np.asarray(v)
    if freqs == 0:
        return v
    k = v.shape[-1]
    out = np.empty((*v.shape[:-1], encoding_dim(k, freqs)), dtype=v.dtype)
    out[..., :k] = v
    for j in range(freqs):
        base = k + 2 * k * j
        scaled = v * v.dtype.type((2.0 ** j) * math.pi)
        np.sin(scaled, out=out[..., base:base + k])
        np.cos(scaled, out=out[..., base + k:base + 2 * k])
    return out


def encoding_tangents(v: np.ndarray, freqs: int):
    """d(encoding)/d(v_c) for each input coordinate c; list of arrays like the encoding."""
    v = np.asarray(v)
    n, k = v.shape
    dim = encoding_dim(k, freqs)
    tangents = []
    for c in range(k):
        t = np.zeros((n, dim), dtype=v.dtype)
        t[:, c] = 1.0
        for j in range(freqs):
            f = (2.0 ** j) * math.pi
            base = k + 2 * k * j
            t[:, base + c] = f * np.cos(f * v[:, c])
            t[:, base + k + c] = -f * np.sin(f * v[:, c])
        tangents.append(t)
    return tangents


class SirenMLP:
    """Sinusoidal MLP with the matched uniform initialization and a mid-network
    skip concatenation of the encoded input."""

    def __init__(self, in_dim: int, out_dim: int, cfg: FieldConfig, rng: np.random.Generator,
                 dtype=np.float32):
        self.cfg = cfg
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weights = []
        self.biases = []
        w0 = cfg.omega0
        fan = in_dim
        for layer in range(cfg.hidden_layers):
            if layer == cfg.skip_at and layer > 0:
                fan += in_dim
            if layer == 0:
                bound = 1.0 / fan
            else:
                bound = math.sqrt(6.0 / fan) / w0
            self.weights.append(ad.parameter(rng.uniform(-bound, bound, (fan, cfg.width)).astype(dtype)))
            self.biases.append(ad.parameter(np.zeros(cfg.width, dtype=dtype)))
            fan = cfg.width
        bound = math.sqrt(6.0 / fan) / w0
        self.weights.append(ad.parameter(rng.uniform(-bound, bound, (fan, out_dim)).astype(dtype)))
        self.biases.append(ad.parameter(np.zeros(out_dim, dtype=dtype)))

    def named_parameters(self, prefix: str):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.layers.{i}.weight"] = w
            out[f"{prefix}.layers.{i}.bias"] = b
        return out

    def astype(self, dtype):
        for p in (*self.weights, *self.biases):
            p.data = p.data.astype(dtype)
        return self

    def forward(self, enc):
        cfg = self.cfg
        h = enc
        for layer in range(cfg.hidden_layers):
            if layer == cfg.skip_at and layer > 0:
                h = ad.concat([h, enc], axis=-1)
            z = ad.linear(h, self.weights[layer], self.biases[layer])
            h = ad.sine(z, cfg.omega0)
        return ad.linear(h, self.weights[-1], self.biases[-1])

    def forward_with_tangents(self, enc, tangents):
        """Forward pass that also propagates input-tangent streams.

        Every tangent op is itself on the tape, so downstream losses of the
        returned tangents differentiate w.r.t. the weights.
        """
        cfg = self.cfg
        h = enc
        ts = list(tangents)
        enc_tangents = list(tangents)
        for layer in range(cfg.hidden_layers):
            if layer == cfg.skip_at and layer > 0:
                h = ad.concat([h, enc], axis=-1)
                ts = [ad.concat([t, te], axis=-1) for t, te in zip(ts, enc_tangents)]
            w, b = self.weights[layer], self.biases[layer]
            z = ad.linear(h, w, b)
            tz = [ad.matmul(t, w) for t in ts]
            h, deriv = ad.sine_and_deriv(z, cfg.omega0)
            ts = [t * deriv for t in tz]
        w, b = self.weights[-1], self.biases[-1]
        return ad.linear(h, w, b), [ad.matmul(t, w) for t in ts]


# Head-bias init for the material field: mid-gray base color, high roughness,
# low metallic. Starting near the Lambertian prior keeps the first renders from
# blowing out (the specular lobe carries a lot of energy at mid roughness).
_INIT_R_LOGIT = 1.4  # sigmoid -> roughness ~ 0.80
_INIT_M_LOGIT = -3.5  # sigmoid -> metallic ~ 0.03


class BrdfField:
    """Material field x -> (base color, roughness, metallic), squashed into range."""

    def __init__(self, cfg: FieldConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.mlp = SirenMLP(encoding_dim(3, cfg.pe_frequencies), 5, cfg, rng, dtype=dtype)
        self.mlp.biases[-1].data[3] = _INIT_R_LOGIT
        self.mlp.biases[-1].data[4] = _INIT_M_LOGIT

    def named_parameters(self):
        return self.mlp.named_parameters("brdf")

    def astype(self, dtype):
        self.mlp.astype(dtype)
        return self

    def _encode(self, x):
        return positional_encoding(x, self.cfg.pe_frequencies)

    @staticmethod
    def _squash(y):
        b = ad.sigmoid(ad.slice_cols(y, 0, 3))
        r = R_MIN + (1.0 - R_MIN) * ad.sigmoid(ad.slice_cols(y, 3, 4))
        m = ad.sigmoid(ad.slice_cols(y, 4, 5))
        return b, r, m

    def eval(self, x: np.ndarray):
        """(B, 3) positions -> (b (B,3), r (B,1), m (B,1))."""
        return self._squash(self.mlp.forward(self._encode(x)))

    def eval_with_spatial_grads(self, x: np.ndarray):
        """Adds the spatial gradients of r and m, shape (B, 3) each."""
        enc = self._encode(x)
        tangents = encoding_tangents(x, self.cfg.pe_frequencies)
        y, ty = self.mlp.forward_with_tangents(enc, tangents)

        b = ad.sigmoid(ad.slice_cols(y, 0, 3))
        s_r = ad.sigmoid(ad.slice_cols(y, 3, 4))
        s_m = ad.sigmoid(ad.slice_cols(y, 4, 5))
        r = R_MIN + (1.0 - R_MIN) * s_r
        m = s_m
        dr = (1.0 - R_MIN) * s_r * (1.0 - s_r)
        dm = s_m * (1.0 - s_m)
        grad_r = ad.concat([dr * ad.slice_cols(t, 3, 4) for t in ty], axis=-1)
        grad_m = ad.concat([dm * ad.slice_cols(t, 4, 5) for t in ty], axis=-1)
        return b, r, m, grad_r, grad_m


class IncidentLightField:
    """Position- and direction-dependent radiance field {x, w} -> L, exp output."""

    kind = "neilf"

    def __init__(self, cfg: FieldConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        in_dim = encoding_dim(3, cfg.pe_frequencies) + encoding_dim(3, cfg.pe_frequencies_dir)
        self.mlp = SirenMLP(in_dim, 3, cfg, rng, dtype=dtype)
        self.mlp.biases[-1].data[:] = math.log(INIT_RADIANCE)

    def named_parameters(self):
        return self.mlp.named_parameters("light")

    def astype(self, dtype):
        self.mlp.astype(dtype)
        return self

    def radiance(self, x: np.ndarray, dirs: np.ndarray):
        """(M, 3) positions and (M, 3) unit directions -> (M, 3) radiance > 0."""
        enc = ad.concat(
            [positional_encoding(x, self.cfg.pe_frequencies),
             positional_encoding(dirs, self.cfg.pe_frequencies_dir)],
            axis=-1,
        )
        return ad.exp(self.mlp.forward(enc), clip_max=EXP_CLIP)

    def project(self):
        pass


class DirectionalLightField:
    """Direction-only radiance field w -> L; position is absent from the graph."""

    kind = "ne_env"

    def __init__(self, cfg: FieldConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.mlp = SirenMLP(encoding_dim(3, cfg.pe_frequencies_dir), 3, cfg, rng, dtype=dtype)
        self.mlp.biases[-1].data[:] = math.log(INIT_RADIANCE)

    def named_parameters(self):
        return self.mlp.named_parameters("light")

    def astype(self, dtype):
        self.mlp.astype(dtype)
        return self

    def radiance(self, x, dirs: np.ndarray):
        enc = positional_encoding(dirs, self.cfg.pe_frequencies_dir)
        return ad.exp(self.mlp.forward(enc), clip_max=EXP_CLIP)

    def project(self):
        pass


class PixelEnvMap:
    """Directly-optimized lat-long radiance image (azimuth x polar = 32 x 16)."""

    kind = "pix_env"
    WIDTH = 32
    HEIGHT = 16

    def __init__(self, rng=None, init_value=INIT_RADIANCE, width=WIDTH, height=HEIGHT, dtype=np.float32):
        self.grid = ad.parameter(np.full((height, width, 3), init_value, dtype=dtype))

    def named_parameters(self):
        return {"light.grid": self.grid}

    def astype(self, dtype):
        self.grid.data = self.grid.data.astype(dtype)
        return self

    def radiance(self, x, dirs: np.ndarray):
        return ad.env_lookup(self.grid, dirs)

    def project(self):
        """Clamp texels at zero after an optimizer step (feasible-set projection)."""
        np.maximum(self.grid.data, 0.0, out=self.grid.data)


class ConstantBrdfField:
    """A fixed-material stand-in for the learned field (tests, sanity renders)."""

    def __init__(self, base_color, roughness: float, metallic: float):
        self.base_color = np.asarray(base_color, dtype=np.float32).reshape(3)
        self.roughness = float(roughness)
        self.metallic = float(metallic)

    def eval(self, x: np.ndarray):
        n = x.shape[0]
        dt = x.dtype
        return (
            np.tile(self.base_color.astype(dt), (n, 1)),
            np.full((n, 1), self.roughness, dtype=dt),
            np.full((n, 1), self.metallic, dtype=dt),
        )


LIGHTING_KINDS = ("neilf", "ne_env", "pix_env")


def build_lighting(kind: str, cfg: FieldConfig, rng: np.random.Generator, dtype=np.float32):
    if kind == "neilf":
        return IncidentLightField(cfg, rng, dtype=dtype)
    if kind == "ne_env":
        return DirectionalLightField(cfg, rng, dtype=dtype)
    if kind == "pix_env":
        return PixelEnvMap(rng, dtype=dtype)
    raise ValueError(f"unknown lighting kind {kind!r}, expected one of {LIGHTING_KINDS}")
