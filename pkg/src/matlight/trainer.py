"""The optimization loop: Adam over all trainable tensors, the stepped
learning-rate schedule, loss assembly, metrics logging and checkpoints."""

import json
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .checkpoint import save_checkpoint
from .dataset import SceneDataset, sample_batch
from .fields import FieldConfig, BrdfField, build_lighting, LIGHTING_KINDS
from .losses import LossWeights, image_l1, lambertian_loss, smoothness_loss, total_loss
from .renderer import SAMPLER_KINDS, TonemapParams, render_batch, tonemap


class TrainDivergence(RuntimeError):
    """Non-finite loss or gradients; message carries iteration and batch seed."""


@dataclass
class TrainConfig:
    total_iters: int = 15000
    batch_size: int = 16000
    lr_init: float = 1e-3
    decay_factor: float = math.sqrt(0.1)
    decay_iters: tuple = (5000, 10000)
    train_samples: int = 128
    eval_samples: int = 256
    sampler_kind: str = "fibonacci"
    lighting_kind: str = "neilf"
    w_s: float = 1e-4
    w_l: float = 1e-3
    w_image: float = 1.0
    seed: int = 0
    fresnel_form: str = "printed"
    checkpoint_every: int = 500

    def __post_init__(self):
        self.decay_iters = tuple(int(i) for i in self.decay_iters)
        counts = (self.total_iters, self.batch_size, self.train_samples, self.eval_samples)
        if any(c < 1 for c in counts):
            raise ValueError("iteration, batch and sample counts must be >= 1")
        if self.lr_init <= 0:
            raise ValueError("lr_init must be positive")
        if list(self.decay_iters) != sorted(set(self.decay_iters)) or any(
                not 0 < i < self.total_iters for i in self.decay_iters):
            raise ValueError("decay_iters must be strictly increasing and inside (0, total_iters)")
        if self.sampler_kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler_kind must be one of {SAMPLER_KINDS}")
        if self.lighting_kind not in LIGHTING_KINDS:
            raise ValueError(f"lighting_kind must be one of {LIGHTING_KINDS}")


@dataclass
class AdamState:
    """First/second moments for one parameter tensor (beta1=0.9, beta2=0.999, eps=1e-8)."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, values: np.ndarray):
        return cls(m=np.zeros_like(values), v=np.zeros_like(values))


def adam_step(values: np.ndarray, grads: np.ndarray, state: AdamState, lr: float):
    """Bias-corrected Adam update, in place. Returns the updated values/state."""
    if grads.shape != values.shape:
        raise ValueError(f"gradient shape {grads.shape} does not match parameter {values.shape}")
    if not np.all(np.isfinite(grads)):
        raise TrainDivergence("non-finite gradient passed to adam_step")
    state.step += 1
    state.m += (1.0 - state.beta1) * (grads - state.m)
    state.v += (1.0 - state.beta2) * (grads * grads - state.v)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    values -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(values.dtype)
    return values, state


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """Piecewise-constant schedule: lr_init scaled by decay_factor at each milestone."""
    if not 0 <= iteration < cfg.total_iters:
        raise ValueError(f"iteration {iteration} outside [0, {cfg.total_iters})")
    drops = sum(1 for it in cfg.decay_iters if iteration >= it)
    return cfg.lr_init * cfg.decay_factor ** drops


# -- presets ----------------------------------------------------------------

PAPER_BRDF_CONFIG = FieldConfig(hidden_layers=8, width=512, skip_at=4,
                                pe_frequencies=6, pe_frequencies_dir=4)
PAPER_LIGHT_CONFIG = FieldConfig(hidden_layers=8, width=128, skip_at=4,
                                 pe_frequencies=6, pe_frequencies_dir=4,
                                 output_activation="exponential")
DESK_BRDF_CONFIG = FieldConfig(hidden_layers=4, width=64, skip_at=2,
                               pe_frequencies=6, pe_frequencies_dir=4)
# desk light field: no mid-network skip (a 4-layer net gains nothing from it
# and the concat is the widest array in the training loop). Position octaves
# stay low so the incident light varies smoothly in space: occlusion and
# near-light falloff are low-frequency, and limiting positional wiggle keeps
# the field from absorbing per-region material errors.
DESK_LIGHT_CONFIG = FieldConfig(hidden_layers=4, width=64, skip_at=0,
                                pe_frequencies=4, pe_frequencies_dir=4,
                                output_activation="exponential")


def preset(name: str, **overrides):
    """(TrainConfig, brdf FieldConfig, light FieldConfig) for 'paper' or 'desk'.

    The desk preset shrinks the run to workstation scale: 2000 iterations,
    batch 2048, 64/128 light samples, decay milestones at 1/3 and 2/3.
    """
    if name == "paper":
        cfg = TrainConfig(**overrides)
        return cfg, PAPER_BRDF_CONFIG, PAPER_LIGHT_CONFIG
    if name == "desk":
        total = int(overrides.pop("total_iters", 2000))
        defaults = dict(
            total_iters=total, batch_size=2048, train_samples=64, eval_samples=128,
            decay_iters=(max(total // 3, 1), max(2 * total // 3, 2)),
        )
        defaults.update(overrides)
        cfg = TrainConfig(**defaults)
        return cfg, DESK_BRDF_CONFIG, DESK_LIGHT_CONFIG
    raise ValueError(f"unknown preset {name!r}, expected 'paper' or 'desk'")


@dataclass
class ModelBundle:
    brdf_field: BrdfField
    lighting: object
    tonemap_params: TonemapParams
    color_space: str

    def named_parameters(self):
        out = {}
        out.update(self.brdf_field.named_parameters())
        out.update(self.lighting.named_parameters())
        out.update(self.tonemap_params.named_parameters())
        return out

    def trainable_parameters(self):
        out = {}
        out.update(self.brdf_field.named_parameters())
        out.update(self.lighting.named_parameters())
        if self.color_space == "ldr":  # gamma is learned only for LDR inputs
            out.update(self.tonemap_params.named_parameters())
        return out

    def astype(self, dtype):
        self.brdf_field.astype(dtype)
        self.lighting.astype(dtype)
        self.tonemap_params.astype(dtype)
        return self


def build_models(cfg: TrainConfig, brdf_cfg: FieldConfig, light_cfg: FieldConfig,
                 color_space: str, dtype=np.float32) -> ModelBundle:
    """Seeded model construction; the init draws derive from cfg.seed."""
    ss = np.random.SeedSequence(cfg.seed)
    brdf_seed, light_seed = ss.spawn(2)
    brdf_field = BrdfField(brdf_cfg, np.random.default_rng(brdf_seed), dtype=dtype)
    lighting = build_lighting(cfg.lighting_kind, light_cfg, np.random.default_rng(light_seed),
                              dtype=dtype)
    gamma = 1.0 / 2.2 if color_space == "ldr" else 1.0
    return ModelBundle(brdf_field=brdf_field, lighting=lighting,
                       tonemap_params=TonemapParams(gamma, dtype=dtype), color_space=color_space)


def train_losses(models: ModelBundle, batch, cfg: TrainConfig, weights: LossWeights,
                 dir_seed=None):
    """One forward pass: renders the batch and assembles every loss term."""
    b, r, m, grad_r, grad_m = models.brdf_field.eval_with_spatial_grads(batch.x)
    hdr = render_batch(batch.x, batch.n, batch.omega_o, (b, r, m), models.lighting,
                       cfg.train_samples, sampler_kind=cfg.sampler_kind, rng_seed=dir_seed,
                       fresnel_form=cfg.fresnel_form)
    rendered = tonemap(hdr, models.tonemap_params) if models.color_space == "ldr" else hdr
    l_img = image_l1(batch.observed, rendered)
    l_smooth = smoothness_loss(grad_r, grad_m, batch.grad_mag)
    l_lamb = lambertian_loss(r, m)
    total = total_loss(l_img, l_smooth, l_lamb, weights, w_image=cfg.w_image)
    return total, l_img, l_smooth, l_lamb


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    final_total: float
    iterations: int


def train(scene: SceneDataset, cfg: TrainConfig, out_dir: str,
          brdf_cfg: FieldConfig = None, light_cfg: FieldConfig = None,
          models: ModelBundle = None, quiet: bool = True) -> TrainResult:
    """Run the full optimization and write metrics plus checkpoints to out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    brdf_cfg = brdf_cfg or DESK_BRDF_CONFIG
    light_cfg = light_cfg or DESK_LIGHT_CONFIG
    if models is None:
        models = build_models(cfg, brdf_cfg, light_cfg, scene.color_space)
    weights = LossWeights(w_s=cfg.w_s, w_l=cfg.w_l)
    params = models.trainable_parameters()
    states = {name: AdamState.for_param(p.data) for name, p in params.items()}
    rng = np.random.default_rng(cfg.seed)

    metrics_path = os.path.join(out_dir, "metrics.ndjson")
    final_path = os.path.join(out_dir, "final")
    final_total = math.nan

    def write_ckpt(path, iteration):
        save_checkpoint(path, iteration, cfg.lighting_kind, scene.color_space, cfg.fresnel_form,
                        brdf_cfg, light_cfg, models.named_parameters())

    with open(metrics_path, "w") as log:
        for iteration in range(cfg.total_iters):
            t0 = time.perf_counter()
            lr = lr_at(iteration, cfg)
            batch = sample_batch(scene, cfg.batch_size, rng)
            dir_seed = int(rng.integers(0, 2 ** 31)) if cfg.sampler_kind == "random" else None

            total, l_img, l_smooth, l_lamb = train_losses(models, batch, cfg, weights, dir_seed)
            total_val = float(ad.value(total))
            if not math.isfinite(total_val):
                raise TrainDivergence(
                    f"non-finite loss at iteration {iteration} (run seed {cfg.seed})")

            for p in params.values():
                p.zero_grad()
            try:
                ad.backward(total, check_finite=True)
            except ad.GradientError as exc:
                raise TrainDivergence(
                    f"{exc} at iteration {iteration} (run seed {cfg.seed})") from exc
            for name, p in params.items():
                adam_step(p.data, p.grad, states[name], lr)
            models.lighting.project()

            record = {
                "iter": iteration,
                "lr": lr,
                "l_image": float(ad.value(l_img)),
                "l_smooth": float(ad.value(l_smooth)),
                "l_lambertian": float(ad.value(l_lamb)),
                "total": total_val,
                "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
            }
            log.write(json.dumps(record) + "\n")
            final_total = total_val

            done = iteration + 1
            if cfg.checkpoint_every and done % cfg.checkpoint_every == 0 and done < cfg.total_iters:
                write_ckpt(os.path.join(out_dir, f"ckpt_{done:06d}"), done)
            if not quiet and (done % max(cfg.total_iters // 20, 1) == 0 or done == 1):
                print(f"[{done}/{cfg.total_iters}] lr={lr:.2e} total={total_val:.5f}", flush=True)

    write_ckpt(final_path, cfg.total_iters)
    return TrainResult(checkpoint_path=final_path, metrics_path=metrics_path,
                       final_total=final_total, iterations=cfg.total_iters)
