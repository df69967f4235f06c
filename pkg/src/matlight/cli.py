"""Command-line entry points: synth, train, eval, export-brdf, probe-light."""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import oracle
from .checkpoint import load_checkpoint, restore_models
from .dataset import load_scene
from .imageio import write_pfm
from .metrics import evaluate, export_brdf_maps, probe_light, write_report
from .trainer import TrainConfig, preset, train


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--preset", choices=("paper", "desk"), default="desk",
                   help="base configuration; individual flags override it")
    p.add_argument("--iters", type=int, help="total training iterations")
    p.add_argument("--batch", type=int, help="pixels per iteration")
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--decay-iters", type=str, help="comma-separated decay milestones")
    p.add_argument("--decay-factor", type=float, help="learning-rate decay multiplier")
    p.add_argument("--samples", type=int, help="incident-light samples during training")
    p.add_argument("--eval-samples", type=int, help="incident-light samples at evaluation")
    p.add_argument("--sampler", choices=("fibonacci", "random"), help="hemisphere sampler")
    p.add_argument("--lighting", choices=("neilf", "ne_env", "pix_env"), help="lighting model")
    p.add_argument("--w-s", type=float, help="smoothness weight")
    p.add_argument("--w-l", type=float, help="Lambertian-prior weight")
    p.add_argument("--w-image", type=float, help="image-loss weight")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--fresnel", choices=("printed", "schlick"), help="Fresnel falloff form")
    p.add_argument("--checkpoint-every", type=int, help="periodic checkpoint cadence (0 disables)")
    p.add_argument("--brdf-layers", type=int, help="material-field hidden layers")
    p.add_argument("--brdf-width", type=int, help="material-field width")
    p.add_argument("--brdf-skip", type=int, help="material-field skip layer (0 disables)")
    p.add_argument("--light-layers", type=int, help="light-field hidden layers")
    p.add_argument("--light-width", type=int, help="light-field width")
    p.add_argument("--light-skip", type=int, help="light-field skip layer (0 disables)")
    p.add_argument("--pe-x", type=int, help="position encoding octaves")
    p.add_argument("--pe-dir", type=int, help="direction encoding octaves")
    p.add_argument("--verbose", action="store_true", help="print periodic progress")


def _train_config(args) -> tuple:
    overrides = {}
    mapping = {
        "iters": "total_iters", "batch": "batch_size", "lr": "lr_init",
        "decay_factor": "decay_factor", "samples": "train_samples",
        "eval_samples": "eval_samples", "sampler": "sampler_kind",
        "lighting": "lighting_kind", "w_s": "w_s", "w_l": "w_l", "w_image": "w_image",
        "seed": "seed", "fresnel": "fresnel_form", "checkpoint_every": "checkpoint_every",
    }
    for arg_name, cfg_name in mapping.items():
        val = getattr(args, arg_name)
        if val is not None:
            overrides[cfg_name] = val
    if args.decay_iters is not None:
        overrides["decay_iters"] = tuple(int(v) for v in args.decay_iters.split(","))
    cfg, brdf_cfg, light_cfg = preset(args.preset, **overrides)

    brdf_over = {}
    light_over = {}
    for arg_name, target, key in (
        ("brdf_layers", "brdf", "hidden_layers"), ("brdf_width", "brdf", "width"),
        ("brdf_skip", "brdf", "skip_at"), ("light_layers", "light", "hidden_layers"),
        ("light_width", "light", "width"), ("light_skip", "light", "skip_at"),
    ):
        val = getattr(args, arg_name)
        if val is not None:
            (brdf_over if target == "brdf" else light_over)[key] = val
    if args.pe_x is not None:
        brdf_over["pe_frequencies"] = args.pe_x
        light_over["pe_frequencies"] = args.pe_x
    if args.pe_dir is not None:
        brdf_over["pe_frequencies_dir"] = args.pe_dir
        light_over["pe_frequencies_dir"] = args.pe_dir
    if brdf_over:
        brdf_cfg = dataclasses.replace(brdf_cfg, **brdf_over)
    if light_over:
        light_cfg = dataclasses.replace(light_cfg, **light_over)
    return cfg, brdf_cfg, light_cfg


def _cmd_synth(args) -> int:
    scene = oracle.make_scene(args.scene, lights=args.lights)
    out = oracle.generate_dataset(
        scene, args.out, views=args.views, resolution=args.res, spp=args.spp,
        holdout_k=args.holdout_k, color_space=args.color_space)
    print(f"wrote {args.views} views to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg, brdf_cfg, light_cfg = _train_config(args)
    scene = load_scene(args.data)
    result = train(scene, cfg, args.out, brdf_cfg=brdf_cfg, light_cfg=light_cfg,
                   quiet=not args.verbose)
    print(f"final checkpoint: {result.checkpoint_path}")
    print(f"metrics log: {result.metrics_path}")
    print(f"final total loss: {result.final_total:.6f}")
    return 0


def _cmd_eval(args) -> int:
    scene = load_scene(args.data)
    ckpt = load_checkpoint(args.ckpt)
    brdf_field, lighting, tonemap_params = restore_models(ckpt)
    report = evaluate(scene, brdf_field, lighting, tonemap_params,
                      eval_samples=args.eval_samples, fresnel_form=ckpt.fresnel_form)
    print(report.to_text())
    out = args.out or os.path.join(os.path.dirname(args.ckpt) or ".", "report.json")
    write_report(report, out)
    print(f"report written to {out}")
    return 0


def _cmd_export_brdf(args) -> int:
    scene = load_scene(args.data)
    ckpt = load_checkpoint(args.ckpt)
    brdf_field, _, _ = restore_models(ckpt)
    if args.views == "all":
        ids = sorted(scene.views)
    elif args.views in ("train", "test"):
        ids = scene.train_ids if args.views == "train" else scene.test_ids
    else:
        ids = [int(v) for v in args.views.split(",")]
    written = export_brdf_maps(scene, brdf_field, ids, args.out)
    print(f"wrote material maps for {len(written)} view(s) to {args.out}")
    return 0


def _cmd_probe_light(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    _, lighting, _ = restore_models(ckpt)
    x = np.array([float(v) for v in args.x.split(",")])
    if x.shape != (3,):
        raise ValueError("--x expects three comma-separated coordinates")
    image = probe_light(lighting, x, resolution=args.res)
    write_pfm(args.out, image)
    print(f"wrote {image.shape[1]}x{image.shape[0]} probe to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matlight",
        description="Joint material and incident-light estimation from posed multi-view images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate an analytic synthetic dataset")
    p.add_argument("--scene", choices=oracle.SCENE_NAMES, default="sphere-plane")
    p.add_argument("--lights", choices=("env", "mixed"), default="env")
    p.add_argument("--views", type=int, default=12)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--spp", type=int, default=512, help="environment samples per pixel")
    p.add_argument("--holdout-k", type=int, default=4, help="hold out every k-th view")
    p.add_argument("--color-space", choices=("hdr", "ldr"), default="hdr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="optimize material and lighting on a scene")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score held-out views of a trained run")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--eval-samples", type=int, default=256)
    p.add_argument("--out", help="report path (defaults next to the checkpoint)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export-brdf", help="write per-view material maps")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--views", default="all", help="'all', 'train', 'test' or comma ids")
    p.set_defaults(func=_cmd_export_brdf)

    p = sub.add_parser("probe-light", help="sample the incident light at a point")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--x", required=True, help="probe position as 'x,y,z' (normalized coords)")
    p.add_argument("--res", type=int, default=64, help="probe width; height is half")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_probe_light)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a structured one-line error, nonzero exit
        print(f"matlight: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
