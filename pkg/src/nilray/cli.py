"""Command line interface: render, animate, probe, serve."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import ConfigError, load_scene_config
from .march import MarchConfig
from .render import render, render_animation, write_png, write_ppm

EXIT_CONFIG = 1
EXIT_IO = 2


def _apply_overrides(cfg: MarchConfig, args) -> MarchConfig:
    fields = {}
    if args.width is not None:
        fields["width"] = args.width
    if args.height is not None:
        fields["height"] = args.height
    if args.fov is not None:
        fields["fov_degrees"] = args.fov
    if getattr(args, "max_steps", None) is not None:
        fields["max_steps"] = args.max_steps
    return dataclasses.replace(cfg, **fields) if fields else cfg


def _load(args):
    scene, cam, cfg, extra = load_scene_config(args.scene)
    if getattr(args, "quotient", False):
        scene = dataclasses.replace(scene) if dataclasses.is_dataclass(scene) else scene
        scene.quotient = True
        for obj in scene.objects:
            from .core import rot_to_heis
            from .quotient import in_domain

            if not in_domain(rot_to_heis(obj.center)):
                raise ConfigError(
                    f"object '{obj.name}' center lies outside the fundamental domain")
    return scene, cam, _apply_overrides(cfg, args), extra


def _write_image(path: str, img, png: bool) -> None:
    try:
        if png or path.endswith(".png"):
            write_png(path, img)
        else:
            write_ppm(path, img)
    except OSError as exc:
        print(f"error: cannot write image: {exc}", file=sys.stderr)
        sys.exit(EXIT_IO)


def _print_stats(stats) -> None:
    print(f"hit_rate={stats.hit_rate:.4f} mean_steps={stats.mean_steps:.2f} "
          f"newton_failures={stats.newton_failures} teleports={stats.teleports}")


def cmd_render(args) -> int:
    scene, cam, cfg, _ = _load(args)
    img, stats = render(scene, cam, cfg, workers=args.workers)
    _write_image(args.out, img, args.png)
    _print_stats(stats)
    return 0


def cmd_animate(args) -> int:
    scene, cam, cfg, extra = _load(args)
    path_spec = extra.get("animation", [])
    os.makedirs(args.out_dir, exist_ok=True)
    for idx, _, img, stats in render_animation(scene, cam, cfg, path_spec,
                                               workers=args.workers):
        name = os.path.join(args.out_dir, f"frame_{idx:04d}.ppm")
        _write_image(name, img, png=False)
    _print_stats(stats)
    return 0


def cmd_probe(args) -> int:
    from . import probes

    try:
        if args.kind == "conjugate":
            hs = np.linspace(args.h_lo, args.h_hi, args.n_h)
            probes.write_conjugate_csv(args.out, hs, n_c=args.n_c)
        elif args.kind == "shortcut":
            probes.write_shortcut_csv(args.out, args.h_lo, args.h_hi, args.n_h,
                                      n_c=args.n_c)
        elif args.kind == "angular":
            pairs = [(h, args.radius) for h in np.linspace(args.h_lo, args.h_hi, args.n_h)]
            probes.write_angular_csv(args.out, pairs)
        elif args.kind == "geodesic-trace":
            diff = probes.write_geodesic_trace_csv(args.out, args.a, args.c, args.t_max)
            print(f"max_discrepancy={diff:.3e}")
        else:
            print(f"error: unknown probe kind {args.kind}", file=sys.stderr)
            return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write CSV: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def cmd_serve(args) -> int:
    import asyncio

    from .server import serve_session

    scene, cam, cfg, _ = _load(args)
    try:
        asyncio.run(serve_session(scene, cam, cfg, host=args.host, port=args.port))
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nilray",
                                 description="Intrinsic rendering of Nil geometry")
    sub = ap.add_subparsers(dest="command", required=True)

    def scene_flags(p):
        p.add_argument("--scene", required=True, help="scene config JSON")
        p.add_argument("--width", type=int, default=None)
        p.add_argument("--height", type=int, default=None)
        p.add_argument("--fov", type=float, default=None)
        p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
        p.add_argument("--quotient", action="store_true",
                       help="render the compact quotient")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("render", help="render a single image")
    scene_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--png", action="store_true", help="write PNG instead of PPM")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("animate", help="render a camera path to numbered frames")
    scene_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_animate)

    p = sub.add_parser("probe", help="run a numerical probe, write CSV")
    p.add_argument("kind", choices=["conjugate", "shortcut", "angular", "geodesic-trace"])
    p.add_argument("--out", required=True)
    p.add_argument("--h-lo", dest="h_lo", type=float, default=4.0)
    p.add_argument("--h-hi", dest="h_hi", type=float, default=16.0)
    p.add_argument("--n-h", dest="n_h", type=int, default=25)
    p.add_argument("--n-c", dest="n_c", type=int, default=400)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.6)
    p.add_argument("--c", type=float, default=0.8)
    p.add_argument("--t-max", dest="t_max", type=float, default=10.0)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("serve", help="interactive session over WebSocket")
    scene_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
