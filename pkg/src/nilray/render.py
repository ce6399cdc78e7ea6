"""Image assembly: per-pixel marching and shading over fixed row blocks.

Blocks are a fixed partition of the image (independent of worker count), and
every pixel is a pure function of the scene, camera, and config, so serial
and process-parallel renders produce byte-identical images.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import march as m
from . import quotient as q
from .geodesic import CameraState, flow_state
from .scene import Scene

__all__ = [
    "render",
    "render_animation",
    "to_u8",
    "write_ppm",
    "write_png",
    "png_bytes",
]

_BLOCK_ROWS = 16

_worker_ctx = {}


def _render_block(scene: Scene, cam: CameraState, cfg: m.MarchConfig, rows):
    """Render a block of rows; returns (rgb block, stats, aux arrays)."""
    dirs = m.pixel_grid_tangents(cam, cfg, rows)
    stats = m.RenderStats(rays=dirs.shape[0])
    if scene.quotient:
        out = q.march_quotient_batch(scene, cam.p, dirs, cfg)
        stats.teleports += int(out["teleports"].sum())
    else:
        out = m.march_batch(scene, cam.p, dirs, cfg)
    stats.hits = int(out["hit"].sum())
    stats.total_steps = int(out["steps"].sum())

    colors = m.background_colors(out["direction"], scene.background)
    hit = out["hit"]
    if np.any(hit):
        marcher = q.march_quotient_batch if scene.quotient else None
        colors[hit] = m.shade_batch(
            scene, out["point"][hit], out["direction"][hit],
            out["object_id"][hit], cfg, stats=stats,
            shadow_marcher=marcher,
        )
    block = colors.reshape(len(rows), cfg.width, 3)
    aux = {
        "hit": hit.reshape(len(rows), cfg.width),
        "t": out["t"].reshape(len(rows), cfg.width),
    }
    if scene.quotient:
        aux["lattice_element"] = out["lattice_element"].reshape(len(rows), cfg.width, 3)
    return block, stats, aux


def _block_worker(args):
    scene, cam, cfg, rows = args
    return _render_block(scene, cam, cfg, rows)


def render(scene: Scene, cam: CameraState, cfg: m.MarchConfig, workers: int = 1,
           return_aux: bool = False):
    """Render the full image; deterministic for any worker count.

    With supersampling enabled the image is rendered at twice the pixel
    grid and box-averaged down.
    """
    if cfg.supersample:
        big = m.MarchConfig(**{**cfg.__dict__, "width": cfg.width * 2,
                               "height": cfg.height * 2, "supersample": False})
        img, stats, aux = render(scene, cam, big, workers, return_aux=True)
        img = 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])
        if return_aux:
            return img, stats, aux
        return img, stats

    blocks = [np.arange(r, min(r + _BLOCK_ROWS, cfg.height))
              for r in range(0, cfg.height, _BLOCK_ROWS)]
    tasks = [(scene, cam, cfg, rows) for rows in blocks]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_block_worker, tasks))
    else:
        results = [_block_worker(t) for t in tasks]

    img = np.vstack([r[0] for r in results])
    stats = m.RenderStats()
    for r in results:
        stats.merge(r[1])
    if return_aux:
        aux = {}
        keys = results[0][2].keys()
        for k in keys:
            aux[k] = np.concatenate([r[2][k] for r in results], axis=0)
        return img, stats, aux
    return img, stats


def render_animation(scene: Scene, cam: CameraState, cfg: m.MarchConfig, path_spec,
                     workers: int = 1):
    """Yield (frame_index, camera, image, stats) along a piecewise move path.

    path_spec: iterable of dicts {"v": [x,y,z], "t": arclength-per-frame,
    "frames": count}; the camera frame is carried by parallel transport
    between frames. An empty path yields the single initial frame.
    """
    frame_idx = 0
    img, stats = render(scene, cam, cfg, workers)
    yield frame_idx, cam, img, stats
    for leg in path_spec:
        v = np.asarray(leg["v"], dtype=float)
        t = float(leg.get("t", 1.0))
        for _ in range(int(leg.get("frames", 1))):
            cam = flow_state(cam, v, t)
            frame_idx += 1
            img, stats = render(scene, cam, cfg, workers)
            yield frame_idx, cam, img, stats


# ---------------------------------------------------------------------------
# image output

def to_u8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, img: np.ndarray) -> None:
    """Binary PPM (P6, 8-bit)."""
    u8 = to_u8(img)
    h, w = u8.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(u8.tobytes())


def png_bytes(img: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(to_u8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(png_bytes(img))
