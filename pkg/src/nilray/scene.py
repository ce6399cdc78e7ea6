"""Scenes of textured spheres, their signed distance field, and normals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import distance as dist
from . import geodesic
from .core import NilTangent, group_inv, group_mul

__all__ = [
    "Texture",
    "SceneObject",
    "Light",
    "Scene",
    "DegenerateGradient",
    "scene_sdf",
    "scene_sdf_batch",
    "surface_normal",
    "object_color",
]


class DegenerateGradient(RuntimeError):
    """SDF gradient vanished where a surface normal was requested."""


class Texture:
    """Equirectangular texture: longitude maps to u, latitude to v."""

    def __init__(self, image: np.ndarray, path: str | None = None):
        img = np.asarray(image)
        if img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        if img.dtype != np.float64:
            img = img.astype(float) / 255.0
        self.image = img[..., :3]
        self.path = path

    @classmethod
    def load(cls, path) -> "Texture":
        from PIL import Image

        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB")), path=str(path))

    def sample(self, lon, lat) -> np.ndarray:
        """Nearest-texel lookup; lon in [-pi, pi], lat in [-pi/2, pi/2]."""
        h, w = self.image.shape[:2]
        u = (np.asarray(lon) + np.pi) / (2.0 * np.pi)
        v = 0.5 - np.asarray(lat) / np.pi
        i = np.clip((v * h).astype(int), 0, h - 1)
        j = np.clip((u * w).astype(int) % w, 0, w - 1)
        return self.image[i, j]


@dataclass
class SceneObject:
    """Sphere in Nil: all points at a fixed metric distance from the center."""

    center: np.ndarray
    radius: float
    color: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 0.8]))
    texture: Texture | None = None
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    name: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.color = np.asarray(self.color, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass
class Light:
    position: np.ndarray
    color: np.ndarray = field(default_factory=lambda: np.ones(3))
    intensity: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.color = np.asarray(self.color, dtype=float)


@dataclass
class Scene:
    """Immutable-by-convention scene description (rotation-invariant chart)."""

    objects: list
    lights: list = field(default_factory=list)
    ambient: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1, 0.1]))
    quotient: bool = False
    # Phong coefficients, applied uniformly; overridable via scene config
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0
    background: str = "gradient"

    def __post_init__(self):
        self.ambient = np.asarray(self.ambient, dtype=float)


def scene_sdf(s: Scene, p) -> float:
    """Signed distance to the nearest object: min over spheres of d - r."""
    return float(scene_sdf_batch(s, np.asarray(p, dtype=float)[None, :])[0])


def scene_sdf_batch(s: Scene, pts) -> np.ndarray:
    """Vectorized scene SDF over (..., 3) points.

    The underlying hybrid distance never overestimates (far field is a
    certified lower bound, near field is exact up to Newton tolerance), so
    sphere tracing may step by this value without tunneling.
    """
    pts = np.asarray(pts, dtype=float)
    best = np.full(pts.shape[:-1], np.inf)
    for obj in s.objects:
        rel = group_mul(group_inv(obj.center), pts)
        d = dist.distance_to_origin_batch(rel)
        best = np.minimum(best, d - obj.radius)
    return best


_NORMAL_STEP = 1e-4


def surface_normal(s: Scene, p) -> NilTangent:
    """Unit outward normal from central differences of the SDF along the frame."""
    p = np.asarray(p, dtype=float)
    grad = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        plus = geodesic.exp(NilTangent(p, e), _NORMAL_STEP)
        minus = geodesic.exp(NilTangent(p, -e), _NORMAL_STEP)
        grad[k] = (scene_sdf(s, plus) - scene_sdf(s, minus)) / (2.0 * _NORMAL_STEP)
    n = np.linalg.norm(grad)
    if n < 1e-8:
        raise DegenerateGradient(f"gradient norm {n:.3e} at {p}")
    return NilTangent(p, grad / n)


def surface_normal_batch(s: Scene, pts) -> np.ndarray:
    """Batched normals (frame components), without the degenerate check."""
    pts = np.asarray(pts, dtype=float)
    grad = np.empty(pts.shape)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        plus = geodesic.exp(NilTangent(pts, np.broadcast_to(e, pts.shape)), _NORMAL_STEP)
        minus = geodesic.exp(NilTangent(pts, np.broadcast_to(-e, pts.shape)), _NORMAL_STEP)
        grad[..., k] = (scene_sdf_batch(s, plus) - scene_sdf_batch(s, minus)) / (2.0 * _NORMAL_STEP)
    n = np.sqrt(np.sum(grad * grad, axis=-1))
    n = np.where(n > 1e-12, n, 1.0)
    return grad / n[..., None]


def object_color(obj: SceneObject, hit_points) -> np.ndarray:
    """Surface color at hit points.

    Textured spheres: translate the hit point by the inverse of the center
    translation, apply the object's orientation frame, and read equirect
    latitude/longitude from the resulting coordinate direction.
    """
    pts = np.asarray(hit_points, dtype=float)
    if obj.texture is None:
        return np.broadcast_to(obj.color, pts.shape).copy()
    rel = group_mul(group_inv(obj.center), pts)
    d = rel @ obj.orientation.T
    r = np.sqrt(np.sum(d * d, axis=-1))
    r = np.where(r > 1e-12, r, 1.0)
    lat = np.arcsin(np.clip(d[..., 2] / r, -1.0, 1.0))
    lon = np.arctan2(d[..., 1], d[..., 0])
    return obj.texture.sample(lon, lat)
