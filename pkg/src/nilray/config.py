"""Scene configuration: strict JSON parsing with explicit chart names.

Every coordinate triple must name its chart ("rot" or "heis"); unknown keys
are rejected with the offending path. This guards against the classic
Heisenberg versus rotation-invariant mixups at the data boundary.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import distance as dist
from .core import NilTangent, group_inv, group_mul, heis_to_rot
from .geodesic import CameraState, orthonormalize
from .march import MarchConfig
from .quotient import in_domain
from .scene import Light, Scene, SceneObject, Texture

__all__ = ["ConfigError", "load_scene_config", "parse_scene_config"]


class ConfigError(ValueError):
    pass


def _require_keys(d: dict, allowed: set, required: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _parse_point(node, where: str) -> np.ndarray:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: coordinates must be an object with chart and xyz")
    _require_keys(node, {"chart", "xyz"}, {"chart", "xyz"}, where)
    chart = node["chart"]
    xyz = node["xyz"]
    if chart not in ("rot", "heis"):
        raise ConfigError(f"{where}: chart must be 'rot' or 'heis'")
    if not (isinstance(xyz, list) and len(xyz) == 3):
        raise ConfigError(f"{where}: xyz must be a list of three numbers")
    p = np.asarray([float(v) for v in xyz])
    if not np.all(np.isfinite(p)):
        raise ConfigError(f"{where}: coordinates must be finite")
    return heis_to_rot(p) if chart == "heis" else p


def _parse_color(node, where: str, default):
    if node is None:
        return np.asarray(default, dtype=float)
    if not (isinstance(node, list) and len(node) == 3):
        raise ConfigError(f"{where}: color must be [r, g, b]")
    return np.asarray([float(v) for v in node])


def _look_at_frame(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Build the camera frame looking from position toward target.

    Forward is the connecting geodesic direction when the near field
    reaches, else the coordinate direction of the translated target.
    """
    try:
        tangent, _ = dist.inverse_exp(position, target)
        f = np.asarray(tangent.v, dtype=float)
    except (dist.NoConvergence, dist.AmbiguousNearCutLocus):
        rel = group_mul(group_inv(position), target)
        f = rel / np.linalg.norm(rel)
    if np.linalg.norm(f) < 1e-12:
        raise ConfigError("camera: look_at coincides with position")
    f = f / np.linalg.norm(f)
    for hint in (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]),
                 np.array([1.0, 0.0, 0.0])):
        if abs(float(f @ hint)) < 0.99:
            break
    e3 = -f
    e1 = np.cross(hint, e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return orthonormalize(np.stack([e1, e2, e3], axis=1))


def parse_scene_config(doc: dict, base_dir: str = "."):
    """Validate a parsed JSON document into (Scene, CameraState, MarchConfig, output)."""
    _require_keys(doc, {"objects", "lights", "ambient", "camera", "march",
                        "quotient", "phong", "background", "animation", "output"},
                  {"objects", "camera"}, "config")

    quotient = bool(doc.get("quotient", False))
    objects = []
    for k, node in enumerate(doc["objects"]):
        where = f"objects[{k}]"
        _require_keys(node, {"center", "radius", "color", "texture",
                             "orientation", "name"}, {"center", "radius"}, where)
        center = _parse_point(node["center"], f"{where}.center")
        radius = float(node["radius"])
        name = node.get("name", f"object{k}")
        texture = None
        if "texture" in node:
            path = os.path.join(base_dir, node["texture"])
            if not os.path.exists(path):
                raise ConfigError(f"{where}: texture file not found: {path}")
            texture = Texture.load(path)
        orientation = np.eye(3)
        if "orientation" in node:
            orientation = np.asarray([float(v) for v in node["orientation"]]).reshape(3, 3)
        obj = SceneObject(center=center, radius=radius,
                          color=_parse_color(node.get("color"), where, (0.8, 0.8, 0.8)),
                          texture=texture, orientation=orientation, name=name)
        if quotient and not in_domain(np.asarray(node["center"]["xyz"])
                                      if node["center"]["chart"] == "heis"
                                      else _heis_of(center)):
            raise ConfigError(f"{where}: object '{name}' center lies outside the "
                              f"fundamental domain required by quotient mode")
        objects.append(obj)
    if not objects:
        raise ConfigError("config: at least one object is required")

    lights = []
    for k, node in enumerate(doc.get("lights", [])):
        where = f"lights[{k}]"
        _require_keys(node, {"position", "color", "intensity"}, {"position"}, where)
        lights.append(Light(position=_parse_point(node["position"], f"{where}.position"),
                            color=_parse_color(node.get("color"), where, (1.0, 1.0, 1.0)),
                            intensity=float(node.get("intensity", 1.0))))

    phong = doc.get("phong", {})
    _require_keys(phong, {"diffuse", "specular", "shininess"}, set(), "phong")
    background = doc.get("background", "gradient")
    if background not in ("gradient", "black"):
        raise ConfigError("background: must be 'gradient' or 'black'")

    scene = Scene(objects=objects, lights=lights,
                  ambient=_parse_color(doc.get("ambient"), "ambient", (0.1, 0.1, 0.1)),
                  quotient=quotient,
                  diffuse=float(phong.get("diffuse", 0.7)),
                  specular=float(phong.get("specular", 0.2)),
                  shininess=float(phong.get("shininess", 32.0)),
                  background=background)

    cam_node = doc["camera"]
    _require_keys(cam_node, {"position", "look_at", "frame", "fov"}, {"position"}, "camera")
    position = _parse_point(cam_node["position"], "camera.position")
    if "frame" in cam_node and "look_at" in cam_node:
        raise ConfigError("camera: give either look_at or frame, not both")
    if "frame" in cam_node:
        frame = np.asarray([float(v) for v in cam_node["frame"]]).reshape(3, 3)
    elif "look_at" in cam_node:
        frame = _look_at_frame(position, _parse_point(cam_node["look_at"], "camera.look_at"))
    else:
        frame = np.eye(3)
    camera = CameraState(position, frame)

    march_node = doc.get("march", {})
    _require_keys(march_node, {"eps_hit", "t_max", "max_steps", "min_step",
                               "width", "height", "supersample"}, set(), "march")
    fov = float(cam_node.get("fov", 90.0))
    cfg = MarchConfig(
        eps_hit=float(march_node.get("eps_hit", 1e-4)),
        t_max=float(march_node.get("t_max", 50.0)),
        max_steps=int(march_node.get("max_steps", 256)),
        min_step=float(march_node.get("min_step", 1e-5)),
        fov_degrees=fov,
        width=int(march_node.get("width", 256)),
        height=int(march_node.get("height", 256)),
        supersample=bool(march_node.get("supersample", False)),
    )

    output = doc.get("output", {})
    _require_keys(output, {"path", "format"}, set(), "output")

    animation = doc.get("animation", [])
    for k, leg in enumerate(animation):
        _require_keys(leg, {"v", "t", "frames"}, {"v"}, f"animation[{k}]")

    return scene, camera, cfg, {"output": output, "animation": animation}


def _heis_of(p_rot):
    from .core import rot_to_heis

    return rot_to_heis(p_rot)


def load_scene_config(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_scene_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))
