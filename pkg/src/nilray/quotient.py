"""Dehn-twist torus-bundle quotient: lattice, teleportation, quotient marching.

The lattice is generated by the three left translations by (1,0,0), (0,1,0)
and (0,0,1) in the Heisenberg chart, where the unit cube is a fundamental
domain. The x-generator acts as a shear, (x,y,z) -> (x+1, y, z+y); the y and
z generators are plain translations and commute. Conjugating the y-generator
by the x-generator composes it with the z-generator: the monodromy of the
bundle is [[1,1],[0,1]] acting on (y,z).

Teleporting a point back into the cube normalizes x first (each x-shift
drags z along by -+y), then y and z in either order. Words are recorded as
signed generator indices (+1/-1 for x, +2/-2 for y, +3/-3 for z) in applied
order; the accumulated lattice element is an exact integer Heisenberg triple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geodesic
from .core import NilTangent, heis_to_rot, rot_to_heis
from .march import Hit, MarchConfig, Miss, _sdf_argmin
from .scene import Scene

__all__ = [
    "LatticeGroup",
    "TeleportResult",
    "in_domain",
    "teleport",
    "teleport_state",
    "apply_generator",
    "apply_word",
    "inverse_word",
    "heis_mul",
    "march_quotient",
    "march_quotient_batch",
    "CUSHION",
]

CUSHION = 0.1
# z-coordinate speed bound |u3 + x*u2| for unit tangents with |x| <= 1.3
_Z_RATE = 2.5
_MIN_HOP = 1e-3


@dataclass(frozen=True)
class LatticeGroup:
    """Generators (as Heisenberg-chart translation parts) and the monodromy."""

    generators: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    monodromy: tuple = ((1, 1), (0, 1))


@dataclass(frozen=True)
class TeleportResult:
    point: np.ndarray
    word: tuple


def heis_mul(p, q) -> np.ndarray:
    """Group law in the Heisenberg chart: (a,b,c)(x,y,z) = (a+x, b+y, c+z+a*y)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.empty(np.broadcast_shapes(p.shape, q.shape))
    out[..., 0] = p[..., 0] + q[..., 0]
    out[..., 1] = p[..., 1] + q[..., 1]
    out[..., 2] = p[..., 2] + q[..., 2] + p[..., 0] * q[..., 1]
    return out


def apply_generator(idx: int, p) -> np.ndarray:
    """Apply a signed generator (Heisenberg chart); idx in {+-1, +-2, +-3}."""
    p = np.asarray(p, dtype=float)
    sign = 1.0 if idx > 0 else -1.0
    g = np.zeros(3)
    g[abs(idx) - 1] = sign
    return heis_mul(g, p)


def apply_word(word, p) -> np.ndarray:
    """Apply a word of signed generator indices in order."""
    q = np.asarray(p, dtype=float)
    for idx in word:
        q = apply_generator(idx, q)
    return q


def inverse_word(word) -> tuple:
    return tuple(-idx for idx in reversed(word))


def in_domain(p_heis) -> bool:
    """Membership in the half-open fundamental cube [0,1)^3 (Heisenberg chart)."""
    p = np.asarray(p_heis, dtype=float)
    return bool(np.all((p >= 0.0) & (p < 1.0), axis=-1))


def teleport(p_heis) -> TeleportResult:
    """Return a point of the orbit inside [0,1)^3, with the word applied.

    x is normalized first with the shear generator (each step maps z to
    z -+ y), then y and z with the commuting translations. Each phase
    iterates until its coordinate lands in [0,1): the integer part shrinks
    every step, so this terminates (rounding at the boundary can cost one
    extra bounce, e.g. a tiny negative plus 1 rounding to exactly 1.0).
    """
    p = np.asarray(p_heis, dtype=float)
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    word = []
    while x < 0.0 or x >= 1.0:
        if x >= 1.0:
            x -= 1.0
            z -= y
            word.append(-1)
        else:
            x += 1.0
            z += y
            word.append(1)
    while y < 0.0 or y >= 1.0:
        if y >= 1.0:
            y -= 1.0
            word.append(-2)
        else:
            y += 1.0
            word.append(2)
    while z < 0.0 or z >= 1.0:
        if z >= 1.0:
            z -= 1.0
            word.append(-3)
        else:
            z += 1.0
            word.append(3)
    return TeleportResult(np.array([x, y, z]), tuple(word))


def _teleport_batch(pts_heis):
    """Vectorized teleport; returns (points in cube, integer lattice elements).

    The element (a, b, c) is the exact group element that was applied, i.e.
    point_out = (a,b,c) * point_in in the Heisenberg chart. Floor shifts do
    almost all the work; a short cleanup loop handles boundary rounding
    (tiny negatives whose shift lands exactly on 1.0).
    """
    p = np.asarray(pts_heis, dtype=float)
    n = np.floor(p[..., 0]).astype(np.int64)
    x = p[..., 0] - n
    z = p[..., 2] - n * p[..., 1]
    m = np.floor(p[..., 1]).astype(np.int64)
    y = p[..., 1] - m
    k = np.floor(z).astype(np.int64)
    z = z - k
    # one x-then-y-then-z round composes to the single triple (-n, -m, -k)
    elem = np.stack([-n, -m, -k], axis=-1)
    for _ in range(4):
        if not np.any((x < 0.0) | (x >= 1.0) | (y < 0.0) | (y >= 1.0)
                      | (z < 0.0) | (z >= 1.0)):
            break
        sx = np.where(x >= 1.0, 1, 0) - np.where(x < 0.0, 1, 0)
        x = x - sx
        z = z - sx * y
        sy = np.where(y >= 1.0, 1, 0) - np.where(y < 0.0, 1, 0)
        y = y - sy
        sz = np.where(z >= 1.0, 1, 0) - np.where(z < 0.0, 1, 0)
        z = z - sz
        round_elem = np.stack([-sx.astype(np.int64), -sy.astype(np.int64),
                               -sz.astype(np.int64)], axis=-1)
        elem = heis_mul_int(round_elem, elem)
    return np.stack([x, y, z], axis=-1), elem


def heis_mul_int(p, q) -> np.ndarray:
    """Integer Heisenberg group law for lattice elements."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    out = np.empty(np.broadcast_shapes(p.shape, q.shape), dtype=np.int64)
    out[..., 0] = p[..., 0] + q[..., 0]
    out[..., 1] = p[..., 1] + q[..., 1]
    out[..., 2] = p[..., 2] + q[..., 2] + p[..., 0] * q[..., 1]
    return out


def teleport_state(p_rot, v: NilTangent):
    """Teleport a rotation-chart point with its tangent.

    The lattice acts by left translations, which leave frame components
    untouched (tangents are stored at the origin), so only the base moves.
    """
    res = teleport(rot_to_heis(np.asarray(p_rot, dtype=float)))
    new_p = heis_to_rot(res.point)
    return new_p, NilTangent(new_p, np.asarray(v.v, dtype=float)), res.word


def _shell_room(heis_pts):
    """Arclength budget that provably keeps the point inside the cushion box.

    Componentwise coordinate speeds of unit-speed geodesics in the
    Heisenberg chart are bounded by (1, 1, _Z_RATE) inside the box, so a
    step of this size cannot escape [-CUSHION, 1+CUSHION]^3.
    """
    p = heis_pts
    room_x = np.minimum(p[..., 0] + CUSHION, 1.0 + CUSHION - p[..., 0])
    room_y = np.minimum(p[..., 1] + CUSHION, 1.0 + CUSHION - p[..., 1])
    room_z = np.minimum(p[..., 2] + CUSHION, 1.0 + CUSHION - p[..., 2])
    return np.minimum(np.minimum(room_x, room_y), room_z / _Z_RATE)


def march_quotient_batch(scene: Scene, bases, dirs, cfg: MarchConfig, t_max=None):
    """Sphere tracing in the quotient: capped steps plus teleportation.

    bases must already lie in the fundamental domain (rotation chart of
    cube points). Steps are capped so a ray never exits the 0.1 cushion
    around the unit cube before being teleported back; scene objects are
    assumed to lie inside the domain. Returns march_batch-style arrays plus
    per-lane integer lattice elements and teleport counts.
    """
    bases = np.array(np.broadcast_to(np.asarray(bases, dtype=float),
                                     np.asarray(dirs, dtype=float).shape))
    dirs = np.asarray(dirs, dtype=float)
    n_l = dirs.shape[0]
    budget = np.full(n_l, cfg.t_max if t_max is None else t_max, dtype=float)

    seg_base = bases.copy()
    seg_dir = dirs.copy()           # velocity components at the segment start
    t_seg = np.zeros(n_l)
    t_tot = np.zeros(n_l)
    steps = np.zeros(n_l, dtype=int)
    hit = np.zeros(n_l, dtype=bool)
    obj_id = np.full(n_l, -1, dtype=int)
    elem = np.zeros((n_l, 3), dtype=np.int64)
    teleports = np.zeros(n_l, dtype=int)
    last_pts = bases.copy()
    active = np.arange(n_l)

    for _ in range(cfg.max_steps):
        if active.size == 0:
            break
        pts = geodesic.exp(NilTangent(seg_base[active], seg_dir[active]), t_seg[active])
        heis = rot_to_heis(pts)
        outside = np.any((heis < 0.0) | (heis >= 1.0), axis=-1)
        if np.any(outside):
            out_lanes = active[outside]
            cube_pt, tele_elem = _teleport_batch(heis[outside])
            # restart the segment at the teleported point; the velocity
            # components there are the closed-form velocity at t_seg (left
            # translations do not change frame components, but they must be
            # the components at the handoff point, not the launch ones)
            seg_dir[out_lanes] = geodesic.exp_velocity(
                NilTangent(seg_base[out_lanes], seg_dir[out_lanes]), t_seg[out_lanes])
            seg_base[out_lanes] = heis_to_rot(cube_pt)
            t_seg[out_lanes] = 0.0
            elem[out_lanes] = heis_mul_int(tele_elem, elem[out_lanes])
            teleports[out_lanes] += 1
            pts = pts.copy()
            pts[outside] = seg_base[out_lanes]
            heis = heis.copy()
            heis[outside] = cube_pt
        last_pts[active] = pts
        sdf, nearest = _sdf_argmin(scene, pts)
        now_hit = sdf < cfg.eps_hit
        hit_lanes = active[now_hit]
        hit[hit_lanes] = True
        obj_id[hit_lanes] = nearest[now_hit]
        go = ~now_hit
        go_lanes = active[go]
        cap = _shell_room(heis[go])
        ds = np.maximum(np.minimum(sdf[go], np.maximum(cap, _MIN_HOP)), cfg.min_step)
        t_seg[go_lanes] += ds
        t_tot[go_lanes] += ds
        steps[go_lanes] += 1
        alive = t_tot[go_lanes] <= budget[go_lanes]
        active = go_lanes[alive]

    final_dir = geodesic.exp_velocity(NilTangent(seg_base, seg_dir), t_seg)
    return {
        "hit": hit,
        "t": t_tot,
        "steps": steps,
        "object_id": obj_id,
        "point": last_pts,
        "direction": final_dir,
        "lattice_element": elem,
        "teleports": teleports,
    }


def march_quotient(scene: Scene, v: NilTangent, cfg: MarchConfig):
    """Single-ray quotient marching; Hit records the applied word.

    The scalar path re-runs the teleport bookkeeping to recover the full
    ordered word, not just the accumulated lattice element.
    """
    base = np.asarray(v.base, dtype=float)
    comps = np.asarray(v.v, dtype=float)
    word: list = []
    t_tot = 0.0
    t_seg = 0.0
    steps = 0
    seg_base = base.copy()
    for _ in range(cfg.max_steps):
        pt = geodesic.exp(NilTangent(seg_base, comps), t_seg)
        heis = rot_to_heis(pt)
        if not in_domain(heis):
            res = teleport(heis)
            word.extend(res.word)
            # hand the segment over with the velocity at the teleport point
            comps = geodesic.exp_velocity(NilTangent(seg_base, comps), t_seg)
            seg_base = heis_to_rot(res.point)
            t_seg = 0.0
            pt = seg_base
        sdf, nearest = _sdf_argmin(scene, pt[None, :])
        if sdf[0] < cfg.eps_hit:
            return Hit(t=t_tot, point=pt, object_id=int(nearest[0]),
                       incoming=NilTangent(pt, geodesic.exp_velocity(NilTangent(seg_base, comps), t_seg)),
                       steps_used=steps, lattice_word=tuple(word))
        cap = float(_shell_room(rot_to_heis(pt)[None, :])[0])
        ds = max(min(float(sdf[0]), max(cap, _MIN_HOP)), cfg.min_step)
        t_seg += ds
        t_tot += ds
        steps += 1
        if t_tot > cfg.t_max:
            break
    return Miss(t=t_tot, steps_used=steps,
                final_direction=geodesic.exp_velocity(NilTangent(seg_base, comps), t_seg))
