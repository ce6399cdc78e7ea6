"""Heisenberg group algebra, coordinate charts, metric, and isometries.

Two charts are used throughout:

* the Heisenberg chart, where the group is the space of upper triangular
  unipotent 3x3 matrices identified with R^3 and the metric is
  ``dx^2 + dy^2 + (dz - x dy)^2``;
* the rotation-invariant chart, obtained by ``(x, y, z) -> (x, y, z - x*y/2)``,
  where rotations about the z-axis are euclidean rotations and the metric
  becomes ``dx^2 + dy^2 + (dz - (x dy - y dx)/2)^2``.

All internal computation happens in the rotation-invariant chart; the
Heisenberg chart appears only at config boundaries and inside the quotient
teleport, where the fundamental cube lives.

Points are plain float arrays of shape ``(..., 3)``; everything broadcasts.
Tangent vectors are stored as components in the left-invariant orthonormal
frame

    e1 = d/dx - (y/2) d/dz,   e2 = d/dy + (x/2) d/dz,   e3 = d/dz

(rotation-invariant chart), i.e. "translated to the origin", so the metric
inner product of two tangent vectors is the euclidean dot of components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "heis_to_rot",
    "rot_to_heis",
    "group_mul",
    "group_inv",
    "rotate_vertical",
    "NilIsometry",
    "identity_isometry",
    "translation",
    "apply_isometry",
    "compose_isometry",
    "invert_isometry",
    "NilTangent",
    "tangent_from_coordinate_velocity",
    "coordinate_velocity",
    "metric_matrix_rot",
    "metric_matrix_heis",
    "frame_matrix",
]


def _as_pts(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def heis_to_rot(p) -> np.ndarray:
    """Chart map from the Heisenberg model to the rotation-invariant one."""
    p = _as_pts(p)
    q = p.copy()
    q[..., 2] -= p[..., 0] * p[..., 1] / 2.0
    return q


def rot_to_heis(p) -> np.ndarray:
    """Inverse chart map; round trip with heis_to_rot is the identity."""
    p = _as_pts(p)
    q = p.copy()
    q[..., 2] += p[..., 0] * p[..., 1] / 2.0
    return q


def group_mul(p, q) -> np.ndarray:
    """Group law in the rotation-invariant chart.

    (x1,y1,z1) * (x2,y2,z2) = (x1+x2, y1+y2, z1+z2 + (x1 y2 - y1 x2)/2),
    i.e. the matrix product transported through the chart map.
    """
    p, q = _as_pts(p), _as_pts(q)
    out = np.empty(np.broadcast_shapes(p.shape, q.shape))
    out[..., 0] = p[..., 0] + q[..., 0]
    out[..., 1] = p[..., 1] + q[..., 1]
    out[..., 2] = (p[..., 2] + q[..., 2]
                   + (p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]) / 2.0)
    return out


def group_inv(p) -> np.ndarray:
    """Group inverse; in this symmetric chart it is coordinate negation."""
    return -_as_pts(p)


def rotate_vertical(theta, p) -> np.ndarray:
    """Isometric rotation about the z-axis (euclidean in this chart)."""
    p = _as_pts(p)
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(np.broadcast_shapes(theta.shape + (1,), p.shape))
    out[..., 0] = c * p[..., 0] - s * p[..., 1]
    out[..., 1] = s * p[..., 0] + c * p[..., 1]
    out[..., 2] = p[..., 2]
    return out


@dataclass(frozen=True)
class NilIsometry:
    """Orientation-preserving isometry p -> g * R_theta(p).

    The rotation is applied first, then the left translation by ``g``.
    The set of these closes under composition (vertical rotations are
    group automorphisms in this chart).
    """

    g: np.ndarray
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "g", _as_pts(self.g))


def identity_isometry() -> NilIsometry:
    return NilIsometry(np.zeros(3), 0.0)


def translation(g) -> NilIsometry:
    """Left translation L_g, the isometry taking the origin to g."""
    return NilIsometry(_as_pts(g), 0.0)


def apply_isometry(iso: NilIsometry, p) -> np.ndarray:
    return group_mul(iso.g, rotate_vertical(iso.theta, p))


def compose_isometry(a: NilIsometry, b: NilIsometry) -> NilIsometry:
    """Composition with apply(compose(a,b), p) == apply(a, apply(b,p))."""
    return NilIsometry(group_mul(a.g, rotate_vertical(a.theta, b.g)),
                       a.theta + b.theta)


def invert_isometry(a: NilIsometry) -> NilIsometry:
    return NilIsometry(rotate_vertical(-a.theta, group_inv(a.g)), -a.theta)


@dataclass(frozen=True)
class NilTangent:
    """Tangent vector: base point plus components in the frame (e1,e2,e3).

    Because the frame is orthonormal and left-invariant, components are
    unchanged by left translations and the norm is the euclidean norm of
    ``v``. Arrays broadcast, so a NilTangent can hold a whole batch.
    """

    base: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", _as_pts(self.base))
        object.__setattr__(self, "v", _as_pts(self.v))

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.v * self.v, axis=-1))

    def normalized(self) -> "NilTangent":
        n = self.norm
        return NilTangent(self.base, self.v / n[..., None])


def tangent_from_coordinate_velocity(base, dxdydz) -> NilTangent:
    """Re-express a coordinate-chart velocity in the orthonormal frame.

    In the rotation-invariant chart the change of basis is
    u1 = dx, u2 = dy, u3 = dz + (y dx - x dy)/2.
    """
    base, d = _as_pts(base), _as_pts(dxdydz)
    v = np.empty(np.broadcast_shapes(base.shape, d.shape))
    v[..., 0] = d[..., 0]
    v[..., 1] = d[..., 1]
    v[..., 2] = d[..., 2] + (base[..., 1] * d[..., 0] - base[..., 0] * d[..., 1]) / 2.0
    return NilTangent(base, v)


def coordinate_velocity(t: NilTangent) -> np.ndarray:
    """Inverse of tangent_from_coordinate_velocity."""
    b, v = t.base, t.v
    d = np.empty(np.broadcast_shapes(b.shape, v.shape))
    d[..., 0] = v[..., 0]
    d[..., 1] = v[..., 1]
    d[..., 2] = v[..., 2] - (b[..., 1] * v[..., 0] - b[..., 0] * v[..., 1]) / 2.0
    return d


def metric_matrix_heis(p) -> np.ndarray:
    """Metric tensor in Heisenberg coordinates at p."""
    p = _as_pts(p)
    x = p[..., 0]
    g = np.zeros(p.shape[:-1] + (3, 3))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0 + x * x
    g[..., 1, 2] = g[..., 2, 1] = -x
    g[..., 2, 2] = 1.0
    return g


def metric_matrix_rot(p) -> np.ndarray:
    """Metric tensor in rotation-invariant coordinates at p.

    This is the Heisenberg metric pushed through the chart map:
    dx^2 + dy^2 + w^2 with w = dz + (y dx - x dy)/2.
    """
    p = _as_pts(p)
    x, y = p[..., 0], p[..., 1]
    w = np.stack([y / 2.0, -x / 2.0, np.ones_like(x)], axis=-1)
    g = np.zeros(p.shape[:-1] + (3, 3))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0
    g += w[..., :, None] * w[..., None, :]
    return g


def frame_matrix(p) -> np.ndarray:
    """Columns are the coordinate components of (e1, e2, e3) at p (rot chart)."""
    p = _as_pts(p)
    x, y = p[..., 0], p[..., 1]
    m = np.zeros(p.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1.0
    m[..., 1, 1] = 1.0
    m[..., 2, 0] = -y / 2.0
    m[..., 2, 1] = x / 2.0
    m[..., 2, 2] = 1.0
    return m
