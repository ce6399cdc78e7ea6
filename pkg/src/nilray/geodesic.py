"""Geodesic flow: closed form, RK4 oracle, and parallel transport.

The unit-speed geodesic from the origin with initial frame components
(a, 0, c), a^2 + c^2 = 1, solves (rotation-invariant chart, u = c*t):

    x(t) = a t * sin(u)/u
    y(t) = a t * (1 - cos(u))/u
    z(t) = c t + (a^2 c t^3 / 2) * (u - sin u)/u^3

This was derived from the left-invariant connection

    nabla_{e1} e2 = e3/2,  nabla_{e2} e1 = -e3/2,
    nabla_{e1} e3 = nabla_{e3} e1 = -e2/2,
    nabla_{e2} e3 = nabla_{e3} e2 =  e1/2,  nabla_{ei} ei = 0

(Koszul formula with [e1,e2] = e3) and validated against RK4 integration of
both the frame-component system and the coordinate Christoffel system; see
docs/geometry.md and tests/test_geodesic.py. The horizontal projection is a
circle of radius a/|c| through the origin traversed at angular rate c, so
sup_t sqrt(x^2+y^2) = 2a/|c|: geodesics with a vertical component stay in a
bounded tube around their start axis.

All evaluators are vectorized; scalars broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    NilIsometry,
    NilTangent,
    apply_isometry,
    group_mul,
    rotate_vertical,
)

__all__ = [
    "exp_origin",
    "exp_from_origin",
    "exp",
    "velocity_origin",
    "geodesic_ode",
    "GeodesicParams",
    "params_from_tangent",
    "parallel_transport",
    "CameraState",
    "flow_state",
    "orthonormalize",
]

# series switchover for the trig quotients; well below any precision loss
_SMALL_U = 0.125


def _sinc(u):
    """sin(u)/u, stable through u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SMALL_U
    us = np.where(small, u, 1.0)
    u2 = us * us
    ser = 1.0 + u2 * (-1.0 / 6.0 + u2 * (1.0 / 120.0 + u2 * (-1.0 / 5040.0 + u2 / 362880.0)))
    ub = np.where(small, 1.0, u)
    return np.where(small, ser, np.sin(ub) / ub)


def _versine_over(u):
    """(1 - cos u)/u = 2 sin^2(u/2)/u, stable through u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SMALL_U
    us = np.where(small, u, 1.0)
    u2 = us * us
    ser = us * (0.5 + u2 * (-1.0 / 24.0 + u2 * (1.0 / 720.0 - u2 / 40320.0)))
    ub = np.where(small, 1.0, u)
    s = np.sin(ub / 2.0)
    return np.where(small, ser, 2.0 * s * s / ub)


def _twist(u):
    """(u - sin u)/u^3, stable through u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SMALL_U
    us = np.where(small, u, 1.0)
    u2 = us * us
    ser = 1.0 / 6.0 + u2 * (-1.0 / 120.0 + u2 * (1.0 / 5040.0 - u2 / 362880.0))
    ub = np.where(small, 1.0, u)
    return np.where(small, ser, (ub - np.sin(ub)) / (ub * ub * ub))


def exp_origin(a, c, t) -> np.ndarray:
    """Point at arclength t on the geodesic from the origin with velocity (a,0,c).

    Requires a >= 0 and a^2 + c^2 = 1 for unit speed; broadcasts. The c -> 0
    and a -> 0 limits are exact: the series branches make the straight-line
    cases (a t, 0, 0) and (0, 0, c t) fall out automatically.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    u = c * t
    x = a * t * _sinc(u)
    y = a * t * _versine_over(u)
    z = c * t + (a * a * c * t ** 3 / 2.0) * _twist(u)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def velocity_origin(a, c, t) -> np.ndarray:
    """Frame components of the velocity along the exp_origin geodesic."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    u = c * t
    return np.stack(np.broadcast_arrays(a * np.cos(u), a * np.sin(u), c * np.ones_like(u)), axis=-1)


def _decompose(w):
    """Split tangent components w into (a, c, t, phi) with w = t*(a cos phi, a sin phi, c)."""
    w = np.asarray(w, dtype=float)
    t = np.sqrt(np.sum(w * w, axis=-1))
    safe = np.where(t > 0.0, t, 1.0)
    ah = np.hypot(w[..., 0], w[..., 1])
    a = ah / safe
    c = w[..., 2] / safe
    phi = np.arctan2(w[..., 1], w[..., 0])
    phi = np.where(ah > 0.0, phi, 0.0)
    return a, c, t, phi


def exp_from_origin(w) -> np.ndarray:
    """Exponential at the origin of an arbitrary (unnormalized) tangent w."""
    a, c, t, phi = _decompose(w)
    return rotate_vertical(phi, exp_origin(a, c, t))


def exp(v: NilTangent, t) -> np.ndarray:
    """Geodesic flow of a unit tangent for arclength t.

    Reduces to exp_origin by a vertical rotation, then left-translates by
    the base point; equivariance under rotations and translations is exact
    by construction.
    """
    t = np.asarray(t, dtype=float)
    return group_mul(v.base, exp_from_origin(v.v * t[..., None]))


def exp_velocity(v: NilTangent, t) -> np.ndarray:
    """Frame components of the geodesic velocity at arclength t.

    For unit v with horizontal size a, vertical c and phase phi, the
    velocity is R_phi (a cos(ct), a sin(ct), c): the horizontal part
    precesses at the vertical rate.
    """
    a, c, _, phi = _decompose(v.v)
    t = np.asarray(t, dtype=float)
    return rotate_vertical(phi, velocity_origin(a, c, t))


def _geodesic_rhs(state):
    """Frame-component geodesic system in the rotation-invariant chart.

    state[..., :3] are coordinates, state[..., 3:] frame components u.
    udot = (-u2 u3, u1 u3, 0) from the connection; coordinates integrate
    the coordinate expression of u1 e1 + u2 e2 + u3 e3.
    """
    x, y = state[..., 0], state[..., 1]
    u1, u2, u3 = state[..., 3], state[..., 4], state[..., 5]
    out = np.empty_like(state)
    out[..., 0] = u1
    out[..., 1] = u2
    out[..., 2] = u3 - (y * u1 - x * u2) / 2.0
    out[..., 3] = -u2 * u3
    out[..., 4] = u1 * u3
    out[..., 5] = 0.0
    return out


def geodesic_ode(v: NilTangent, t, steps: int = 10000) -> np.ndarray:
    """Independent fixed-step RK4 oracle for the geodesic flow.

    Integrates the frame-component system from v.base: no closed-form
    trigonometry enters, so this is the ground truth the closed form is
    validated against.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    base = np.asarray(v.base, dtype=float)
    comps = np.asarray(v.v, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(base.shape, comps.shape, t.shape + (1,))
    state = np.zeros(shape[:-1] + (6,))
    state[..., :3] = base
    state[..., 3:] = comps
    h = (t / steps)[..., None] if t.ndim else t / steps
    for _ in range(steps):
        k1 = _geodesic_rhs(state)
        k2 = _geodesic_rhs(state + h / 2.0 * k1)
        k3 = _geodesic_rhs(state + h / 2.0 * k2)
        k4 = _geodesic_rhs(state + h * k3)
        state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state[..., :3]


@dataclass(frozen=True)
class GeodesicParams:
    """Normal form of a geodesic: exp_origin(a, c, .) carried by an isometry.

    Any unit tangent reduces to this by a vertical rotation (phi) and a left
    translation; base_iso maps the normal-form geodesic onto the actual one.
    """

    a: float
    c: float
    phi: float
    base_iso: NilIsometry

    def point(self, t) -> np.ndarray:
        return apply_isometry(self.base_iso, exp_origin(self.a, self.c, t))

    def velocity(self, t) -> np.ndarray:
        """Frame components of the velocity at arclength t.

        Components live in the left-invariant frame, so only the rotation
        part of base_iso acts on them.
        """
        u = velocity_origin(self.a, self.c, t)
        return rotate_vertical(self.base_iso.theta, u)


def params_from_tangent(v: NilTangent) -> GeodesicParams:
    """Reduce a unit tangent to normal form (a >= 0, phase absorbed)."""
    a, c, _, phi = _decompose(v.v)
    iso = NilIsometry(v.base, float(phi))
    return GeodesicParams(float(a), float(c), float(phi), iso)


def _transport_rhs(V, u):
    """Parallel transport system V' = -nabla_{u} V in frame components."""
    out = np.empty_like(V)
    out[..., 0] = -(u[..., 1] * V[..., 2] + u[..., 2] * V[..., 1]) / 2.0
    out[..., 1] = (u[..., 0] * V[..., 2] + u[..., 2] * V[..., 0]) / 2.0
    out[..., 2] = -(u[..., 0] * V[..., 1] - u[..., 1] * V[..., 0]) / 2.0
    return out


def parallel_transport(v0, along: GeodesicParams, t: float, max_step: float = 1e-2) -> np.ndarray:
    """Transport frame components v0 along a geodesic for arclength t.

    RK4 on the linear transport system with the closed-form velocity; the
    coefficient matrix is skew, so inner products are preserved up to
    integration error. v0 may be a stack of vectors (..., 3).
    """
    v = np.asarray(v0, dtype=float).copy()
    n = max(1, int(np.ceil(abs(t) / max_step)))
    h = t / n
    # velocity in normal form; the phase rotation is applied at the ends.
    phi = along.base_iso.theta
    v = rotate_vertical(-phi, v)
    for i in range(n):
        s = i * h
        u1 = velocity_origin(along.a, along.c, s)
        u2 = velocity_origin(along.a, along.c, s + h / 2.0)
        u3 = velocity_origin(along.a, along.c, s + h)
        k1 = _transport_rhs(v, u1)
        k2 = _transport_rhs(v + h / 2.0 * k1, u2)
        k3 = _transport_rhs(v + h / 2.0 * k2, u2)
        k4 = _transport_rhs(v + h * k3, u3)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rotate_vertical(phi, v)


@dataclass(frozen=True)
class CameraState:
    """Position plus orthonormal orientation frame stored at the origin.

    Columns of ``frame`` are the components of the camera's (e1, e2, e3);
    the view looks down -e3 with e2 up and e1 right.
    """

    p: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        f = np.asarray(self.frame, dtype=float)
        if f.shape != (3, 3):
            raise ValueError("frame must be 3x3")
        if not np.allclose(f.T @ f, np.eye(3), atol=1e-9):
            raise ValueError("frame is not orthonormal")
        if not np.isclose(np.linalg.det(f), 1.0, atol=1e-9):
            raise ValueError("frame must be positively oriented")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "frame", f)


def orthonormalize(frame: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on columns; guards against slow drift."""
    f = np.array(frame, dtype=float)
    for j in range(3):
        for k in range(j):
            f[:, j] -= (f[:, k] @ f[:, j]) * f[:, k]
        f[:, j] /= np.linalg.norm(f[:, j])
    return f


def flow_state(s: CameraState, v_local, t: float) -> CameraState:
    """Move the camera: geodesic flow plus parallel transport of the frame.

    v_local are components in the camera frame; the flow covers arclength
    t * |v_local|. The returned frame is re-orthonormalized.
    """
    v_local = np.asarray(v_local, dtype=float)
    speed = float(np.linalg.norm(v_local))
    arclen = float(t) * speed
    if arclen == 0.0:
        return s
    w = s.frame @ v_local / speed
    params = params_from_tangent(NilTangent(s.p, w))
    new_p = params.point(arclen)
    cols = parallel_transport(s.frame.T, params, arclen)
    new_frame = orthonormalize(cols.T)
    return CameraState(new_p, new_frame)
