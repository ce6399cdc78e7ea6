"""Global distance on Nil: far-field lower-bound estimate plus near-field Newton.

Exact distance in Nil has no closed form, so the distance function is hybrid:

* far field: ``F(p) = max(rho, v(|z|))`` with rho the horizontal radius and
  v the calibrated "height-reach" profile, the minimum arclength any
  unit-speed geodesic needs to attain a given z-height. Both parts are
  provable lower bounds on d(o, p) (the xy-projection is a riemannian
  submersion onto the euclidean plane; reaching p requires reaching its
  height), so F never overestimates: this is what keeps sphere tracing
  with F sound. F is also bilipschitz to d; the measured constant is
  recorded by scripts/calibrate.py into artifacts/farfield.json.

* near field (F below NEAR_FIELD_THRESHOLD): Newton's method on the
  unnormalized tangent w solving exp(w) = target, with finite-difference
  Jacobian, seeded with the coordinate vector of the translated target.

The profile v is computed once per process from a deterministic grid
(maximize the closed-form height over the launch parameter), so results
are reproducible without reading calibration files at run time.
"""

from __future__ import annotations

import numpy as np

from . import geodesic
from .core import NilTangent, group_inv, group_mul

__all__ = [
    "NoConvergence",
    "AmbiguousNearCutLocus",
    "NEAR_FIELD_THRESHOLD",
    "far_field_estimate",
    "height_reach",
    "inverse_exp",
    "inverse_exp_batch",
    "distance",
    "distance_batch",
    "distance_to_origin_batch",
]

NEAR_FIELD_THRESHOLD = 2.0

_NEWTON_MAX_ITER = 32
_NEWTON_TOL = 1e-10


class NoConvergence(RuntimeError):
    """Newton failed to reach tolerance within the iteration budget."""


class AmbiguousNearCutLocus(RuntimeError):
    """Restarts converged to distinct geodesics joining the same pair."""

    def __init__(self, solutions):
        super().__init__("multiple connecting geodesics found")
        self.solutions = solutions


# ---------------------------------------------------------------------------
# height-reach profile

_profile_cache = None


def _height_profile():
    """Tabulate v(h) = min arclength to reach height h, by inverting
    z_max(t) = max over c of the closed-form z(t; c)."""
    global _profile_cache
    if _profile_cache is not None:
        return _profile_cache
    ts = np.linspace(0.0, 160.0, 2401)
    cs = np.linspace(1e-6, 1.0, 4001)
    u = cs[None, :] * ts[:, None]
    # z(t; c) with a^2 = 1 - c^2, via the stable twist quotient
    tw = np.empty_like(u)
    small = np.abs(u) < 1e-4
    tw[small] = 1.0 / 6.0 - u[small] ** 2 / 120.0
    ub = u[~small]
    tw[~small] = (ub - np.sin(ub)) / ub ** 3
    z = cs[None, :] * ts[:, None] + (1.0 - cs[None, :] ** 2) * cs[None, :] * ts[:, None] ** 3 / 2.0 * tw
    zmax = np.maximum.accumulate(z.max(axis=1))
    _profile_cache = (zmax, ts)
    return _profile_cache


def height_reach(h) -> np.ndarray:
    """Minimum arclength for a geodesic from the origin to attain |z| = h.

    Equals h up to h ~ 3 (climbing straight up is optimal), then grows like
    sqrt(2 pi h): helical pumping gains height quadratically in arclength.
    1-Lipschitz and monotone. Beyond the table it continues with the exact
    asymptotic inverse of z ~ c t + ((1-c^2) c t^3/2) (u - sin u)/u^3.
    """
    zmax, ts = _height_profile()
    h = np.abs(np.asarray(h, dtype=float))
    v = np.interp(h, zmax, ts)
    # sqrt tail beyond the table, matched continuously at the last knot
    tail = h > zmax[-1]
    if np.any(tail):
        alpha = ts[-1] ** 2 / zmax[-1]
        v = np.where(tail, np.sqrt(alpha * h), v)
    return v


def far_field_estimate(p) -> np.ndarray:
    """Lower-bound distance estimate from the origin, max(rho, v(|z|))."""
    p = np.asarray(p, dtype=float)
    rho = np.hypot(p[..., 0], p[..., 1])
    return np.maximum(rho, height_reach(p[..., 2]))


# ---------------------------------------------------------------------------
# near-field Newton

def _solve3(jac, r):
    """Per-lane 3x3 solve by adjugate; singular lanes get a zero step.

    Avoids np.linalg.solve so one degenerate lane cannot abort or perturb
    the others. Returns (step, regular_mask).
    """
    a = jac
    cof00 = a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1]
    cof01 = a[..., 1, 2] * a[..., 2, 0] - a[..., 1, 0] * a[..., 2, 2]
    cof02 = a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]
    det = a[..., 0, 0] * cof00 + a[..., 0, 1] * cof01 + a[..., 0, 2] * cof02
    ok = np.abs(det) > 1e-300
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    cof10 = a[..., 0, 2] * a[..., 2, 1] - a[..., 0, 1] * a[..., 2, 2]
    cof11 = a[..., 0, 0] * a[..., 2, 2] - a[..., 0, 2] * a[..., 2, 0]
    cof12 = a[..., 0, 1] * a[..., 2, 0] - a[..., 0, 0] * a[..., 2, 1]
    cof20 = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    cof21 = a[..., 0, 2] * a[..., 1, 0] - a[..., 0, 0] * a[..., 1, 2]
    cof22 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    step = np.empty_like(r)
    step[..., 0] = (cof00 * r[..., 0] + cof10 * r[..., 1] + cof20 * r[..., 2]) * inv_det
    step[..., 1] = (cof01 * r[..., 0] + cof11 * r[..., 1] + cof21 * r[..., 2]) * inv_det
    step[..., 2] = (cof02 * r[..., 0] + cof12 * r[..., 1] + cof22 * r[..., 2]) * inv_det
    return step, ok


def inverse_exp_batch(targets, max_iter: int = _NEWTON_MAX_ITER):
    """Vectorized Newton solve of exp_from_origin(w) = target.

    targets: (..., 3) points near the origin (in the near field).
    Returns (w, converged): per-lane solution and success mask. Lanes are
    fully independent: a lane's iterates never depend on other lanes, so
    batching cannot change results.
    """
    tgt = np.asarray(targets, dtype=float)
    w = tgt.copy()
    active = np.ones(tgt.shape[:-1], dtype=bool)
    for _ in range(max_iter):
        r = geodesic.exp_from_origin(w) - tgt
        res = np.sqrt(np.sum(r * r, axis=-1))
        active = active & (res > _NEWTON_TOL)
        if not np.any(active):
            break
        scale = np.maximum(1.0, np.sqrt(np.sum(w * w, axis=-1)))
        h = 1e-7 * scale
        jac = np.empty(tgt.shape[:-1] + (3, 3))
        for k in range(3):
            dw = np.zeros_like(w)
            dw[..., k] = h
            jac[..., :, k] = (geodesic.exp_from_origin(w + dw)
                              - geodesic.exp_from_origin(w - dw)) / (2.0 * h[..., None])
        step, regular = _solve3(jac, r)
        active = active & regular
        w = np.where(active[..., None], w - step, w)
    r = geodesic.exp_from_origin(w) - tgt
    res = np.sqrt(np.sum(r * r, axis=-1))
    return w, res <= 1e-8


def inverse_exp(p, q, restarts: int = 2):
    """Find the connecting geodesic from p to q in the near field.

    Returns (NilTangent at p with unit direction, arclength). Raises
    NoConvergence if Newton stalls and AmbiguousNearCutLocus when perturbed
    restarts land on a genuinely different connecting geodesic (the caller
    is expected to take the shorter one).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rel = group_mul(group_inv(p), q)
    if not np.any(rel):
        return NilTangent(p, np.zeros(3)), 0.0

    solutions = []
    seeds = [rel]
    rho = float(np.linalg.norm(rel))
    for k in range(restarts):
        ang = 0.35 * (k + 1)
        bump = np.array([np.cos(3.1 * k), np.sin(3.1 * k), 0.5 - 0.31 * k])
        seeds.append(rel + ang * rho * bump / np.linalg.norm(bump))
    for seed in seeds:
        w, ok = _newton_from(seed, rel)
        if ok:
            if not any(np.linalg.norm(w - s) < 1e-5 for s in solutions):
                solutions.append(w)
    if not solutions:
        raise NoConvergence("inverse_exp did not converge")
    if len(solutions) > 1:
        raise AmbiguousNearCutLocus(
            [(NilTangent(p, s / np.linalg.norm(s)), float(np.linalg.norm(s))) for s in solutions]
        )
    w = solutions[0]
    t = float(np.linalg.norm(w))
    if t == 0.0:
        return NilTangent(p, np.zeros(3)), 0.0
    return NilTangent(p, w / t), t


def _newton_from(seed, target, max_iter: int = _NEWTON_MAX_ITER):
    """Scalar Newton with an explicit starting point."""
    w = np.asarray(seed, dtype=float).copy()
    tgt = np.asarray(target, dtype=float)
    for _ in range(max_iter):
        r = geodesic.exp_from_origin(w) - tgt
        if np.linalg.norm(r) <= _NEWTON_TOL:
            return w, True
        h = 1e-7 * max(1.0, np.linalg.norm(w))
        jac = np.empty((3, 3))
        for k in range(3):
            dw = np.zeros(3)
            dw[k] = h
            jac[:, k] = (geodesic.exp_from_origin(w + dw) - geodesic.exp_from_origin(w - dw)) / (2.0 * h)
        try:
            w = w - np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            return w, False
    r = geodesic.exp_from_origin(w) - tgt
    return w, bool(np.linalg.norm(r) <= 1e-8)


def distance(p, q) -> float:
    """Hybrid distance: far-field estimate or Newton arclength.

    Far field is taken when the estimate of the translated difference is at
    or above NEAR_FIELD_THRESHOLD; Newton failures fall back to the far
    value, ambiguity near the cut locus takes the shorter geodesic.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rel = group_mul(group_inv(p), q)
    f = float(far_field_estimate(rel))
    if f >= NEAR_FIELD_THRESHOLD:
        return f
    try:
        _, t = inverse_exp(p, q)
        return t
    except AmbiguousNearCutLocus as exc:
        return min(t for _, t in exc.solutions)
    except NoConvergence:
        return f


def distance_to_origin_batch(rel) -> np.ndarray:
    """Vectorized hybrid distance d(o, rel) for (..., 3) translated points."""
    rel = np.asarray(rel, dtype=float)
    f = far_field_estimate(rel)
    near = f < NEAR_FIELD_THRESHOLD
    out = np.array(f, dtype=float, copy=True)
    if np.any(near):
        w, ok = inverse_exp_batch(rel[near])
        t = np.sqrt(np.sum(w * w, axis=-1))
        sub = np.where(ok, t, f[near])
        out[near] = sub
    return out


def distance_batch(p, q) -> np.ndarray:
    """Vectorized hybrid distance between broadcastable point batches."""
    rel = group_mul(group_inv(np.asarray(p, float)), np.asarray(q, float))
    return distance_to_origin_batch(rel)
