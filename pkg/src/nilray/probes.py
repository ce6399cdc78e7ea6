"""Numerical experiments: conjugate multiplicity, vertical shortcut, angular size.

These probes measure the geometry rather than assume it: thresholds like the
first conjugate distance are located by root searches over launched geodesic
families and published as artifacts, never hardcoded. All grids are fixed and
deterministic, and outputs are written as CSV with the grid parameters in a
header comment.
"""

from __future__ import annotations

import csv

import numpy as np

from . import distance as dist
from . import geodesic
from .core import NilTangent, group_inv, group_mul

__all__ = [
    "NoBracket",
    "axis_solutions",
    "shoot_to_axis_point",
    "first_conjugate_threshold",
    "vertical_shortcut_threshold",
    "angular_radius",
    "angular_radius_horizontal",
    "shoot_between",
    "write_conjugate_csv",
    "write_shortcut_csv",
    "write_angular_csv",
    "write_geodesic_trace_csv",
]


class NoBracket(RuntimeError):
    """Bisection could not be bracketed (e.g. even the axial ray misses)."""


def _xyz(c, t):
    """Coordinates of exp_origin(sqrt(1-c^2), c, t), vectorized over (c, t)."""
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    a = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    p = geodesic.exp_origin(a, c, t)
    return p[..., 0], p[..., 1], p[..., 2]


def _polish(c, t, h, iters: int = 40):
    """Newton polish of (x(c,t), z(c,t) - h) = 0 with FD Jacobian."""
    for _ in range(iters):
        x, y, z = _xyz(c, t)
        f = np.array([x, z - h])
        if np.linalg.norm(f) < 1e-12:
            break
        eps = 1e-7
        xc, _, zc = _xyz(c + eps, t)
        xt, _, zt = _xyz(c, t + eps)
        jac = np.array([[(xc - x) / eps, (xt - x) / eps],
                        [(zc - z) / eps, (zt - z) / eps]])
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            return None
        c, t = c - step[0], t - step[1]
        if not (0.0 < c <= 1.0) or t <= 0.0:
            return None
    x, y, z = _xyz(c, t)
    if abs(x) < 1e-8 and abs(y) < 1e-6 and abs(z - h) < 1e-8:
        return float(c), float(t)
    return None


def axis_solutions(h: float, n_c: int = 400) -> list:
    """All geodesics from the origin to (0, 0, h), modulo vertical rotation.

    Returns (a, c, t) triples sorted by arclength t, reported with a >= 0
    and phase 0; the axial geodesic (0, 1, h) is always present. Helical
    families are found by locating full horizontal returns (sign changes of
    x with y near zero) on a (c, t) grid, bisecting z - h along each return
    branch in c, then polishing with 2D Newton.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    sols = [(0.0, 1.0, float(h))]
    cs = np.linspace(1e-3, 1.0 - 1e-9, n_c)
    t_cap = 1.2 * h + 10.0

    # At the k-th full horizontal return the excursion collapses; detect by
    # sign changes of x with y near zero (vectorized bisection over all c),
    # then solve z = h along each return branch by a sign change in c.
    for k in range(1, 60):
        t_guess = 2.0 * np.pi * k / cs
        valid = t_guess <= t_cap
        if not np.any(valid):
            break
        lo = t_guess * 0.9
        hi = t_guess * 1.1
        xlo = _xyz(cs, lo)[0]
        xhi = _xyz(cs, hi)[0]
        valid &= (xlo * xhi <= 0)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            xm = _xyz(cs, mid)[0]
            left = xlo * xm <= 0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            xlo = np.where(left, xlo, xm)
        root = 0.5 * (lo + hi)
        x, y, z = _xyz(cs, root)
        good = valid & (np.abs(y) < 1e-3 * np.maximum(1.0, 2.0 / cs))
        if not np.any(good):
            continue
        gi = np.flatnonzero(good)
        dz = z[gi] - h
        for j in range(len(gi) - 1):
            if gi[j + 1] != gi[j] + 1:
                continue
            if dz[j] == 0.0 or dz[j] * dz[j + 1] < 0:
                c0 = 0.5 * (cs[gi[j]] + cs[gi[j + 1]])
                t0 = 0.5 * (root[gi[j]] + root[gi[j + 1]])
                pol = _polish(c0, t0, h)
                if pol is not None:
                    c_s, t_s = pol
                    a_s = float(np.sqrt(max(0.0, 1.0 - c_s * c_s)))
                    sols.append((a_s, c_s, t_s))
    # dedup modulo tolerance
    out = []
    for s in sorted(sols, key=lambda s: s[2]):
        if not any(abs(s[0] - o[0]) < 1e-5 and abs(s[1] - o[1]) < 1e-5
                   and abs(s[2] - o[2]) < 1e-5 for o in out):
            out.append(s)
    return out


def shoot_to_axis_point(h: float, n_c: int = 400) -> list:
    """Spec-facing name for the axis shooting probe."""
    return axis_solutions(h, n_c=n_c)


def first_conjugate_threshold(h_lo: float = 4.0, h_hi: float = 16.0,
                              n_h: int = 49, n_c: int = 400):
    """Locate h*: the axis height where a second connecting geodesic appears.

    Sweeps counts over an h-grid, then bisects the first transition.
    Returns (h_star, sweep) where sweep is a list of (h, count).
    """
    hs = np.linspace(h_lo, h_hi, n_h)
    counts = [len(axis_solutions(float(h), n_c=n_c)) for h in hs]
    sweep = list(zip([float(h) for h in hs], counts))
    idx = next((i for i, c in enumerate(counts) if c >= 2), None)
    if idx is None:
        raise NoBracket("no multiplicity transition in the sweep range")
    if idx == 0:
        return float(hs[0]), sweep
    lo, hi = float(hs[idx - 1]), float(hs[idx])
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if len(axis_solutions(mid, n_c=n_c)) >= 2:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), sweep


def vertical_shortcut_threshold(h_lo: float = 4.0, h_hi: float = 16.0,
                                n_h: int = 49, n_c: int = 400):
    """Smallest sampled height where some helix beats the axial geodesic.

    Returns (h0, details) with details rows (h, t_best, a, c); t_best < h
    marks the shortcut regime.
    """
    hs = np.linspace(h_lo, h_hi, n_h)
    rows = []
    h0 = None
    for h in hs:
        sols = axis_solutions(float(h), n_c=n_c)
        best = min(sols, key=lambda s: s[2])
        rows.append((float(h), best[2], best[0], best[1]))
        if h0 is None and best[2] < h - 1e-9:
            h0 = float(h)
    if h0 is None:
        raise NoBracket("no shortcut found in the sweep range")
    return h0, rows


def _ray_min_distance(a: float, c: float, h: float, n_t: int = 3000) -> float:
    """Minimum distance to the origin along the whole upward ray.

    The geodesic is launched at (0,0,-h) with direction (a, 0, c); its
    height is strictly increasing, so approaches to the sphere stop once
    the center height is passed and a budget of h plus a few climb
    periods sees every candidate minimum. Values near the hit threshold
    always fall in the near field, where the distance is Newton-exact.
    """
    if c <= 0:
        raise ValueError("launch must point upward")
    offset = np.array([0.0, 0.0, -h])
    ts = np.linspace(1e-6, h + 8.0 * np.pi, n_t)
    d = dist.distance_to_origin_batch(geodesic.exp_origin(a, c, ts) + offset)
    idx = int(np.argmin(d))
    lo = ts[max(0, idx - 1)]
    hi = ts[min(len(ts) - 1, idx + 1)]
    for _ in range(50):
        m1 = lo + (hi - lo) * 0.382
        m2 = lo + (hi - lo) * 0.618
        d1 = dist.distance_to_origin_batch((geodesic.exp_origin(a, c, m1) + offset)[None, :])[0]
        d2 = dist.distance_to_origin_batch((geodesic.exp_origin(a, c, m2) + offset)[None, :])[0]
        if d1 < d2:
            hi = m2
        else:
            lo = m1
    pm = geodesic.exp_origin(a, c, 0.5 * (lo + hi)) + offset
    return float(min(d[idx], dist.distance_to_origin_batch(pm[None, :])[0]))


def angular_radius(h: float, r: float, tol: float = 1e-3) -> float:
    """Angular radius of the central image of a sphere seen up the axis.

    Launches geodesics from (0,0,-h) toward a radius-r sphere at the
    origin and bisects the hit/miss boundary over the polar launch angle,
    starting from the axial ray and stopping at the first escaping
    direction, which keeps the bisection inside the central image (the
    mirage rings sit beyond the escape gap). The returned angle hovers
    around atan(r/2) for large h: rays inside that cone are trapped in a
    tube thinner than the sphere, which is why the central image never
    shrinks away.
    """
    if not h > r > 0:
        raise ValueError("need h > r > 0")

    def hits(theta: float) -> bool:
        return _ray_min_distance(np.sin(theta), np.cos(theta), h) <= r

    if not hits(1e-6):
        raise NoBracket("axial ray misses the sphere")
    lo = 1e-6
    hi = None
    for theta in np.linspace(0.05, np.pi / 2 - 1e-3, 48):
        if not hits(float(theta)):
            hi = float(theta)
            break
        lo = float(theta)
    if hi is None:
        raise NoBracket("no missing direction below 90 degrees")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hits(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def angular_radius_horizontal(h: float, r: float, tol: float = 1e-3,
                              n_azimuth: int = 12) -> float:
    """Contrast probe: apparent radius of the sphere from (h, 0, 0).

    Unlike the vertical view there are no conjugate effects propping the
    image up: it shrinks as the viewpoint recedes, and anisotropically so
    (the widest extent sits on a sheared azimuth; distant images appear
    elongated and rotated). The returned value is the largest bisected
    extent of the image connected to the central ray over a fixed azimuth
    fan. Measured decay is faster than the euclidean asin(r/h).
    """
    if not h > r > 0:
        raise ValueError("need h > r > 0")
    base = np.array([h, 0.0, 0.0])

    def hits(theta: float, psi: float) -> bool:
        v = np.array([-np.cos(theta),
                      np.sin(theta) * np.cos(psi),
                      np.sin(theta) * np.sin(psi)])
        ts = np.linspace(1e-6, 2.2 * h, 700)
        pts = geodesic.exp(NilTangent(base, v), ts)
        return bool(np.min(dist.distance_to_origin_batch(pts)) <= r)

    if not hits(1e-9, 0.0):
        raise NoBracket("central ray misses the sphere")
    widest = 0.0
    for psi in np.linspace(0.0, np.pi, n_azimuth, endpoint=False):
        lo, hi = 0.0, 1.2
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if hits(mid, float(psi)):
                lo = mid
            else:
                hi = mid
        widest = max(widest, 0.5 * (lo + hi))
    return widest


def shoot_between(p, q, n_phi: int = 16, n_c: int = 24, n_t: int = 24,
                  t_hi: float | None = None, top: int = 192):
    """Multi-start shooting oracle for point-to-point geodesics.

    Independent of the single-seed Newton used by the distance function: a
    coarse grid over launch direction and arclength feeds batched Newton
    from many basins. Returns sorted arclengths of distinct connecting
    geodesics (the first entry is the oracle distance).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rel = group_mul(group_inv(p), q)
    f = float(dist.far_field_estimate(rel))
    if f == 0.0 and not np.any(rel):
        return [0.0]
    lo = max(1e-3, 0.8 * f)
    hi = t_hi if t_hi is not None else max(2.5 * f, f + 2.0 * np.pi + 1.0)
    phis = np.linspace(-np.pi, np.pi, n_phi, endpoint=False)
    cs = np.linspace(-0.999, 0.999, n_c)
    ts = np.linspace(lo, hi, n_t)
    P, C, T = np.meshgrid(phis, cs, ts, indexing="ij")
    A = np.sqrt(1.0 - C ** 2)
    W = np.stack([T * A * np.cos(P), T * A * np.sin(P), T * C], axis=-1).reshape(-1, 3)
    res = geodesic.exp_from_origin(W) - rel
    r2 = np.sum(res * res, axis=-1)
    order = np.argsort(r2)[:top]
    w, ok = _newton_batch_from(W[order], rel)
    sols = []
    for wi, oki in zip(w, ok):
        if not oki:
            continue
        t = float(np.linalg.norm(wi))
        if not any(abs(t - s) < 1e-6 for s in sols):
            # distinct arclengths only; rotations of one family share t
            sols.append(t)
    if not sols:
        return [f]
    return sorted(sols)


def _newton_batch_from(seeds, target, max_iter: int = 48):
    """Batched Newton on exp(w) = target from explicit seeds."""
    w = np.array(seeds, dtype=float)
    tgt = np.broadcast_to(np.asarray(target, dtype=float), w.shape)
    active = np.ones(w.shape[0], dtype=bool)
    for _ in range(max_iter):
        r = geodesic.exp_from_origin(w) - tgt
        res = np.sqrt(np.sum(r * r, axis=-1))
        active = active & (res > 1e-11)
        if not np.any(active):
            break
        h = 1e-7 * np.maximum(1.0, np.sqrt(np.sum(w * w, axis=-1)))
        jac = np.empty(w.shape[:-1] + (3, 3))
        for k in range(3):
            dw = np.zeros_like(w)
            dw[..., k] = h
            jac[..., :, k] = (geodesic.exp_from_origin(w + dw)
                              - geodesic.exp_from_origin(w - dw)) / (2.0 * h[..., None])
        step, regular = dist._solve3(jac, r)
        active = active & regular
        limit = 0.5 * np.maximum(1.0, np.sqrt(np.sum(w * w, axis=-1)))
        sn = np.sqrt(np.sum(step * step, axis=-1))
        scale = np.minimum(1.0, limit / np.maximum(sn, 1e-300))
        w = np.where(active[:, None], w - step * scale[:, None], w)
    r = geodesic.exp_from_origin(w) - tgt
    res = np.sqrt(np.sum(r * r, axis=-1))
    return w, res <= 1e-8


# ---------------------------------------------------------------------------
# CSV output

def _write_csv(path, header_comment: str, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        writer.writerows(rows)


def write_conjugate_csv(path, h_values, n_c: int = 400):
    rows = []
    for h in h_values:
        sols = axis_solutions(float(h), n_c=n_c)
        packed = "|".join(f"{a:.8f};{c:.8f};{t:.8f}" for a, c, t in sols)
        rows.append((f"{h:.6f}", len(sols), packed))
    _write_csv(path, f"grid: n_c={n_c}; solutions packed as a;c;t|...",
               ["h", "count", "solutions"], rows)


def write_shortcut_csv(path, h_lo, h_hi, n_h, n_c: int = 400):
    h0, rows = vertical_shortcut_threshold(h_lo, h_hi, n_h, n_c)
    out = [(f"{h:.6f}", f"{t:.8f}", f"{a:.8f}", f"{c:.8f}", int(t < h - 1e-9))
           for h, t, a, c in rows]
    _write_csv(path, f"grid: h in [{h_lo},{h_hi}] n_h={n_h} n_c={n_c}; h0={h0:.6f}",
               ["h", "t_best", "a", "c", "shortcut"], out)
    return h0


def write_angular_csv(path, pairs):
    rows = [(f"{h:.6f}", f"{r:.6f}", f"{angular_radius(h, r):.8f}") for h, r in pairs]
    _write_csv(path, "angular radius of the central image from (0,0,-h)",
               ["h", "r", "angle_rad"], rows)


def write_geodesic_trace_csv(path, a: float, c: float, t_max: float, n: int = 200,
                             ode_steps: int = 4000):
    ts = np.linspace(0.0, t_max, n)
    closed = geodesic.exp_origin(a, c, ts)
    v = NilTangent(np.zeros(3), np.array([a, 0.0, c]))
    ode = geodesic.geodesic_ode(v, ts, steps=ode_steps)
    rows = [(f"{t:.8f}",
             f"{closed[i,0]:.12f}", f"{closed[i,1]:.12f}", f"{closed[i,2]:.12f}",
             f"{ode[i,0]:.12f}", f"{ode[i,1]:.12f}", f"{ode[i,2]:.12f}")
            for i, t in enumerate(ts)]
    _write_csv(path, f"a={a} c={c} ode_steps={ode_steps}",
               ["t", "x_closed", "y_closed", "z_closed", "x_ode", "y_ode", "z_ode"], rows)
    diff = np.max(np.abs(closed - ode))
    return float(diff)
