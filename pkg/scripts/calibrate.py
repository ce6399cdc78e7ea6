#!/usr/bin/env python3
"""Calibration and certificates for the distance field; writes artifacts/.

Outputs:
  artifacts/farfield.json   far-field profile summary, bilipschitz constant L
                            over the validation grid, overestimate check,
                            Newton convergence rate, near/far continuity jump
  artifacts/conjugate.json  first conjugate threshold h*, count sweep, and
                            the vertical shortcut threshold h0

Deterministic: fixed grids and seeds only. Rerun after touching the distance
or geodesic modules and commit the diff.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from nilray import distance, geodesic, probes  # noqa: E402
from nilray.core import NilTangent  # noqa: E402


def fibonacci_directions(n):
    k = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * k / n)
    theta = np.pi * (1 + 5 ** 0.5) * k
    return np.stack([np.sin(phi) * np.cos(theta),
                     np.sin(phi) * np.sin(theta),
                     np.cos(phi)], axis=-1)


def validation_grid():
    """200 points: 20 directions x 10 log-spaced arclengths in [T, 50]."""
    dirs = fibonacci_directions(20)
    ts = np.geomspace(distance.NEAR_FIELD_THRESHOLD, 50.0, 10)
    pts = []
    for d in dirs:
        for t in ts:
            pts.append(geodesic.exp(NilTangent(np.zeros(3), d), float(t)))
    return np.asarray(pts)


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "artifacts")
    os.makedirs(out_dir, exist_ok=True)

    # --- far-field bilipschitz certificate over the validation grid
    pts = validation_grid()
    F = distance.far_field_estimate(pts)
    oracle = np.array([probes.shoot_between(np.zeros(3), p,
                                            n_phi=10, n_c=18, n_t=18)[0]
                       for p in pts])
    keep = (oracle >= distance.NEAR_FIELD_THRESHOLD) & (oracle <= 50.0 + 1e-9)
    ratio_over = float(np.max(F[keep] / oracle[keep]))
    ratio_under = float(np.max(oracle[keep] / F[keep]))
    L = max(ratio_over, ratio_under)

    # --- overestimate check on a denser cloud (soundness margin)
    rng = np.random.default_rng(2024)
    ws = rng.normal(size=(400, 3))
    ws /= np.linalg.norm(ws, axis=1)[:, None]
    ts = rng.uniform(0.05, 30.0, 400)
    cloud = geodesic.exp(NilTangent(np.zeros((400, 3)) * 0.0, ws), ts)
    over_margin = float(np.max(distance.far_field_estimate(cloud) / ts))

    # --- Newton convergence rate in the near field, with auto-lowered T
    T = distance.NEAR_FIELD_THRESHOLD
    while True:
        seeds = rng.normal(size=(300, 3))
        seeds /= np.linalg.norm(seeds, axis=1)[:, None]
        radii = rng.uniform(0.01, T * 0.99, 300)
        targets = geodesic.exp(NilTangent(np.zeros((300, 3)) * 0.0, seeds), radii)
        near = distance.far_field_estimate(targets) < T
        w, ok = distance.inverse_exp_batch(targets[near])
        rate = float(np.mean(ok))
        if rate >= 0.99:
            break
        T *= 0.8

    # --- near/far continuity jump
    worst_jump = 0.0
    for i in range(100):
        u = fibonacci_directions(100)[i]
        lo, hi = 0.1, 30.0
        for _ in range(50):
            m = 0.5 * (lo + hi)
            if distance.far_field_estimate(m * u) < T:
                lo = m
            else:
                hi = m
        s = 0.5 * (lo + hi)
        din = distance.distance(np.zeros(3), (s - 1e-6) * u)
        dout = distance.distance(np.zeros(3), (s + 1e-6) * u)
        worst_jump = max(worst_jump, abs(din - dout))

    zmax, ts_prof = distance._height_profile()
    farfield = {
        "form": "max(rho, v(|z|)) with v the height-reach profile",
        "threshold_T": T,
        "profile_t_max": float(ts_prof[-1]),
        "profile_z_max": float(zmax[-1]),
        "tail_alpha": float(ts_prof[-1] ** 2 / zmax[-1]),
        "validation_grid": "20 fibonacci directions x 10 geomspace arclengths in [T, 50]",
        "bilipschitz_L": L,
        "max_F_over_d": ratio_over,
        "max_d_over_F": ratio_under,
        "overestimate_margin_dense_cloud": over_margin,
        "newton_convergence_rate": rate,
        "near_far_jump_measured": worst_jump,
        "near_far_jump_over_T": worst_jump / T,
    }
    with open(os.path.join(out_dir, "farfield.json"), "w") as fh:
        json.dump(farfield, fh, indent=2)
    print(json.dumps(farfield, indent=2))

    # --- conjugate threshold and shortcut
    hstar, sweep = probes.first_conjugate_threshold(4.0, 16.0, n_h=25, n_c=400)
    hstar2, _ = probes.first_conjugate_threshold(4.0, 16.0, n_h=49, n_c=800)
    h0, rows = probes.vertical_shortcut_threshold(4.0, 16.0, n_h=25, n_c=400)
    conj = {
        "h_star": hstar,
        "h_star_refined": hstar2,
        "relative_change_under_refinement": abs(hstar - hstar2) / hstar,
        "sweep": sweep,
        "shortcut_h0": h0,
        "grid": {"h_lo": 4.0, "h_hi": 16.0, "n_h": 25, "n_c": 400},
    }
    with open(os.path.join(out_dir, "conjugate.json"), "w") as fh:
        json.dump(conj, fh, indent=2)
    print(json.dumps({k: conj[k] for k in
                      ("h_star", "h_star_refined", "shortcut_h0")}, indent=2))


if __name__ == "__main__":
    main()
