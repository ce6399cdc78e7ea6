"""Independent numerical oracles used by the tests.

Nothing here shares code with the production geodesic evaluators: the
coordinate Christoffel symbols below were derived symbolically from the two
metric tensors and frozen, and integration is a plain second-order coordinate
ODE. Agreement between these and the package's frame-based evaluators is the
evidence both derivations are right.
"""

import numpy as np

# Christoffel symbols of dx^2 + dy^2 + (dz - (x dy - y dx)/2)^2
# (rotation-invariant chart), indices Gamma[k][i][j], symmetric in (i, j).


def christoffel_rot(p):
    x, y, _ = p
    G = np.zeros((3, 3, 3))
    G[0][0][1] = G[0][1][0] = y / 4.0
    G[0][1][1] = -x / 2.0
    G[0][1][2] = G[0][2][1] = 0.5
    G[1][0][0] = -y / 2.0
    G[1][0][1] = G[1][1][0] = x / 4.0
    G[1][0][2] = G[1][2][0] = -0.5
    G[2][0][0] = -x * y / 4.0
    G[2][0][1] = G[2][1][0] = (x * x - y * y) / 8.0
    G[2][0][2] = G[2][2][0] = -x / 4.0
    G[2][1][1] = x * y / 4.0
    G[2][1][2] = G[2][2][1] = -y / 4.0
    return G


# Christoffel symbols of dx^2 + dy^2 + (dz - x dy)^2 (Heisenberg chart)


def christoffel_heis(p):
    x = p[0]
    G = np.zeros((3, 3, 3))
    G[0][1][1] = -x
    G[0][1][2] = G[0][2][1] = 0.5
    G[1][0][1] = G[1][1][0] = x / 2.0
    G[1][0][2] = G[1][2][0] = -0.5
    G[2][0][1] = G[2][1][0] = (x * x - 1.0) / 2.0
    G[2][0][2] = G[2][2][0] = -x / 2.0
    return G


def integrate_coordinate_geodesic(p0, v0, t, steps, christoffel):
    """RK4 on the second-order system xddot^k = -Gamma^k_ij xdot^i xdot^j."""

    def rhs(state):
        p, v = state[:3], state[3:]
        G = christoffel(p)
        acc = -np.einsum("kij,i,j->k", G, v, v)
        return np.concatenate([v, acc])

    s = np.concatenate([np.asarray(p0, float), np.asarray(v0, float)])
    h = t / steps
    for _ in range(steps):
        k1 = rhs(s)
        k2 = rhs(s + h / 2 * k1)
        k3 = rhs(s + h / 2 * k2)
        k4 = rhs(s + h * k3)
        s = s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s[:3], s[3:]


def heis_matrix(p):
    """Heisenberg point as the corresponding unipotent matrix."""
    x, y, z = p
    return np.array([[1.0, x, z], [0.0, 1.0, y], [0.0, 0.0, 1.0]])


def heis_point_of_matrix(m):
    return np.array([m[0, 1], m[1, 2], m[0, 2]])


def metric_speed_rot(p, v):
    """Metric norm of a coordinate velocity in the rotation-invariant chart."""
    x, y, _ = p
    w = v[2] + (y * v[0] - x * v[1]) / 2.0
    return np.sqrt(v[0] ** 2 + v[1] ** 2 + w * w)


def connected_components(mask):
    """4-connected labeling of a boolean image; returns (count, labels)."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.zeros(mask.shape, dtype=int)
    current = 0
    for i in range(mask.shape[0]):
        for j in range(mask.shape[1]):
            if mask[i, j] and labels[i, j] == 0:
                current += 1
                stack = [(i, j)]
                labels[i, j] = current
                while stack:
                    a, b = stack.pop()
                    for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        x, y = a + da, b + db
                        if (0 <= x < mask.shape[0] and 0 <= y < mask.shape[1]
                                and mask[x, y] and labels[x, y] == 0):
                            labels[x, y] = current
                            stack.append((x, y))
    return current, labels
