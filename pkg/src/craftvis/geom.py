"""Small vector / quaternion helpers shared by mesh and render code."""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def normalize(v: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    """Return ``v / |v|``; if ``|v|`` is ~0 return ``fallback`` (or raise)."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < EPS:
        if fallback is None:
            raise ValueError("cannot normalize a zero-length vector")
        return np.asarray(fallback, dtype=np.float64)
    return v / n


def normalize_rows(a: np.ndarray, fallback=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Row-wise normalize; zero rows become ``fallback``."""
    a = np.asarray(a, dtype=np.float64)
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    out = np.divide(a, np.maximum(n, EPS))
    bad = (n < EPS)[..., 0]
    if np.any(bad):
        out[bad] = np.asarray(fallback, dtype=np.float64)
    return out


def look_rotation(forward: np.ndarray, up: np.ndarray) -> np.ndarray:
    """Rotation matrix whose rows map ``forward`` to +Z and ``up`` toward +Y.

    Builds an orthonormal frame (x', y', z') with z' along ``forward`` and
    y' the component of ``up`` perpendicular to it, then returns the matrix
    R whose rows are x', y', z'.  Applying R to a point expressed in world
    coordinates yields coordinates in that frame, so R @ forward == +Z.

    Raises ``ValueError`` when ``forward`` and ``up`` are (anti)parallel or
    either has zero length.
    """
    f = normalize(forward)
    u = np.asarray(up, dtype=np.float64)
    u = u - f * float(np.dot(u, f))
    nu = float(np.linalg.norm(u))
    if nu < 1e-9:
        raise ValueError("forward and up directions are parallel")
    u = u / nu
    x = np.cross(u, f)
    return np.stack([x, u, f])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a 3x3 rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix for a (w, x, y, z) quaternion (normalized first)."""
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
