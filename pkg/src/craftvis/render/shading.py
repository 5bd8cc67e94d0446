"""Fragment-level shading math: bin blending, triplanar weights,
texture fetches and the one-light Lambertian model."""

from __future__ import annotations

import numpy as np

DEFAULT_LIGHT_DIR = (-0.45, -0.8, -0.4)  # travel direction of the light
AMBIENT = 0.3
DEFAULT_TRIPLANAR_POWER = 8.0


def compute_bin_blend(t, n_bins: int, blend_distance: float):
    """Which texture bin(s) a normalized value falls into, with weights.

    [0, 1] splits into ``n_bins`` even bins; ``base = min(floor(t * n), n-1)``.
    Within ``blend_distance / 2`` of the nearest interior boundary the two
    adjacent bins mix linearly: the base bin keeps weight
    ``0.5 + dist / blend_distance`` (so exactly on a boundary both sides
    weigh 0.5), everywhere else the base bin has weight 1.  A zero
    ``blend_distance`` is a hard cut.  Returns (bin_a, bin_b, weight_a)
    where weight_b = 1 - weight_a.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if blend_distance < 0:
        raise ValueError("blend_distance must be >= 0")
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    base = np.minimum(np.floor(t * n_bins).astype(np.int64), n_bins - 1)
    if n_bins == 1:
        a, b, wa = base, base, np.ones_like(t)
    else:
        left = base / n_bins
        right = (base + 1) / n_bins
        dist_left = np.where(base >= 1, t - left, np.inf)
        dist_right = np.where(base <= n_bins - 2, right - t, np.inf)
        use_left = dist_left <= dist_right
        dist = np.where(use_left, dist_left, dist_right)
        partner = np.where(use_left, base - 1, base + 1)
        if blend_distance == 0.0:
            a, b, wa = base, base, np.ones_like(t)
        else:
            blend = dist < blend_distance / 2.0
            wa = np.where(blend, 0.5 + dist / blend_distance, 1.0)
            a = base
            b = np.where(blend, partner, base)
    if scalar:
        return int(a[0]), int(b[0]), float(wa[0])
    return a, b, wa


def triplanar_weights(normals: np.ndarray, power: float = DEFAULT_TRIPLANAR_POWER):
    """Per-axis triplanar blend weights, summing to 1.

    Weights are |n_axis|^power, computed after dividing by the largest
    component so high powers stay finite, then normalized.
    """
    n = np.abs(np.asarray(normals, dtype=np.float64))
    scalar = n.ndim == 1
    n = np.atleast_2d(n)
    peak = np.maximum(n.max(axis=-1, keepdims=True), 1e-12)
    w = (n / peak) ** power
    w = w / w.sum(axis=-1, keepdims=True)
    return w[0] if scalar else w


def sample_bilinear(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear fetch with wraparound addressing.

    ``image`` is (H, W, C) float; u goes right, v goes up (v=0 is the
    bottom row), both tile with period 1.
    """
    h, w = image.shape[:2]
    x = np.asarray(u, dtype=np.float64) * w - 0.5
    y = (1.0 - np.asarray(v, dtype=np.float64)) * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x0m = np.mod(x0, w)
    x1m = np.mod(x0 + 1, w)
    y0m = np.mod(y0, h)
    y1m = np.mod(y0 + 1, h)
    c00 = image[y0m, x0m]
    c10 = image[y0m, x1m]
    c01 = image[y1m, x0m]
    c11 = image[y1m, x1m]
    top = c00 * (1 - fx) + c10 * fx
    bot = c01 * (1 - fx) + c11 * fx
    return top * (1 - fy) + bot * fy


def lambert(albedo: np.ndarray, normals: np.ndarray,
            light_dir=DEFAULT_LIGHT_DIR, ambient: float = AMBIENT) -> np.ndarray:
    """One directional light plus ambient; albedo and result in [0, 1]."""
    l = -np.asarray(light_dir, dtype=np.float64)
    l = l / np.linalg.norm(l)
    d = np.maximum(normals @ l, 0.0)
    shade = ambient + (1.0 - ambient) * d
    return albedo * shade[..., None]


def colormap_lut(cmap, size: int = 1024) -> np.ndarray:
    """Precomputed sRGB float lookup table for a colormap."""
    from ..color import lab_to_srgb
    t = np.arange(size, dtype=np.float64) / (size - 1)
    return lab_to_srgb(cmap.sample(t)).astype(np.float64) / 255.0


def lut_lookup(lut: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.clip(np.round(np.asarray(t, dtype=np.float64) * (len(lut) - 1)),
                  0, len(lut) - 1).astype(np.int64)
    return lut[idx]
