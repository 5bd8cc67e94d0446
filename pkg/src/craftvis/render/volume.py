"""Front-to-back volume ray marching, composited over the opaque pass."""

from __future__ import annotations

import numpy as np

from .shading import colormap_lut

TERMINATION_ALPHA = 0.99
CONTRIBUTION_EPS = 0.004  # ~1/255: below this a pixel doesn't count as covered
ID_ALPHA = 0.25  # accumulated alpha at which the volume claims the ID buffer


def _ray_box(origins, dirs, lo, hi):
    """Slab test; returns (t_enter, t_exit) with t_enter > t_exit for misses."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - origins) * inv
        t1 = (hi - origins) * inv
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    # Parallel rays outside a slab never enter it.
    parallel = dirs == 0.0
    outside = parallel & ((origins < lo) | (origins > hi))
    tmin = np.where(parallel, -np.inf, tmin)
    tmax = np.where(parallel, np.inf, tmax)
    enter = np.nanmax(tmin, axis=-1)
    exit_ = np.nanmin(tmax, axis=-1)
    exit_ = np.where(outside.any(axis=-1), -np.inf, exit_)
    return enter, exit_


def raymarch_volume(grid, values_norm: np.ndarray, cmap, camera, fb,
                    opacity_scale: float = 1.0, step_size: float | None = None,
                    layer_index: int = 0):
    """March the grid front to back and composite under the depth buffer.

    ``values_norm`` is the grid's variable normalized to [0, 1] (shaped
    like the grid); each step contributes
    ``alpha = value * opacity_scale * step_size`` (clamped to [0, 1]) of
    the colormap color at the value.  Marching stops at accumulated
    alpha ``TERMINATION_ALPHA``, at the opaque depth, or at box exit.
    Returns the per-pixel contribution mask.
    """
    from ..scene import VoxelGrid

    norm_grid = VoxelGrid(np.asarray(values_norm, dtype=np.float64).reshape(grid.dims),
                          origin=grid.origin, spacing=grid.spacing)
    if step_size is None:
        step_size = float(grid.spacing.min())
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    lut = colormap_lut(cmap)
    lo, hi = grid.bbox()
    h, w = fb.height, fb.width
    eye = np.asarray(camera.position, dtype=np.float64)
    _, _, forward = camera.basis()

    dirs = camera.ray_directions().reshape(-1, 3)
    n_rays = len(dirs)
    contrib = np.zeros(n_rays, dtype=bool)
    id_claim = np.zeros(n_rays, dtype=bool)

    # Depth buffer stores camera-space z; convert to ray parameter t.
    cosang = dirs @ forward
    depth_flat = fb.depth.reshape(-1)
    with np.errstate(divide="ignore"):
        t_depth = np.where(np.isfinite(depth_flat), depth_flat / cosang, np.inf)

    chunk = 1 << 17
    near = camera.near_plane()
    for s in range(0, n_rays, chunk):
        sl = slice(s, min(s + chunk, n_rays))
        d = dirs[sl]
        orig = np.broadcast_to(eye, d.shape)
        enter, exit_ = _ray_box(orig, d, lo, hi)
        enter = np.maximum(enter, near)
        t_stop = np.minimum(exit_, t_depth[sl])
        alive = enter < t_stop
        if not alive.any():
            continue
        idx = np.nonzero(alive)[0]
        t = enter[idx] + 0.5 * step_size
        stop = t_stop[idx]
        acc_rgb = np.zeros((len(idx), 3))
        acc_a = np.zeros(len(idx))
        dirs_a = d[idx]
        while len(idx):
            pts = eye + dirs_a * t[:, None]
            v = np.clip(norm_grid.sample(pts), 0.0, 1.0)
            alpha = np.clip(v * opacity_scale * step_size, 0.0, 1.0)
            has = alpha > 0.0
            if has.any():
                rgb = lut[np.clip(np.round(v * (len(lut) - 1)), 0,
                                  len(lut) - 1).astype(np.int64)]
                weight = (1.0 - acc_a) * alpha
                acc_rgb += weight[:, None] * rgb
                acc_a += weight
            t = t + step_size
            done = (t >= stop) | (acc_a >= TERMINATION_ALPHA)
            if done.any():
                fidx = idx[done]
                fa = acc_a[done]
                covered = fa > CONTRIBUTION_EPS
                contrib[sl.start + fidx[covered]] = True
                id_claim[sl.start + fidx[fa >= ID_ALPHA]] = True
                rows = (sl.start + fidx) // w
                cols = (sl.start + fidx) % w
                base = fb.color[rows, cols, :3]
                fb.color[rows, cols, :3] = acc_rgb[done] + (1.0 - fa[:, None]) * base
                fb.color[rows, cols, 3] = np.maximum(fb.color[rows, cols, 3], fa)
                keepm = ~done
                idx = idx[keepm]
                t = t[keepm]
                stop = stop[keepm]
                acc_rgb = acc_rgb[keepm]
                acc_a = acc_a[keepm]
                dirs_a = dirs_a[keepm]

    claim = id_claim.reshape(h, w)
    fb.layer[claim] = layer_index
    return contrib.reshape(h, w)
