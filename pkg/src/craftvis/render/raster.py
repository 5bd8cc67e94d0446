"""Triangle rasterizer core.

Deterministic by construction: triangles are drawn in a fixed order with
a strict less-than depth test at pixel centers, and multi-worker runs
split the image into disjoint row bands that each replay the full draw
list, so the output bytes never depend on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np



@dataclass
class Framebuffer:
    color: np.ndarray = field(repr=False)  # (H, W, 4) float, 0..1
    depth: np.ndarray = field(repr=False)  # (H, W) float, +inf empty
    layer: np.ndarray = field(repr=False)  # (H, W) int16, -1 empty

    @staticmethod
    def create(width: int, height: int, background=(0.1, 0.1, 0.12, 1.0)) -> "Framebuffer":
        color = np.empty((height, width, 4))
        color[:] = np.asarray(background, dtype=np.float64)
        return Framebuffer(
            color=color,
            depth=np.full((height, width), np.inf),
            layer=np.full((height, width), -1, dtype=np.int16),
        )

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]

    def image_uint8(self) -> np.ndarray:
        return np.clip(np.round(self.color * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class PreparedDraw:
    """A clipped, projected triangle batch ready to rasterize."""

    xy: np.ndarray = field(repr=False)          # (T, 3, 2) pixel coords
    inv_z: np.ndarray = field(repr=False)       # (T, 3)
    attr_over_z: np.ndarray = field(repr=False)  # (T, 3, K)
    shader: object = field(repr=False, default=None)
    layer_index: int = 0


def _clip_near(cam: np.ndarray, attrs: np.ndarray, faces: np.ndarray, near: float):
    """Clip triangles against z > near, interpolating attributes.

    Returns (tri_cam, tri_attr) arrays; triangles fully in front pass
    through untouched, straddling ones are clipped Sutherland-Hodgman
    style into one or two triangles.
    """
    z = cam[faces][:, :, 2]
    inside = z > near
    n_in = inside.sum(axis=1)
    keep = n_in == 3
    out_cam = [cam[faces[keep]]]
    out_attr = [attrs[faces[keep]]]

    partial = np.nonzero((n_in > 0) & (n_in < 3))[0]
    for fi in partial:
        poly_cam = []
        poly_attr = []
        idx = faces[fi]
        for k in range(3):
            a, b = idx[k], idx[(k + 1) % 3]
            pa, pb = cam[a], cam[b]
            aa, ab = attrs[a], attrs[b]
            ina, inb = pa[2] > near, pb[2] > near
            if ina:
                poly_cam.append(pa)
                poly_attr.append(aa)
            if ina != inb:
                s = (near - pa[2]) / (pb[2] - pa[2])
                poly_cam.append(pa + s * (pb - pa))
                poly_attr.append(aa + s * (ab - aa))
        for k in range(1, len(poly_cam) - 1):
            out_cam.append(np.stack([poly_cam[0], poly_cam[k], poly_cam[k + 1]])[None])
            out_attr.append(np.stack([poly_attr[0], poly_attr[k], poly_attr[k + 1]])[None])
    if len(out_cam) == 1:
        return out_cam[0], out_attr[0]
    return np.concatenate(out_cam), np.concatenate(out_attr)


def prepare_draw(camera, vertices_world: np.ndarray, faces: np.ndarray,
                 attrs: np.ndarray, shader, layer_index: int) -> PreparedDraw | None:
    """Transform, near-clip and project one mesh into a rasterizable batch."""
    if len(faces) == 0:
        return None
    cam = camera.to_camera(vertices_world)
    tri_cam, tri_attr = _clip_near(cam, attrs, faces, camera.near_plane())
    if len(tri_cam) == 0:
        return None
    flat = tri_cam.reshape(-1, 3)
    xy, z = camera.project(flat)
    inv_z = 1.0 / z.reshape(-1, 3)
    xy = xy.reshape(-1, 3, 2)
    attr_over_z = tri_attr * inv_z[:, :, None]
    return PreparedDraw(xy=xy, inv_z=inv_z, attr_over_z=attr_over_z,
                        shader=shader, layer_index=layer_index)


def _raster_band(fb: Framebuffer, draws, y_start: int, y_end: int) -> None:
    width = fb.width
    for draw in draws:
        if draw is None:
            continue
        xy = draw.xy
        shader = draw.shader
        for ti in range(len(xy)):
            t = xy[ti]
            x0f = max(int(np.floor(t[:, 0].min())), 0)
            x1f = min(int(np.ceil(t[:, 0].max())), width - 1)
            y0f = max(int(np.floor(t[:, 1].min())), y_start)
            y1f = min(int(np.ceil(t[:, 1].max())), y_end - 1)
            if x0f > x1f or y0f > y1f:
                continue
            ax, ay = t[0]
            bx, by = t[1]
            cx, cy = t[2]
            area = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
            if area == 0.0:
                continue
            px = np.arange(x0f, x1f + 1) + 0.5
            py = np.arange(y0f, y1f + 1) + 0.5
            gx, gy = np.meshgrid(px, py)
            b0 = ((bx - gx) * (cy - gy) - (cx - gx) * (by - gy)) / area
            b1 = ((cx - gx) * (ay - gy) - (ax - gx) * (cy - gy)) / area
            b2 = 1.0 - b0 - b1
            inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
            if not inside.any():
                continue
            iz = (b0 * draw.inv_z[ti, 0] + b1 * draw.inv_z[ti, 1]
                  + b2 * draw.inv_z[ti, 2])
            with np.errstate(divide="ignore"):
                z = 1.0 / iz
            rows = np.floor(gy).astype(np.int64)
            cols = np.floor(gx).astype(np.int64)
            visible = inside & (iz > 0) & (z < fb.depth[rows, cols])
            if not visible.any():
                continue
            vr = rows[visible]
            vc = cols[visible]
            w0 = b0[visible]
            w1 = b1[visible]
            w2 = b2[visible]
            izv = iz[visible]
            a = (w0[:, None] * draw.attr_over_z[ti, 0]
                 + w1[:, None] * draw.attr_over_z[ti, 1]
                 + w2[:, None] * draw.attr_over_z[ti, 2]) / izv[:, None]
            rgba = shader(a)
            opaque = rgba[:, 3] >= 0.5
            if not opaque.any():
                continue
            vr = vr[opaque]
            vc = vc[opaque]
            fb.color[vr, vc, :3] = np.clip(rgba[opaque, :3], 0.0, 1.0)
            fb.color[vr, vc, 3] = 1.0
            fb.depth[vr, vc] = z[visible][opaque]
            fb.layer[vr, vc] = draw.layer_index


def rasterize(fb: Framebuffer, draws, workers: int = 1) -> None:
    """Run the draw list; row bands make worker count irrelevant to output."""
    draws = [d for d in draws if d is not None]
    if not draws:
        return
    workers = max(1, int(workers))
    if workers == 1:
        _raster_band(fb, draws, 0, fb.height)
        return
    bounds = np.linspace(0, fb.height, workers + 1).astype(int)
    bands = [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)
             if bounds[i] < bounds[i + 1]]
    with ThreadPoolExecutor(max_workers=len(bands)) as pool:
        list(pool.map(lambda band: _raster_band(fb, draws, band[0], band[1]), bands))
