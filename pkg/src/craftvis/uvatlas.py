"""UV unwrapping: signed dominant-axis charts packed into the unit square.

Faces are grouped by the signed dominant axis of their normal into at
most six charts, each chart is planar-projected onto the two remaining
axes, and the chart rectangles are shelf-packed into [0, 1]^2 with a
gutter between them.  Simple, deterministic, and good enough for baking
normal maps onto decimated stand-in geometry.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

# For each signed dominant axis (+x, -x, +y, -y, +z, -z): the two source
# axes whose coordinates become (u, v).
_PROJ = {
    0: (1, 2), 1: (1, 2),
    2: (0, 2), 3: (0, 2),
    4: (0, 1), 5: (0, 1),
}


def _dominant_axis(face_normals: np.ndarray) -> np.ndarray:
    """Signed dominant axis id in 0..5 (+x, -x, +y, -y, +z, -z)."""
    axis = np.argmax(np.abs(face_normals), axis=1)
    sign = face_normals[np.arange(len(face_normals)), axis] < 0
    return axis * 2 + sign.astype(np.int64)


def unwrap_uv(mesh, gutter_texels: int = 2, resolution: int = 1024,
              return_charts: bool = False):
    """Unwrap a mesh into axis-projection charts with packed UVs.

    Returns a new mesh whose vertices are split per chart (a vertex used
    by faces in two charts appears once per chart) with ``uvs`` covering
    [0, 1]^2.  ``gutter_texels`` at the given texture ``resolution``
    separate chart islands so bilinear taps never bleed across charts.
    With ``return_charts=True`` also returns the per-vertex chart id.
    """
    if mesh.face_count == 0:
        raise ValueError("cannot unwrap a mesh with no faces")
    fn = mesh.face_normals()
    chart_of_face = _dominant_axis(fn)
    chart_ids = sorted(set(int(c) for c in chart_of_face))

    gutter = gutter_texels / float(resolution)
    new_vertices = []
    new_normals = [] if mesh.normals is not None else None
    new_faces = np.empty_like(mesh.faces)
    charts = []  # (chart_id, local_uv, vertex_slice, w, h)

    offset = 0
    for cid in chart_ids:
        fmask = chart_of_face == cid
        fidx = np.where(fmask)[0]
        used = np.unique(mesh.faces[fidx].ravel())
        local = -np.ones(mesh.vertex_count, dtype=np.int64)
        local[used] = np.arange(len(used)) + offset
        new_faces[fidx] = local[mesh.faces[fidx]]
        new_vertices.append(mesh.vertices[used])
        if new_normals is not None:
            new_normals.append(mesh.normals[used])
        ax_u, ax_v = _PROJ[cid]
        uv = mesh.vertices[used][:, (ax_u, ax_v)].copy()
        uv -= uv.min(axis=0)
        w, h = uv.max(axis=0) if len(uv) else (0.0, 0.0)
        charts.append([cid, uv, float(w), float(h)])
        offset += len(used)

    # Shelf packing under a global scale, found by bisection on feasibility.
    order = sorted(range(len(charts)), key=lambda i: (-charts[i][3], -charts[i][2], i))

    def try_pack(scale: float):
        x = gutter
        y = gutter
        shelf_h = 0.0
        placed = {}
        for i in order:
            w = charts[i][2] * scale
            h = charts[i][3] * scale
            if w + 2 * gutter > 1.0 or h + 2 * gutter > 1.0:
                return None
            if x + w + gutter > 1.0:
                y += shelf_h + gutter
                x = gutter
                shelf_h = 0.0
            if y + h + gutter > 1.0:
                return None
            placed[i] = (x, y)
            x += w + gutter
            shelf_h = max(shelf_h, h)
        return placed

    max_extent = max(max(c[2], c[3]) for c in charts)
    if max_extent <= 0.0:
        scale = 1.0
        placed = try_pack(scale) or {i: (gutter, gutter) for i in order}
    else:
        hi = (1.0 - 2 * gutter) / max_extent
        lo = 0.0
        placed = try_pack(hi)
        if placed is not None:
            scale = hi
        else:
            for _ in range(48):
                midv = (lo + hi) / 2.0
                attempt = try_pack(midv)
                if attempt is not None:
                    lo, placed = midv, attempt
                else:
                    hi = midv
            scale = lo
            if placed is None:
                raise RuntimeError("uv packing failed to converge")

    uvs = np.zeros((offset, 2))
    pos = 0
    for i, (cid, uv, w, h) in enumerate(charts):
        n = len(uv)
        ox, oy = placed[i]
        uvs[pos:pos + n] = uv * scale + np.array([ox, oy])
        pos += n

    chart_of_vertex = np.zeros(offset, dtype=np.int64)
    pos = 0
    for i, (cid, uv, w, h) in enumerate(charts):
        chart_of_vertex[pos:pos + len(uv)] = cid
        pos += len(uv)

    out = replace(
        mesh,
        vertices=np.concatenate(new_vertices),
        faces=new_faces,
        normals=np.concatenate(new_normals) if new_normals is not None else None,
        uvs=np.clip(uvs, 0.0, 1.0),
    )
    if return_charts:
        return out, chart_of_vertex
    return out
