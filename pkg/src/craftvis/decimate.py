"""Quadric error metric edge-collapse decimation.

Classic greedy scheme: every vertex carries a symmetric 4x4 quadric
summed from the (area-weighted) plane quadrics of its faces, every edge
gets the cost of collapsing to the position minimizing the combined
quadric, and a heap pops the cheapest legal collapse until the vertex
budget is met.  Heap entries are invalidated lazily through per-vertex
version counters rather than being removed.
"""

from __future__ import annotations

import heapq
import warnings

import numpy as np

# Packed symmetric 4x4 quadric layout:
#   [xx, xy, xz, xw, yy, yz, yw, zz, zw, ww]
_BOUNDARY_PENALTY = 10.0


def _face_plane_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-face packed plane quadrics, weighted by face area."""
    tri = vertices[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1)
    area = 0.5 * norm
    safe = np.maximum(norm, 1e-30)
    nu = n / safe[:, None]
    d = -np.einsum("ij,ij->i", nu, tri[:, 0])
    p = np.concatenate([nu, d[:, None]], axis=1)
    w = area[:, None]
    return np.stack([
        p[:, 0] * p[:, 0], p[:, 0] * p[:, 1], p[:, 0] * p[:, 2], p[:, 0] * p[:, 3],
        p[:, 1] * p[:, 1], p[:, 1] * p[:, 2], p[:, 1] * p[:, 3],
        p[:, 2] * p[:, 2], p[:, 2] * p[:, 3],
        p[:, 3] * p[:, 3],
    ], axis=1) * w


def _edge_table(faces: np.ndarray, n_vertices: int):
    """Unique undirected edges, their face counts, and one incident face id."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    keys = e[:, 0] * np.int64(n_vertices) + e[:, 1]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq_keys, starts, counts = np.unique(sorted_keys, return_index=True, return_counts=True)
    face_ids = order[starts] // 3
    edges = np.stack([uniq_keys // n_vertices, uniq_keys % n_vertices], axis=1)
    return edges, counts, face_ids


def _boundary_quadrics(vertices, faces, edges, counts, face_ids, quadrics):
    """Add perpendicular constraint planes along boundary edges, penalized."""
    b = counts == 1
    if not np.any(b):
        return
    be = edges[b]
    bf = face_ids[b]
    tri = vertices[faces[bf]]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    fn /= np.maximum(np.linalg.norm(fn, axis=1, keepdims=True), 1e-30)
    ev = vertices[be[:, 1]] - vertices[be[:, 0]]
    elen2 = np.einsum("ij,ij->i", ev, ev)
    c = np.cross(ev, fn)
    c /= np.maximum(np.linalg.norm(c, axis=1, keepdims=True), 1e-30)
    d = -np.einsum("ij,ij->i", c, vertices[be[:, 0]])
    p = np.concatenate([c, d[:, None]], axis=1)
    w = (_BOUNDARY_PENALTY * elen2)[:, None]
    k = np.stack([
        p[:, 0] * p[:, 0], p[:, 0] * p[:, 1], p[:, 0] * p[:, 2], p[:, 0] * p[:, 3],
        p[:, 1] * p[:, 1], p[:, 1] * p[:, 2], p[:, 1] * p[:, 3],
        p[:, 2] * p[:, 2], p[:, 2] * p[:, 3],
        p[:, 3] * p[:, 3],
    ], axis=1) * w
    np.add.at(quadrics, be[:, 0], k)
    np.add.at(quadrics, be[:, 1], k)


def _eval_cost(a, x, y, z):
    """Quadric form [x y z 1]^T Q [x y z 1] for a packed quadric."""
    return (x * (a[0] * x + 2.0 * (a[1] * y + a[2] * z + a[3]))
            + y * (a[4] * y + 2.0 * (a[5] * z + a[6]))
            + z * (a[7] * z + 2.0 * a[8])
            + a[9])


def _optimal_point(a, pi, pj):
    """Collapse target for a combined quadric: solved point, else best candidate."""
    a0, a1, a2, a3, a4, a5, a6, a7, a8, a9 = a
    det = (a0 * (a4 * a7 - a5 * a5)
           - a1 * (a1 * a7 - a5 * a2)
           + a2 * (a1 * a5 - a4 * a2))
    scale = abs(a0) + abs(a4) + abs(a7)
    if abs(det) > 1e-11 * scale * scale * scale + 1e-300:
        i00 = a4 * a7 - a5 * a5
        i01 = -(a1 * a7 - a2 * a5)
        i02 = a1 * a5 - a2 * a4
        i11 = a0 * a7 - a2 * a2
        i12 = -(a0 * a5 - a1 * a2)
        i22 = a0 * a4 - a1 * a1
        x = (-i00 * a3 - i01 * a6 - i02 * a8) / det
        y = (-i01 * a3 - i11 * a6 - i12 * a8) / det
        z = (-i02 * a3 - i12 * a6 - i22 * a8) / det
        return x, y, z, _eval_cost(a, x, y, z)
    mid = ((pi[0] + pj[0]) / 2.0, (pi[1] + pj[1]) / 2.0, (pi[2] + pj[2]) / 2.0)
    best, best_cost = None, None
    for cand in (mid, tuple(pi), tuple(pj)):
        c = _eval_cost(a, *cand)
        if best_cost is None or c < best_cost:
            best, best_cost = cand, c
    return best[0], best[1], best[2], best_cost


def decimate(mesh, target_vertices: int, return_info: bool = False):
    """Reduce a mesh to at most ``target_vertices`` via QEM edge collapse.

    Boundary edges are preserved with a stiff constraint quadric, and a
    collapse is skipped when it would flip a surviving face normal or
    pinch the surface (more than two common neighbors).  If the budget
    cannot be reached with legal collapses the best effort is returned
    and a warning is issued.
    """
    from .mesh import TriMesh

    if target_vertices < 3:
        raise ValueError("target_vertices must be >= 3")
    base = mesh.cleaned()
    nv = base.vertex_count
    if nv <= target_vertices:
        if return_info:
            return base, {"reached": True, "collapses": 0, "vertex_count": nv}
        return base

    pos = base.vertices.copy()
    faces = base.faces.copy()
    nf = len(faces)

    quadrics = np.zeros((nv, 10))
    fq = _face_plane_quadrics(pos, faces)
    for k in range(3):
        np.add.at(quadrics, faces[:, k], fq)
    edges, counts, face_ids = _edge_table(faces, nv)
    _boundary_quadrics(pos, faces, edges, counts, face_ids, quadrics)

    vertex_faces: list[set] = [set() for _ in range(nv)]
    for fi in range(nf):
        for vi in faces[fi]:
            vertex_faces[vi].add(fi)
    face_alive = np.ones(nf, dtype=bool)
    vertex_alive = np.ones(nv, dtype=bool)
    version = np.zeros(nv, dtype=np.int64)

    heap: list = []
    counter = 0
    pos_list = pos  # alias; mutated in place

    def push_edge(vi: int, vj: int):
        nonlocal counter
        a = (quadrics[vi] + quadrics[vj]).tolist()
        x, y, z, cost = _optimal_point(a, pos_list[vi].tolist(), pos_list[vj].tolist())
        if cost != cost:  # NaN guard for degenerate quadrics
            cost = float("inf")
        heapq.heappush(heap, (cost, counter, vi, vj, x, y, z,
                              int(version[vi]), int(version[vj])))
        counter += 1

    # Initial costs, vectorized across all edges.
    qa = quadrics[edges[:, 0]] + quadrics[edges[:, 1]]
    a0, a1, a2 = qa[:, 0], qa[:, 1], qa[:, 2]
    a3, a4, a5 = qa[:, 3], qa[:, 4], qa[:, 5]
    a6, a7, a8 = qa[:, 6], qa[:, 7], qa[:, 8]
    det = a0 * (a4 * a7 - a5 * a5) - a1 * (a1 * a7 - a5 * a2) + a2 * (a1 * a5 - a4 * a2)
    scale = np.abs(a0) + np.abs(a4) + np.abs(a7)
    solvable = np.abs(det) > 1e-11 * scale ** 3 + 1e-300
    dsafe = np.where(solvable, det, 1.0)
    i00 = a4 * a7 - a5 * a5
    i01 = -(a1 * a7 - a2 * a5)
    i02 = a1 * a5 - a2 * a4
    i11 = a0 * a7 - a2 * a2
    i12 = -(a0 * a5 - a1 * a2)
    i22 = a0 * a4 - a1 * a1
    ox = (-i00 * a3 - i01 * a6 - i02 * a8) / dsafe
    oy = (-i01 * a3 - i11 * a6 - i12 * a8) / dsafe
    oz = (-i02 * a3 - i12 * a6 - i22 * a8) / dsafe
    mid = (pos[edges[:, 0]] + pos[edges[:, 1]]) / 2.0
    ox = np.where(solvable, ox, mid[:, 0])
    oy = np.where(solvable, oy, mid[:, 1])
    oz = np.where(solvable, oz, mid[:, 2])

    def _vec_cost(x, y, z):
        return (x * (a0 * x + 2.0 * (a1 * y + a2 * z + a3))
                + y * (a4 * y + 2.0 * (a5 * z + a6))
                + z * (a7 * z + 2.0 * a8)
                + qa[:, 9])

    cost0 = np.nan_to_num(_vec_cost(ox, oy, oz), nan=np.inf)
    for ei in np.argsort(cost0, kind="stable"):
        heap.append((float(cost0[ei]), counter, int(edges[ei, 0]), int(edges[ei, 1]),
                     float(ox[ei]), float(oy[ei]), float(oz[ei]), 0, 0))
        counter += 1
    heapq.heapify(heap)

    alive_count = nv
    collapses = 0
    while alive_count > target_vertices and heap:
        cost, _, vi, vj, x, y, z, veri, verj = heapq.heappop(heap)
        if not (vertex_alive[vi] and vertex_alive[vj]):
            continue
        if version[vi] != veri or version[vj] != verj:
            continue

        shared = vertex_faces[vi] & vertex_faces[vj]
        if not shared:
            continue  # no longer neighbors

        ni = {int(v) for f in vertex_faces[vi] for v in faces[f]} - {vi}
        nj = {int(v) for f in vertex_faces[vj] for v in faces[f]} - {vj}
        if len(ni & nj) > 2:
            continue  # collapsing would pinch the surface

        # Normal-flip guard over surviving incident faces.
        affected = [f for f in (vertex_faces[vi] | vertex_faces[vj]) if f not in shared]
        if affected:
            fv = faces[affected]
            before = pos[fv]
            after = before.copy()
            newp = np.array([x, y, z])
            for k in range(3):
                sel = (fv[:, k] == vi) | (fv[:, k] == vj)
                after[sel, k] = newp
            nb = np.cross(before[:, 1] - before[:, 0], before[:, 2] - before[:, 0])
            na = np.cross(after[:, 1] - after[:, 0], after[:, 2] - after[:, 0])
            if np.any(np.einsum("ij,ij->i", nb, na) <= 0.0):
                continue

        # Commit the collapse: vj folds into vi at the optimal point.
        pos[vi] = (x, y, z)
        quadrics[vi] += quadrics[vj]
        for f in shared:
            face_alive[f] = False
            for v in faces[f]:
                if v != vi and v != vj:
                    vertex_faces[v].discard(f)
        vertex_faces[vi] -= shared
        vertex_faces[vj] -= shared
        for f in vertex_faces[vj]:
            row = faces[f]
            faces[f] = np.where(row == vj, vi, row)
            vertex_faces[vi].add(f)
        vertex_faces[vj] = set()
        vertex_alive[vj] = False
        version[vi] += 1
        version[vj] += 1
        alive_count -= 1
        collapses += 1

        neighbors = {int(v) for f in vertex_faces[vi] for v in faces[f]} - {vi}
        for n in sorted(neighbors):
            push_edge(vi, n)

    reached = alive_count <= target_vertices
    if not reached:
        warnings.warn(
            f"decimation stopped at {alive_count} vertices; no legal collapse "
            f"reaches target {target_vertices}", RuntimeWarning, stacklevel=2)

    remap = -np.ones(nv, dtype=np.int64)
    keep = np.where(vertex_alive)[0]
    remap[keep] = np.arange(len(keep))
    out_faces = remap[faces[face_alive]]
    result = TriMesh(vertices=pos[keep], faces=out_faces).cleaned()
    if return_info:
        return result, {"reached": reached, "collapses": collapses,
                        "vertex_count": result.vertex_count}
    return result
