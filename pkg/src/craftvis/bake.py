"""Bake detail normals from a dense mesh onto decimated stand-ins.

For every texel of the stand-in's UV atlas a ray is cast along the
interpolated surface normal (both ways, a short distance relative to the
model size).  Where it hits the dense original, the original's smooth
normal is sampled and re-expressed in the texel's tangent frame; misses
and empty texels store the flat (0, 0, 1) normal.  A chain of such
stand-ins at decreasing vertex budgets forms a glyph asset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .decimate import decimate
from .geom import normalize_rows
from .mesh import TriMesh, load_obj, save_obj
from .texture import NormalMap
from .uvatlas import unwrap_uv

DEFAULT_LOD_TARGETS = (5000, 500, 100)
DEFAULT_BAKE_RESOLUTION = 1024
RAY_LENGTH_FRACTION = 0.02


def rasterize_uv(mesh: TriMesh, resolution: int):
    """Rasterize a mesh's faces in UV space at texel centers.

    Returns ``(face_id, bary)`` arrays of shapes (R, R) and (R, R, 3);
    ``face_id`` is -1 where no face covers the texel center.  v runs
    upward: texel row 0 is v near 1.
    """
    if mesh.uvs is None:
        raise ValueError("mesh has no UVs")
    r = resolution
    face_id = np.full((r, r), -1, dtype=np.int64)
    bary = np.zeros((r, r, 3))
    uv = mesh.uvs
    for fi, f in enumerate(mesh.faces):
        tri = uv[f] * r  # texel coordinates
        lo = np.floor(tri.min(axis=0) - 0.5).astype(int)
        hi = np.ceil(tri.max(axis=0) + 0.5).astype(int)
        x0, y0 = np.clip(lo, 0, r - 1)
        x1, y1 = np.clip(hi, 0, r - 1)
        xs = np.arange(x0, x1 + 1) + 0.5
        ys = np.arange(y0, y1 + 1) + 0.5
        if len(xs) == 0 or len(ys) == 0:
            continue
        px, py = np.meshgrid(xs, ys)
        d = tri[1] - tri[0], tri[2] - tri[0]
        denom = d[0][0] * d[1][1] - d[1][0] * d[0][1]
        if abs(denom) < 1e-12:
            continue
        qx = px - tri[0][0]
        qy = py - tri[0][1]
        b1 = (qx * d[1][1] - qy * d[1][0]) / denom
        b2 = (qy * d[0][0] - qx * d[0][1]) / denom
        b0 = 1.0 - b1 - b2
        inside = (b0 >= -1e-9) & (b1 >= -1e-9) & (b2 >= -1e-9)
        if not inside.any():
            continue
        rows = (r - 1) - (np.floor(py).astype(int))  # v up -> row down
        cols = np.floor(px).astype(int)
        rows, cols = rows[inside], cols[inside]
        face_id[rows, cols] = fi
        bary[rows, cols] = np.stack([b0[inside], b1[inside], b2[inside]], axis=-1)
    return face_id, bary


def face_tangents(mesh: TriMesh):
    """Per-face tangent, bitangent and handedness derived from the UVs."""
    if mesh.uvs is None:
        raise ValueError("mesh has no UVs")
    p = mesh.vertices[mesh.faces]
    t = mesh.uvs[mesh.faces]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    du1 = t[:, 1, 0] - t[:, 0, 0]
    dv1 = t[:, 1, 1] - t[:, 0, 1]
    du2 = t[:, 2, 0] - t[:, 0, 0]
    dv2 = t[:, 2, 1] - t[:, 0, 1]
    denom = du1 * dv2 - du2 * dv1
    safe = np.where(np.abs(denom) < 1e-20, 1.0, denom)
    tan = (e1 * dv2[:, None] - e2 * dv1[:, None]) / safe[:, None]
    bit = (e2 * du1[:, None] - e1 * du2[:, None]) / safe[:, None]
    degenerate = np.abs(denom) < 1e-20
    if degenerate.any():
        # Arbitrary in-plane direction for UV-degenerate faces.
        fn = np.cross(e1, e2)
        alt = np.cross(fn, np.where(np.abs(fn[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]]))
        tan[degenerate] = alt[degenerate]
        bit[degenerate] = np.cross(fn, alt)[degenerate]
    return normalize_rows(tan), normalize_rows(bit)


def _moller_trumbore(origins, dirs, v0, e1, e2):
    """Batch ray/triangle intersection; returns (hit_mask, t, b1, b2)."""
    p = np.cross(dirs, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, det, 1.0)
    s = origins - v0
    b1 = np.einsum("ij,ij->i", s, p) / inv
    q = np.cross(s, e1)
    b2 = np.einsum("ij,ij->i", dirs, q) / inv
    t = np.einsum("ij,ij->i", e2, q) / inv
    hit = ok & (b1 >= -1e-9) & (b2 >= -1e-9) & (b1 + b2 <= 1.0 + 1e-9)
    return hit, t, b1, b2


def bake_normal_map(original: TriMesh, lod: TriMesh, resolution: int = DEFAULT_BAKE_RESOLUTION,
                    ray_length_fraction: float = RAY_LENGTH_FRACTION) -> NormalMap:
    """Bake the original's smooth normals into the LOD's UV atlas.

    Rays start at each covered texel's surface point, run along the
    interpolated LOD normal for ``ray_length_fraction`` of the original's
    bounding diagonal in both directions, and sample the original's
    interpolated vertex normal at the nearest hit.  The sampled normal is
    encoded in the texel's tangent frame; misses encode flat (0, 0, 1).
    """
    if original.normals is None:
        original = original.with_vertex_normals()
    if lod.normals is None:
        lod = lod.with_vertex_normals()
    face_id, bary = rasterize_uv(lod, resolution)
    covered = face_id >= 0
    rows, cols = np.nonzero(covered)
    out = np.zeros((resolution, resolution, 3))
    out[..., 2] = 1.0
    if len(rows) == 0:
        return NormalMap.encode(out)

    f = face_id[rows, cols]
    b = bary[rows, cols]
    fverts = lod.faces[f]
    pos = np.einsum("ijk,ij->ik", lod.vertices[fverts], b)
    nrm = normalize_rows(np.einsum("ijk,ij->ik", lod.normals[fverts], b))
    tan_f, bit_f = face_tangents(lod)
    t = tan_f[f]
    t = normalize_rows(t - nrm * np.einsum("ij,ij->i", t, nrm)[:, None],
                       fallback=(1.0, 0.0, 0.0))
    b_ref = bit_f[f]
    bit = np.cross(nrm, t)
    flip = np.einsum("ij,ij->i", bit, b_ref) < 0
    bit[flip] = -bit[flip]

    tri = original.vertices[original.faces]
    centroids = tri.mean(axis=1)
    circum = np.linalg.norm(tri - centroids[:, None, :], axis=2).max(axis=1)
    ray_len = ray_length_fraction * original.bbox_diagonal()
    radius = ray_len + float(circum.max()) + 1e-12
    tree = cKDTree(centroids)
    neighbor_lists = tree.query_ball_point(pos, r=radius, workers=-1)

    counts = np.fromiter((len(nl) for nl in neighbor_lists), dtype=np.int64,
                         count=len(neighbor_lists))
    total = int(counts.sum())
    best_t = np.full(len(rows), np.inf)
    best_face = np.full(len(rows), -1, dtype=np.int64)
    best_b1 = np.zeros(len(rows))
    best_b2 = np.zeros(len(rows))
    if total:
        texel_idx = np.repeat(np.arange(len(rows)), counts)
        tri_idx = np.concatenate([np.asarray(nl, dtype=np.int64)
                                  for nl in neighbor_lists if len(nl)])
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        chunk = 2_000_000
        for s in range(0, total, chunk):
            sl = slice(s, min(s + chunk, total))
            ti = texel_idx[sl]
            fi = tri_idx[sl]
            hit, tval, b1, b2 = _moller_trumbore(
                pos[ti], nrm[ti], tri[fi, 0], e1[fi], e2[fi])
            hit &= np.abs(tval) <= ray_len
            if not hit.any():
                continue
            h = np.nonzero(hit)[0]
            # Keep the hit with the smallest |t| per texel; iterate hits in
            # order and take minima (np.minimum.at on |t|).
            cand_t = np.abs(tval[h])
            tex = ti[h]
            order = np.argsort(cand_t, kind="stable")
            tex_o = tex[order]
            first = np.unique(tex_o, return_index=True)[1]
            sel = order[first]
            better = cand_t[sel] < best_t[tex[sel]]
            sel = sel[better]
            best_t[tex[sel]] = cand_t[sel]
            best_face[tex[sel]] = fi[h][sel]
            best_b1[tex[sel]] = b1[h][sel]
            best_b2[tex[sel]] = b2[h][sel]

    hit_mask = best_face >= 0
    if hit_mask.any():
        hf = original.faces[best_face[hit_mask]]
        hb = np.stack([1.0 - best_b1[hit_mask] - best_b2[hit_mask],
                       best_b1[hit_mask], best_b2[hit_mask]], axis=-1)
        sampled = normalize_rows(np.einsum("ijk,ij->ik", original.normals[hf], hb))
        tt = t[hit_mask]
        bb = bit[hit_mask]
        nn = nrm[hit_mask]
        local = np.stack([
            np.einsum("ij,ij->i", sampled, tt),
            np.einsum("ij,ij->i", sampled, bb),
            np.einsum("ij,ij->i", sampled, nn),
        ], axis=-1)
        vals = np.zeros((len(rows), 3))
        vals[:, 2] = 1.0
        vals[hit_mask] = normalize_rows(local, fallback=(0.0, 0.0, 1.0))
        out[rows, cols] = vals
    return NormalMap.encode(out)


@dataclass(frozen=True)
class LodLevel:
    """One stand-in: unwrapped mesh, its baked normal map, and the
    pre-split (decimated) vertex count used for chain bookkeeping."""

    mesh: TriMesh
    normal_map: NormalMap = field(repr=False)
    base_vertex_count: int = 0


@dataclass(frozen=True)
class GlyphAsset:
    """A canonical mesh plus a chain of baked LOD stand-ins."""

    name: str
    canonical: TriMesh = field(repr=False)
    lods: tuple[LodLevel, ...] = field(repr=False)

    def __post_init__(self):
        counts = [l.base_vertex_count for l in self.lods]
        if any(c2 >= c1 for c1, c2 in zip(counts, counts[1:])):
            raise ValueError(f"LOD vertex counts must strictly decrease, got {counts}")
        for i, lod in enumerate(self.lods):
            if lod.mesh.uvs is None:
                raise ValueError(f"LOD {i} has no UVs")
            if np.any(lod.mesh.uvs < 0.0) or np.any(lod.mesh.uvs > 1.0):
                raise ValueError(f"LOD {i} has UVs outside [0, 1]")


def build_lod_chain(mesh: TriMesh, targets=DEFAULT_LOD_TARGETS,
                    bake_resolution: int = DEFAULT_BAKE_RESOLUTION,
                    name: str = "glyph") -> GlyphAsset:
    """Decimate, unwrap and bake a mesh into a glyph asset.

    Each target is decimated from the canonical mesh independently,
    unwrapped into an axis-projection atlas, and receives a normal map
    baked from the canonical geometry at ``bake_resolution``.
    """
    canonical = mesh.with_vertex_normals()
    lods = []
    for target in targets:
        base = decimate(canonical, int(target))
        unwrapped = unwrap_uv(base.with_vertex_normals(), resolution=bake_resolution)
        nm = bake_normal_map(canonical, unwrapped, resolution=bake_resolution)
        lods.append(LodLevel(mesh=unwrapped, normal_map=nm,
                             base_vertex_count=base.vertex_count))
    return GlyphAsset(name=name, canonical=canonical, lods=tuple(lods))


def save_glyph_asset(asset: GlyphAsset, directory) -> Path:
    """Write a glyph asset as OBJ + PNG files plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_obj(asset.canonical, directory / "canonical.obj")
    manifest = {"name": asset.name, "canonical": "canonical.obj", "lods": []}
    for i, lod in enumerate(asset.lods):
        mesh_rel = f"lod{i}.obj"
        nm_rel = f"lod{i}_normal.png"
        save_obj(lod.mesh, directory / mesh_rel)
        lod.normal_map.save(directory / nm_rel)
        manifest["lods"].append({
            "mesh": mesh_rel,
            "normal_map": nm_rel,
            "base_vertex_count": int(lod.base_vertex_count),
        })
    path = directory / "glyph.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_glyph_asset(path) -> GlyphAsset:
    """Load a glyph asset from its manifest (or containing directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / "glyph.json"
    manifest = json.loads(path.read_text())
    base = path.parent
    canonical = load_obj(base / manifest["canonical"])
    lods = []
    for entry in manifest["lods"]:
        lods.append(LodLevel(
            mesh=load_obj(base / entry["mesh"]),
            normal_map=NormalMap.load(base / entry["normal_map"]),
            base_vertex_count=int(entry["base_vertex_count"]),
        ))
    return GlyphAsset(name=manifest.get("name", base.name),
                      canonical=canonical, lods=tuple(lods))
