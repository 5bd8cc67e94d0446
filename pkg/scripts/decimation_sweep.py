"""Sweep decimation targets on a dense sphere and report error vs. size.

Usage:
    python3 scripts/decimation_sweep.py [--targets 5000,1000,200,100]
                                        [--rows 200] [--bake 128]

For each target: vertex count reached, sampled symmetric Hausdorff distance
(as % of the bounding diagonal), mean baked-normal error in degrees against
the true sphere normals, and wall time. A quick way to judge how hard a mesh
can be pushed before the baked normals stop hiding the geometry loss.
"""

import argparse
import time

import numpy as np

from craftvis.bake import bake_normal_map, face_tangents, rasterize_uv
from craftvis.decimate import decimate
from craftvis.fixtures import uv_sphere
from craftvis.geom import normalize_rows
from craftvis.sampling import project_to_surface
from craftvis.uvatlas import unwrap_uv


def sampled_hausdorff(a, b, subsample=29):
    probes = np.vstack([a.vertices, a.vertices[a.faces].mean(axis=1)])
    near, _, _ = project_to_surface(b, probes)
    d_ab = np.linalg.norm(probes - near, axis=1).max()
    back = b.vertices[::subsample]
    near2, _, _ = project_to_surface(a, back)
    d_ba = np.linalg.norm(back - near2, axis=1).max()
    return max(float(d_ab), float(d_ba))


def baked_error_deg(source, lod, resolution):
    atlas = unwrap_uv(lod.with_vertex_normals(), resolution=resolution)
    nm = bake_normal_map(source, atlas, resolution=resolution)
    fid, bary = rasterize_uv(atlas, resolution)
    rows, cols = np.nonzero(fid >= 0)
    f = fid[rows, cols]
    b = bary[rows, cols]
    fverts = atlas.faces[f]
    pos = np.einsum("ijk,ij->ik", atlas.vertices[fverts], b)
    nrm = normalize_rows(np.einsum("ijk,ij->ik", atlas.normals[fverts], b))
    tan_f, _ = face_tangents(atlas)
    t = normalize_rows(tan_f[f] - nrm * np.einsum("ij,ij->i", tan_f[f], nrm)[:, None])
    bi = np.cross(nrm, t)
    enc = nm.pixels[rows, cols].astype(np.float64) / 255.0 * 2.0 - 1.0
    world = normalize_rows(enc[:, 0:1] * t + enc[:, 1:2] * bi + enc[:, 2:3] * nrm)
    truth = normalize_rows(pos)
    dots = np.clip(np.einsum("ij,ij->i", world, truth), -1.0, 1.0)
    return float(np.degrees(np.arccos(dots)).mean())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--targets", default="5000,1000,200,100")
    ap.add_argument("--rows", type=int, default=200,
                    help="sphere tessellation (rows = cols)")
    ap.add_argument("--bake", type=int, default=128,
                    help="normal map resolution")
    args = ap.parse_args()

    targets = [int(t) for t in args.targets.split(",")]
    sphere = uv_sphere(rows=args.rows, cols=args.rows)
    source = sphere.with_vertex_normals()
    lo, hi = sphere.bbox()
    diag = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
    print(f"source: {sphere.vertex_count} vertices, diag {diag:.3f}")
    print(f"{'target':>8} {'reached':>8} {'hausdorff':>10} {'% diag':>7} "
          f"{'bake err':>9} {'seconds':>8}")
    for target in targets:
        t0 = time.perf_counter()
        lod = decimate(sphere, target)
        h = sampled_hausdorff(lod, sphere)
        err = baked_error_deg(source, lod, args.bake)
        dt = time.perf_counter() - t0
        print(f"{target:>8} {lod.vertex_count:>8} {h:>10.4f} "
              f"{100 * h / diag:>6.2f}% {err:>8.2f}° {dt:>8.1f}")


if __name__ == "__main__":
    main()
