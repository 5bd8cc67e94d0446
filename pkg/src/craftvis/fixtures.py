"""Procedural inputs for tests, scripts, and the demo scene.

Everything here is seeded and cheap to generate, so tests never depend
on binary blobs checked into the repository.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import TriMesh, save_obj


# ---------------------------------------------------------------------------
# Images


def color_blocks(colors, block: int = 16) -> np.ndarray:
    """Solid color blocks side by side; handy for palette extraction."""
    colors = np.asarray(colors, dtype=np.uint8)
    out = np.zeros((block, block * len(colors), 3), dtype=np.uint8)
    for i, c in enumerate(colors):
        out[:, i * block:(i + 1) * block] = c
    return out


def ramp_image(width: int = 64, height: int = 64, axis: int = 1) -> np.ndarray:
    """Grayscale ramp (0..255) along the given axis, as RGB."""
    if axis == 1:
        ramp = np.linspace(0, 255, width)[None, :].repeat(height, axis=0)
    else:
        ramp = np.linspace(0, 255, height)[:, None].repeat(width, axis=1)
    g = np.round(ramp).astype(np.uint8)
    return np.stack([g, g, g], axis=-1)


def noise_texture(width: int = 64, height: int = 64, seed: int = 0,
                  cells: int = 8, base=(150, 120, 90), vary: int = 60) -> np.ndarray:
    """Smooth blotchy RGB texture from upsampled low-res noise."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1, 3))
    ys = np.linspace(0, cells, height)
    xs = np.linspace(0, cells, width)
    y0 = np.clip(ys.astype(int), 0, cells - 1)
    x0 = np.clip(xs.astype(int), 0, cells - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    c00 = coarse[y0][:, x0]
    c01 = coarse[y0][:, x0 + 1]
    c10 = coarse[y0 + 1][:, x0]
    c11 = coarse[y0 + 1][:, x0 + 1]
    smooth = (c00 * (1 - fy) * (1 - fx) + c01 * (1 - fy) * fx
              + c10 * fy * (1 - fx) + c11 * fy * fx)
    px = np.asarray(base, dtype=np.float64) + smooth * vary
    return np.clip(np.round(px), 0, 255).astype(np.uint8)


def stripe_texture(height: int = 96, width: int = 24, seed: int = 0) -> np.ndarray:
    """Horizontal-band texture resembling a scanned inked line.

    Row darkness wanders smoothly down the strip so nearby rows look
    alike and distant rows do not, which is the structure the 1D
    synthesis walk exploits.
    """
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * np.pi, 3)
    rows = np.arange(height)
    tone = (np.sin(rows / 7.0 + phase[0]) + 0.6 * np.sin(rows / 3.1 + phase[1])
            + 0.3 * np.sin(rows / 13.0 + phase[2]))
    tone = (tone - tone.min()) / (tone.max() - tone.min())
    base = 60 + tone * 160
    jitter = rng.normal(0, 6, size=(height, width))
    gray = np.clip(base[:, None] + jitter, 0, 255)
    px = np.stack([gray * 0.9, gray * 0.8, gray], axis=-1)
    return np.round(px).astype(np.uint8)


# ---------------------------------------------------------------------------
# Meshes


def grid_surface(n: int = 32, extent: float = 10.0, amplitude: float = 1.2,
                 seed: int = 0):
    """Wavy heightfield mesh plus per-vertex scalars.

    Returns (mesh, scalars) where scalars holds ``height`` and ``ridge``.
    """
    rng = np.random.default_rng(seed)
    ph = rng.uniform(0, 2 * np.pi, 2)
    xs = np.linspace(-extent / 2, extent / 2, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    gz = amplitude * (np.sin(gx * 0.9 + ph[0]) * np.cos(gy * 0.7 + ph[1])
                      + 0.4 * np.sin(gy * 1.7))
    verts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j
            b = a + 1
            c = a + n
            d = c + 1
            faces.append([a, c, b])
            faces.append([b, c, d])
    mesh = TriMesh(verts, np.asarray(faces, dtype=np.int64)).with_vertex_normals()
    scalars = {
        "height": gz.ravel().copy(),
        "ridge": np.abs(np.gradient(gz, axis=0)).ravel(),
    }
    return mesh, scalars


def uv_sphere(rows: int = 32, cols: int = 32, radius: float = 1.0) -> TriMesh:
    """Latitude/longitude sphere with (rows*cols + 2) vertices."""
    lat = np.linspace(0, np.pi, rows + 2)[1:-1]
    lon = np.linspace(0, 2 * np.pi, cols, endpoint=False)
    ll, gg = np.meshgrid(lat, lon, indexing="ij")
    ring = np.stack([
        np.sin(ll) * np.cos(gg),
        np.sin(ll) * np.sin(gg),
        np.cos(ll),
    ], axis=-1).reshape(-1, 3) * radius
    verts = np.vstack([[[0, 0, radius]], ring, [[0, 0, -radius]]])
    top, bottom = 0, len(verts) - 1
    faces = []
    for j in range(cols):
        faces.append([top, 1 + j, 1 + (j + 1) % cols])
    for i in range(rows - 1):
        for j in range(cols):
            a = 1 + i * cols + j
            b = 1 + i * cols + (j + 1) % cols
            c = a + cols
            d = b + cols
            faces.append([a, c, b])
            faces.append([b, c, d])
    base = 1 + (rows - 1) * cols
    for j in range(cols):
        faces.append([bottom, base + (j + 1) % cols, base + j])
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


_PHI = (1.0 + np.sqrt(5.0)) / 2.0


def icosahedron(radius: float = 1.0) -> TriMesh:
    v = np.array([
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ], dtype=np.float64)
    v *= radius / np.linalg.norm(v[0])
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return TriMesh(v, f)


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Icosahedron with each edge split ``subdivisions`` times, on a sphere."""
    mesh = icosahedron(radius)
    for _ in range(subdivisions):
        verts = list(map(tuple, mesh.vertices))
        index = {v: i for i, v in enumerate(verts)}
        mid_cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid_cache:
                m = (mesh.vertices[a] + mesh.vertices[b]) / 2.0
                m = m / np.linalg.norm(m) * radius
                tm = tuple(m)
                if tm not in index:
                    index[tm] = len(verts)
                    verts.append(tm)
                mid_cache[key] = index[tm]
            return mid_cache[key]

        new_faces = []
        for a, b, c in mesh.faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        mesh = TriMesh(np.asarray(verts), np.asarray(new_faces, dtype=np.int64))
    return mesh


# ---------------------------------------------------------------------------
# Lines, points, volumes


def helix_polylines(count: int = 3, points: int = 60, radius: float = 3.0,
                    pitch: float = 2.0, seed: int = 0):
    """List of (points, scalars) helix polylines winding upward."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        t = np.linspace(0, 4 * np.pi, points)
        r = radius * (0.6 + 0.4 * k / max(count - 1, 1))
        ph = rng.uniform(0, 2 * np.pi)
        pts = np.stack([
            r * np.cos(t + ph),
            r * np.sin(t + ph),
            pitch * t / (2 * np.pi) - pitch,
        ], axis=1)
        speed = 0.5 + 0.5 * np.sin(t * 1.5 + ph)
        out.append((pts, {"speed": speed}))
    return out


def scatter_points(count: int = 12, extent: float = 8.0, seed: int = 0):
    """Random points with a vector field ``flow`` and its magnitude ``mag``."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-extent / 2, extent / 2, size=(count, 3))
    flow = np.stack([
        -pos[:, 1], pos[:, 0], 0.3 * np.sin(pos[:, 2]),
    ], axis=1) + rng.normal(0, 0.1, size=(count, 3))
    mag = np.linalg.norm(flow, axis=1)
    return pos, flow, mag


def gaussian_volume(dims=(24, 24, 24), extent: float = 8.0, seed: int = 0):
    """values, origin, spacing for a few smooth blobs in a box."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    origin = np.array([-extent / 2] * 3)
    spacing = np.array([extent / d for d in dims])
    xs = origin[0] + (np.arange(nx) + 0.5) * spacing[0]
    ys = origin[1] + (np.arange(ny) + 0.5) * spacing[1]
    zs = origin[2] + (np.arange(nz) + 0.5) * spacing[2]
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    values = np.zeros(dims)
    for _ in range(3):
        c = rng.uniform(-extent / 4, extent / 4, 3)
        s = rng.uniform(extent / 10, extent / 5)
        d2 = (gx - c[0]) ** 2 + (gy - c[1]) ** 2 + (gz - c[2]) ** 2
        values += np.exp(-d2 / (2 * s * s))
    return values, origin, spacing


# ---------------------------------------------------------------------------
# A complete small scene on disk


def write_demo_scene(out_dir, *, compact: bool = True) -> Path:
    """Write data files, assets, and scene.json for a four-layer scene.

    Returns the scene.json path. ``compact`` keeps every asset small
    enough for test runs; scripts can pass False for a prettier render.
    """
    from .bake import build_lod_chain, save_glyph_asset
    from .color import ColorMap, LabColor, export_colormap
    from .linetex import SynthesisParams, save_synthesis, synthesize
    from .texture import (TextureImage, TextureSet, build_texture_set,
                          make_normal_map)

    def rgb_colormap(name, positions, rgbs):
        return ColorMap(name=name, positions=positions,
                        colors=tuple(LabColor.from_srgb(c) for c in rgbs))

    out = Path(out_dir)
    data_dir = out / "data"
    asset_dir = out / "assets"
    data_dir.mkdir(parents=True, exist_ok=True)
    asset_dir.mkdir(parents=True, exist_ok=True)

    n = 24 if compact else 64
    mesh, scalars = grid_surface(n=n, extent=10.0, seed=7)
    save_obj(mesh, data_dir / "terrain.obj")
    with open(data_dir / "terrain_vars.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["height", "ridge"])
        for h, r in zip(scalars["height"], scalars["ridge"]):
            w.writerow([f"{h:.6f}", f"{r:.6f}"])

    lines = helix_polylines(count=3, points=40 if compact else 90, seed=3)
    doc = {"polylines": [
        {"points": pts.tolist(), "scalars": {k: v.tolist() for k, v in sc.items()}}
        for pts, sc in lines]}
    (data_dir / "streams.json").write_text(json.dumps(doc))

    pos, flow, mag = scatter_points(count=10 if compact else 40, seed=11)
    with open(data_dir / "markers.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "mag", "flow_x", "flow_y", "flow_z"])
        for p, f, m in zip(pos, flow, mag):
            w.writerow([f"{p[0]:.6f}", f"{p[1]:.6f}", f"{p[2]:.6f}",
                        f"{m:.6f}", f"{f[0]:.6f}", f"{f[1]:.6f}", f"{f[2]:.6f}"])

    dims = (16, 16, 16) if compact else (40, 40, 40)
    values, origin, spacing = gaussian_volume(dims=dims, seed=5)
    values.astype(np.float32).tofile(data_dir / "plume.raw")
    (data_dir / "plume.json").write_text(json.dumps({
        "dims": list(dims), "origin": origin.tolist(),
        "spacing": spacing.tolist(), "dtype": "float32",
        "data": "plume.raw", "variable": "density",
    }))

    cmap = rgb_colormap(
        "demo-elevation", (0.0, 0.35, 0.7, 1.0),
        ((40, 60, 130), (70, 160, 170), (235, 200, 120), (200, 60, 40)))
    (asset_dir / "elevation.xml").write_bytes(export_colormap(cmap, "xml"))
    plume_cmap = rgb_colormap(
        "demo-plume", (0.0, 0.5, 1.0),
        ((20, 20, 80), (120, 40, 160), (255, 230, 120)))
    (asset_dir / "plume.xml").write_bytes(export_colormap(plume_cmap, "xml"))

    size = 48 if compact else 128
    entries = [TextureImage(noise_texture(size, size, seed=s, base=b))
               for s, b in ((1, (118, 132, 96)), (2, (168, 150, 110)))]
    ts = build_texture_set(entries, name="terrain")
    ts = TextureSet(name=ts.name, images=ts.images,
                    normal_maps=tuple(make_normal_map(im) for im in ts.images))
    from .texture import save_texture_set
    save_texture_set(ts, asset_dir / "terrain_set")

    src = TextureImage(stripe_texture(height=64, width=12, seed=4))
    res = synthesize(src, SynthesisParams(output_height=128 if compact else 512,
                                          seed=9))
    save_synthesis(res, asset_dir / "stream_tex.png")

    glyph_mesh = icosphere(2 if compact else 3, radius=1.0)
    stretched = TriMesh(glyph_mesh.vertices * np.array([0.5, 0.5, 1.0]),
                        glyph_mesh.faces)
    targets = (80, 40) if compact else (400, 120)
    asset = build_lod_chain(stretched, targets=targets,
                            bake_resolution=64 if compact else 256,
                            name="demo-arrow")
    save_glyph_asset(asset, asset_dir / "marker_glyph")

    scene_doc = {
        "name": "demo",
        "background": [24, 24, 30, 255],
        "seed": 0,
        "data": {
            "terrain": {"path": "data/terrain.obj", "format": "obj",
                        "variables": "data/terrain_vars.csv"},
            "streams": {"path": "data/streams.json", "format": "polylines"},
            "markers": {"path": "data/markers.csv", "format": "csv-points"},
            "plume": {"path": "data/plume.json", "format": "volume"},
        },
        "assets": {
            "elevation": {"kind": "colormap", "path": "assets/elevation.xml"},
            "plumeColors": {"kind": "colormap", "path": "assets/plume.xml"},
            "terrainSet": {"kind": "textureSet",
                           "path": "assets/terrain_set/textureset.json"},
            "streamTex": {"kind": "lineTexture", "path": "assets/stream_tex.png"},
            "markerGlyph": {"kind": "glyph",
                            "path": "assets/marker_glyph/glyph.json"},
        },
        "layers": [
            {"id": "terrain", "type": "surface", "data": "terrain",
             "bindings": {"color": "height"},
             "assets": {"colormap": "elevation", "texture_set": "terrainSet"},
             "style": {"blend_distance": 0.15}},
            {"id": "streams", "type": "line", "data": "streams",
             "bindings": {"color": "speed"},
             "assets": {"line_texture": "streamTex"},
             "style": {"geometry": "ribbon", "width": 0.35}},
            {"id": "markers", "type": "glyph", "data": "markers",
             "bindings": {"color": "mag", "orientation": "flow"},
             "assets": {"glyph": "markerGlyph", "colormap": "elevation"},
             "style": {"size_percent": 6.0, "orientation_mode": "vector"}},
            {"id": "plume", "type": "volume", "data": "plume",
             "bindings": {"color": "density"},
             "assets": {"colormap": "plumeColors"},
             "style": {"opacity_scale": 4.0}},
        ],
    }
    scene_path = out / "scene.json"
    scene_path.write_text(json.dumps(scene_doc, indent=2))
    return scene_path
