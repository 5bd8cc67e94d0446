"""Scene renderer: layers -> draw calls -> framebuffer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..bake import face_tangents
from ..geom import normalize_rows
from ..mesh import TriMesh
from ..sampling import (sample_density_mh, sample_random, sample_regular,
                        scalar_field)
from ..scene import (DataRange, LineSet, PointSet, Scene, SceneError, VoxelGrid,
                     validate_scene)
from .camera import Camera, frame_scene_camera
from .glyphs import place_glyphs, select_lod
from .lines import extrude_line
from .raster import Framebuffer, prepare_draw, rasterize
from .shading import (DEFAULT_TRIPLANAR_POWER, colormap_lut, compute_bin_blend,
                      lambert, lut_lookup, sample_bilinear, triplanar_weights)
from .volume import raymarch_volume

# Vertex attribute layout fed through the rasterizer.
A_POS = slice(0, 3)
A_NRM = slice(3, 6)
A_UV = slice(6, 8)
A_T = 8
A_TAN = slice(9, 12)
A_T2 = 12
ATTRS = 13

_AXIS_FRAMES = (
    # (plane u axis, plane v axis) per world axis for triplanar mapping
    (1, 2), (0, 2), (0, 1),
)


@dataclass(frozen=True)
class RenderResult:
    """Image plus instrumentation: depth, per-pixel layer ids, coverage."""

    image: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    layer_ids: np.ndarray = field(repr=False)
    layer_order: tuple = ()
    coverage: dict = field(default_factory=dict)

    def png_bytes(self) -> bytes:
        import io
        buf = io.BytesIO()
        Image.fromarray(self.image).save(buf, format="PNG")
        return buf.getvalue()


def save_render(result: RenderResult, path) -> None:
    Image.fromarray(result.image).save(path)


def save_depth(result: RenderResult, path) -> Path:
    """Write depth as float32 raw plus a small JSON header next to it."""
    path = Path(path)
    depth = result.depth.astype(np.float32)
    depth.tofile(path)
    header = {
        "width": int(depth.shape[1]),
        "height": int(depth.shape[0]),
        "dtype": "float32",
        "order": "row-major",
        "empty": "inf",
    }
    hpath = path.with_suffix(path.suffix + ".json")
    hpath.write_text(json.dumps(header, indent=2))
    return hpath


# ---------------------------------------------------------------------------
# Variable evaluation


def _eval_scalar_at(data, var: str, samples):
    geom = data.geometry
    pool = dict(data.scalars)
    if isinstance(geom, VoxelGrid) and "value" not in pool:
        pool["value"] = geom.values.ravel()
    if var not in pool:
        raise SceneError(f"data {data.name!r} has no scalar {var!r}")
    vals = pool[var]
    if isinstance(geom, PointSet):
        return vals
    if isinstance(geom, VoxelGrid):
        g = VoxelGrid(vals.reshape(geom.dims), origin=geom.origin, spacing=geom.spacing)
        return g.sample(samples.positions)
    if isinstance(geom, TriMesh):
        if samples.tri_indices is None:
            raise SceneError("surface samples lack triangle provenance")
        corners = vals[geom.faces[samples.tri_indices]]
        return np.einsum("ij,ij->i", corners, samples.barycentric)
    raise SceneError(f"cannot evaluate variables on {type(geom).__name__}")


def _eval_vector_at(data, var: str, samples):
    geom = data.geometry
    if var not in data.vectors:
        raise SceneError(f"data {data.name!r} has no vector {var!r}")
    vec = data.vectors[var]
    if isinstance(geom, PointSet):
        return vec
    if isinstance(geom, VoxelGrid):
        out = np.empty((samples.count, 3))
        for c in range(3):
            g = VoxelGrid(vec[:, c].reshape(geom.dims), origin=geom.origin,
                          spacing=geom.spacing)
            out[:, c] = g.sample(samples.positions)
        return out
    if isinstance(geom, TriMesh):
        corners = vec[geom.faces[samples.tri_indices]]
        return np.einsum("ijk,ij->ik", corners, samples.barycentric)
    raise SceneError(f"cannot evaluate vectors on {type(geom).__name__}")


def _range_for(layer, data, var: str) -> DataRange:
    if var in layer.ranges:
        return layer.ranges[var]
    if isinstance(data.geometry, VoxelGrid) and var == "value" \
            and var not in data.scalars:
        v = data.geometry.values
        lo, hi = float(v.min()), float(v.max())
        return DataRange(lo, hi if hi > lo else lo + 1.0)
    return data.scalar_range(var)


def _seed_points(layer, data, seed: int):
    """Sample seed points for glyph layers over non-point geometries."""
    geom = data.geometry
    if isinstance(geom, PointSet):
        from ..sampling import SampleSet
        return SampleSet(geom.positions, method="direct", params={})
    method = layer.style.get("sampling", "regular")
    layer_seed = int(layer.style.get("sample_seed", seed))
    if method == "regular":
        spacing = layer.style.get("sample_spacing")
        if spacing is None:
            lo, hi = geom.bbox()
            spacing = float(np.max(hi - lo)) / 10.0
        return sample_regular(geom, float(spacing))
    if method == "random":
        count = int(layer.style.get("sample_count", 100))
        return sample_random(geom, count, seed=layer_seed)
    if method == "density":
        count = int(layer.style.get("sample_count", 100))
        var = layer.bindings.get("color")
        if isinstance(geom, VoxelGrid):
            vals = data.scalars.get(var) if var else None
            fld = scalar_field(geom, vals)
        else:
            if var is None or var not in data.scalars:
                raise SceneError(
                    f"layer {layer.id!r}: density sampling on a surface needs a "
                    f"color-bound scalar variable")
            fld = scalar_field(geom, data.scalars[var])
        return sample_density_mh(fld, count, seed=layer_seed)
    raise SceneError(f"layer {layer.id!r}: unknown sampling method {method!r}")


# ---------------------------------------------------------------------------
# Shaders


def _constant_rgb(layer) -> np.ndarray:
    c = layer.style.get("constant_color", (200, 200, 200))
    return np.asarray(c, dtype=np.float64)[:3] / 255.0


def _two_sided(normals, world_pos, eye):
    view = world_pos - eye
    flip = np.einsum("ij,ij->i", normals, view) > 0
    out = normals.copy()
    out[flip] = -out[flip]
    return out


def _make_colormap_shader(lut, eye, light_dir, constant=None):
    def shader(attrs):
        n = normalize_rows(attrs[:, A_NRM])
        n = _two_sided(n, attrs[:, A_POS], eye)
        if lut is None:
            albedo = np.broadcast_to(constant, (len(attrs), 3))
        else:
            albedo = lut_lookup(lut, attrs[:, A_T])
        rgb = lambert(albedo, n, light_dir)
        return np.concatenate([rgb, np.ones((len(attrs), 1))], axis=1)
    return shader


def _texture_arrays(texture_set):
    entries = [im.rgb.astype(np.float64) / 255.0 for im in texture_set.images]
    nmaps = None
    if texture_set.normal_maps is not None:
        nmaps = [nm.decode() for nm in texture_set.normal_maps]
    masks = None
    if texture_set.alpha_masks is not None:
        masks = [m.astype(np.float64) / 255.0 for m in texture_set.alpha_masks]
    return entries, nmaps, masks


def _binned_fetch(entries, masks, u, v, bin_t, blend_distance):
    """Sample a texture set with bin blending; returns (rgb, alpha)."""
    n_bins = len(entries)
    a, b, wa = compute_bin_blend(bin_t, n_bins, blend_distance)
    rgb = np.empty((len(u), 3))
    alpha = np.ones(len(u))
    pairs = np.stack([a, b], axis=1)
    for (pa, pb) in {(int(x), int(y)) for x, y in pairs}:
        m = (a == pa) & (b == pb)
        if not m.any():
            continue
        ca = sample_bilinear(entries[pa], u[m], v[m])
        if pa == pb:
            rgb[m] = ca
        else:
            cb = sample_bilinear(entries[pb], u[m], v[m])
            rgb[m] = ca * wa[m, None] + cb * (1.0 - wa[m, None])
        if masks is not None:
            ma = sample_bilinear(masks[pa][..., None], u[m], v[m])[:, 0]
            alpha[m] = ma
    return rgb, alpha


def _make_line_shader(texture_set, lut, eye, light_dir, blend_distance,
                      constant=None):
    entries, nmaps, masks = (None, None, None)
    if texture_set is not None:
        entries, nmaps, masks = _texture_arrays(texture_set)

    def shader(attrs):
        n = normalize_rows(attrs[:, A_NRM])
        n = _two_sided(n, attrs[:, A_POS], eye)
        alpha = np.ones(len(attrs))
        if entries is not None:
            across = attrs[:, A_UV.start + 1]
            along = attrs[:, A_UV.start]
            rgb, alpha = _binned_fetch(entries, masks, across, along,
                                       attrs[:, A_T2], blend_distance)
            if nmaps is not None:
                tan = normalize_rows(attrs[:, A_TAN], fallback=(1.0, 0.0, 0.0))
                tan = normalize_rows(tan - n * np.einsum("ij,ij->i", tan, n)[:, None],
                                     fallback=(1.0, 0.0, 0.0))
                bit = np.cross(n, tan)
                a2, b2, wa2 = compute_bin_blend(attrs[:, A_T2], len(entries),
                                                blend_distance)
                pm = sample_bilinear(nmaps[0], across, along) if len(nmaps) == 1 \
                    else _blend_normal_maps(nmaps, a2, b2, wa2, across, along)
                n = normalize_rows(tan * pm[:, 0:1] + bit * pm[:, 1:2]
                                   + n * np.maximum(pm[:, 2:3], 0.0))
            if lut is not None:
                rgb = rgb * lut_lookup(lut, attrs[:, A_T])
        elif lut is not None:
            rgb = lut_lookup(lut, attrs[:, A_T])
        else:
            rgb = np.broadcast_to(constant, (len(attrs), 3)).copy()
        out = lambert(rgb, n, light_dir)
        return np.concatenate([out, alpha[:, None]], axis=1)
    return shader


def _blend_normal_maps(nmaps, a, b, wa, u, v):
    pm = np.empty((len(u), 3))
    for (pa, pb) in {(int(x), int(y)) for x, y in np.stack([a, b], axis=1)}:
        m = (a == pa) & (b == pb)
        if not m.any():
            continue
        na = sample_bilinear(nmaps[pa], u[m], v[m])
        if pa == pb:
            pm[m] = na
        else:
            nb = sample_bilinear(nmaps[pb], u[m], v[m])
            pm[m] = na * wa[m, None] + nb * (1.0 - wa[m, None])
    return pm


def _make_surface_shader(texture_set, lut, eye, light_dir, blend_distance,
                         period, power, constant=None):
    entries, nmaps, masks = (None, None, None)
    if texture_set is not None:
        entries, nmaps, masks = _texture_arrays(texture_set)

    def shader(attrs):
        n = normalize_rows(attrs[:, A_NRM])
        n = _two_sided(n, attrs[:, A_POS], eye)
        alpha = np.ones(len(attrs))
        if entries is not None:
            w = triplanar_weights(n, power)
            pos = attrs[:, A_POS]
            rgb = np.zeros((len(attrs), 3))
            perturb = np.zeros((len(attrs), 3))
            amask = np.zeros(len(attrs))
            for axis in range(3):
                ua, va = _AXIS_FRAMES[axis]
                u = pos[:, ua] / period
                v = pos[:, va] / period
                c_ax, a_ax = _binned_fetch(entries, masks, u, v,
                                           attrs[:, A_T2], blend_distance)
                rgb += w[:, axis:axis + 1] * c_ax
                amask += w[:, axis] * a_ax
                if nmaps is not None:
                    a2, b2, wa2 = compute_bin_blend(attrs[:, A_T2], len(entries),
                                                    blend_distance)
                    pm = _blend_normal_maps(nmaps, a2, b2, wa2, u, v)
                    e_u = np.zeros(3)
                    e_u[ua] = 1.0
                    e_v = np.zeros(3)
                    e_v[va] = 1.0
                    perturb += w[:, axis:axis + 1] * (pm[:, 0:1] * e_u + pm[:, 1:2] * e_v)
            if masks is not None:
                alpha = amask
            if nmaps is not None:
                n = normalize_rows(n + perturb)
            if lut is not None:
                rgb = rgb * lut_lookup(lut, attrs[:, A_T])
        elif lut is not None:
            rgb = lut_lookup(lut, attrs[:, A_T])
        else:
            rgb = np.broadcast_to(constant, (len(attrs), 3)).copy()
        out = lambert(rgb, n, light_dir)
        return np.concatenate([out, alpha[:, None]], axis=1)
    return shader


def _make_glyph_shader(lut, normal_map, eye, light_dir, constant=None):
    nm = normal_map.decode() if normal_map is not None else None

    def shader(attrs):
        n = normalize_rows(attrs[:, A_NRM])
        n = _two_sided(n, attrs[:, A_POS], eye)
        if nm is not None:
            tan = normalize_rows(attrs[:, A_TAN], fallback=(1.0, 0.0, 0.0))
            tan = normalize_rows(tan - n * np.einsum("ij,ij->i", tan, n)[:, None],
                                 fallback=(1.0, 0.0, 0.0))
            bit = np.cross(n, tan)
            pm = sample_bilinear(nm, attrs[:, A_UV.start],
                                 attrs[:, A_UV.start + 1])
            n = normalize_rows(tan * pm[:, 0:1] + bit * pm[:, 1:2]
                               + n * np.maximum(pm[:, 2:3], 0.0))
        if lut is None:
            albedo = np.broadcast_to(constant, (len(attrs), 3))
        else:
            albedo = lut_lookup(lut, attrs[:, A_T])
        rgb = lambert(albedo, n, light_dir)
        return np.concatenate([rgb, np.ones((len(attrs), 1))], axis=1)
    return shader


# ---------------------------------------------------------------------------
# Layer assembly


def _vertex_tangents(mesh: TriMesh) -> np.ndarray:
    tan_f, _ = face_tangents(mesh)
    acc = np.zeros((mesh.vertex_count, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], tan_f)
    return normalize_rows(acc, fallback=(1.0, 0.0, 0.0))


def _attr_block(n: int) -> np.ndarray:
    a = np.zeros((n, ATTRS))
    return a


def _glyph_draws(layer, data, scene, camera, seed, light_dir, layer_index):
    asset = scene.assets[layer.assets["glyph"]]
    lut = None
    if "colormap" in layer.assets:
        lut = colormap_lut(scene.assets[layer.assets["colormap"]])
    samples = _seed_points(layer, data, seed)
    n = samples.count
    if n == 0:
        return []

    color_t = np.zeros(n)
    if "color" in layer.bindings:
        var = layer.bindings["color"]
        vals = _eval_scalar_at(data, var, samples)
        color_t = _range_for(layer, data, var).normalize(vals)
    orient = None
    if "orientation" in layer.bindings:
        orient = _eval_vector_at(data, layer.bindings["orientation"], samples)
    widths = None
    if "width" in layer.bindings:
        var = layer.bindings["width"]
        vals = _eval_scalar_at(data, var, samples)
        widths = _range_for(layer, data, var).normalize(vals)

    lo, hi = data.bbox()
    glo, ghi = asset.lods[0].mesh.bbox()
    instances = place_glyphs(
        samples.positions, data_extent=hi - lo, glyph_extent=ghi - glo,
        size_percent=float(layer.style.get("size_percent", 5.0)),
        orientations=orient,
        orientation_mode=layer.style.get("orientation_mode",
                                         "vector" if orient is not None else "fixed"),
        width_values=widths, seed=int(layer.style.get("sample_seed", seed)),
        color_values=color_t)

    center = (glo + ghi) / 2.0
    radius = float(np.linalg.norm(ghi - glo)) / 2.0
    lod_cache = {}
    draws = []
    eye = np.asarray(camera.position, dtype=np.float64)
    constant = _constant_rgb(layer)
    for inst in instances:
        li = select_lod(len(asset.lods), inst, radius, camera)
        if li not in lod_cache:
            lmesh = asset.lods[li].mesh
            if lmesh.normals is None:
                lmesh = lmesh.with_vertex_normals()
            lod_cache[li] = (lmesh, _vertex_tangents(lmesh),
                             _make_glyph_shader(lut, asset.lods[li].normal_map,
                                                eye, light_dir, constant))
        lmesh, tangents, shader = lod_cache[li]
        v = (lmesh.vertices - center) * inst.scale @ inst.rotation.T + inst.position
        nrm = normalize_rows((lmesh.normals / inst.scale) @ inst.rotation.T)
        tan = normalize_rows((tangents * inst.scale) @ inst.rotation.T,
                             fallback=(1.0, 0.0, 0.0))
        attrs = _attr_block(len(v))
        attrs[:, A_POS] = v
        attrs[:, A_NRM] = nrm
        attrs[:, A_UV] = lmesh.uvs
        attrs[:, A_T] = inst.scalar
        attrs[:, A_TAN] = tan
        draws.append(prepare_draw(camera, v, lmesh.faces, attrs, shader, layer_index))
    return draws


def _line_draws(layer, data, scene, camera, seed, light_dir, layer_index):
    geom: LineSet = data.geometry
    lut = None
    if "colormap" in layer.assets:
        lut = colormap_lut(scene.assets[layer.assets["colormap"]])
    texture_set = None
    if "texture_set" in layer.assets:
        texture_set = scene.assets[layer.assets["texture_set"]]
    elif "line_texture" in layer.assets:
        from ..texture import TextureSet
        texture_set = TextureSet(name="line", images=(
            scene.assets[layer.assets["line_texture"]],))

    style = layer.style
    geometry = style.get("geometry", "ribbon")
    width = float(style.get("width", 0.02 * data_diag(data)))
    radius = float(style.get("radius", 0.01 * data_diag(data)))
    blend_distance = float(style.get("blend_distance", 0.1))

    u_repeat = style.get("u_repeat")
    if u_repeat is None:
        if texture_set is not None:
            tw, th = texture_set.size
            across = width if geometry == "ribbon" else 2.0 * np.pi * radius
            u_repeat = across * th / max(tw, 1)
        else:
            u_repeat = 1.0
    u_repeat = float(u_repeat)

    color_var = layer.bindings.get("color")
    tex_var = layer.bindings.get("texture", color_var)
    offsets = geom.offsets()
    constant = _constant_rgb(layer)
    eye = np.asarray(camera.position, dtype=np.float64)
    shader = _make_line_shader(texture_set, lut, eye, light_dir, blend_distance,
                               constant)
    draws = []
    for pi, pts in enumerate(geom.polylines):
        normals = geom.normals[pi] if geom.normals is not None else None
        if normals is not None and not np.any(np.abs(normals) > 1e-12):
            normals = None
        lm = extrude_line(
            pts, geometry=geometry, width=width, radius=radius,
            segments=int(style.get("segments", 12)), normals=normals,
            rotational_offset=float(style.get("rotational_offset", 0.0)),
            station_mode=style.get("station_mode", "arc_length"))
        sl = slice(int(offsets[pi]), int(offsets[pi + 1]))
        attrs = _attr_block(lm.mesh.vertex_count)
        attrs[:, A_POS] = lm.mesh.vertices
        attrs[:, A_NRM] = lm.mesh.normals
        attrs[:, A_UV] = lm.mesh.uvs
        attrs[:, A_UV.start] = lm.mesh.uvs[:, 0] / u_repeat
        tangents = np.gradient(pts, axis=0) if len(pts) > 1 else np.zeros_like(pts)
        attrs[:, A_TAN] = normalize_rows(tangents, fallback=(1.0, 0.0, 0.0))[
            lm.station_index]
        if color_var is not None:
            vals = data.scalars[color_var][sl][lm.station_index]
            attrs[:, A_T] = _range_for(layer, data, color_var).normalize(vals)
        if tex_var is not None and tex_var in data.scalars:
            vals = data.scalars[tex_var][sl][lm.station_index]
            attrs[:, A_T2] = _range_for(layer, data, tex_var).normalize(vals)
        draws.append(prepare_draw(camera, lm.mesh.vertices, lm.mesh.faces, attrs,
                                  shader, layer_index))
    return draws


def data_diag(data) -> float:
    lo, hi = data.bbox()
    d = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
    return d if d > 0 else 1.0


def _surface_draws(layer, data, scene, camera, seed, light_dir, layer_index):
    mesh: TriMesh = data.geometry
    if mesh.normals is None:
        mesh = mesh.with_vertex_normals()
    lut = None
    if "colormap" in layer.assets:
        lut = colormap_lut(scene.assets[layer.assets["colormap"]])
    texture_set = scene.assets[layer.assets["texture_set"]] \
        if "texture_set" in layer.assets else None

    period = None
    if texture_set is not None:
        tpu = layer.style.get("texels_per_unit")
        tw, _ = texture_set.size
        if tpu:
            period = tw / float(tpu)
        else:
            period = data_diag(data) / 4.0
    blend_distance = float(layer.style.get("blend_distance", 0.1))
    power = float(layer.style.get("projection_blend", DEFAULT_TRIPLANAR_POWER))

    attrs = _attr_block(mesh.vertex_count)
    attrs[:, A_POS] = mesh.vertices
    attrs[:, A_NRM] = mesh.normals
    color_var = layer.bindings.get("color")
    if color_var is not None:
        t = _range_for(layer, data, color_var).normalize(data.scalars[color_var])
        attrs[:, A_T] = t
        tex_var = layer.bindings.get("texture", color_var)
        attrs[:, A_T2] = _range_for(layer, data, tex_var).normalize(
            data.scalars[tex_var])
    eye = np.asarray(camera.position, dtype=np.float64)
    shader = _make_surface_shader(texture_set, lut, eye, light_dir, blend_distance,
                                  period or 1.0, power, _constant_rgb(layer))
    return [prepare_draw(camera, mesh.vertices, mesh.faces, attrs, shader,
                         layer_index)]


# ---------------------------------------------------------------------------


def render_scene(scene: Scene, camera: Camera | None = None, workers: int = 1,
                 light_dir=None) -> RenderResult:
    """Render a validated scene deterministically.

    Layers draw in list order into a strict-depth-test rasterizer; volume
    layers always composite last against the finished depth buffer.  The
    output bytes depend only on (scene, camera, light) and never on
    ``workers``.
    """
    msgs = validate_scene(scene)
    if msgs:
        raise SceneError(msgs)
    if camera is None:
        if scene.camera is not None:
            camera = Camera.from_dict(scene.camera)
        else:
            los, his = [], []
            for d in scene.data.values():
                lo, hi = d.bbox()
                los.append(lo)
                his.append(hi)
            lo = np.min(np.stack(los), axis=0)
            hi = np.max(np.stack(his), axis=0)
            camera = frame_scene_camera(lo, hi)
    if light_dir is None:
        from .shading import DEFAULT_LIGHT_DIR
        light_dir = DEFAULT_LIGHT_DIR

    bg = tuple(c / 255.0 for c in scene.background)
    fb = Framebuffer.create(camera.width, camera.height, background=bg)

    opaque = [l for l in scene.layers if l.layer_type != "volume"]
    volumes = [l for l in scene.layers if l.layer_type == "volume"]
    ordered = opaque + volumes
    layer_index = {l.id: i for i, l in enumerate(ordered)}

    draws = []
    for layer in opaque:
        data = scene.data[layer.data]
        idx = layer_index[layer.id]
        if layer.layer_type == "glyph":
            draws.extend(_glyph_draws(layer, data, scene, camera, scene.seed,
                                      light_dir, idx))
        elif layer.layer_type == "line":
            draws.extend(_line_draws(layer, data, scene, camera, scene.seed,
                                     light_dir, idx))
        elif layer.layer_type == "surface":
            draws.extend(_surface_draws(layer, data, scene, camera, scene.seed,
                                        light_dir, idx))
    rasterize(fb, draws, workers=workers)

    coverage = {}
    for layer in ordered:
        idx = layer_index[layer.id]
        if layer.layer_type != "volume":
            coverage[layer.id] = int(np.count_nonzero(fb.layer == idx))
    for layer in volumes:
        data = scene.data[layer.data]
        grid: VoxelGrid = data.geometry
        var = layer.bindings.get("color", "value")
        pool = dict(data.scalars)
        if "value" not in pool:
            pool["value"] = grid.values.ravel()
        vals = pool[var]
        rng = layer.ranges.get(var)
        if rng is None:
            lo_v, hi_v = float(vals.min()), float(vals.max())
            rng = DataRange(lo_v, hi_v if hi_v > lo_v else lo_v + 1.0)
        norm = rng.normalize(vals)
        cmap = scene.assets[layer.assets["colormap"]]
        mask = raymarch_volume(
            grid, norm, cmap, camera, fb,
            opacity_scale=float(layer.style.get("opacity_scale", 1.0)),
            step_size=layer.style.get("step_size"),
            layer_index=layer_index[layer.id])
        coverage[layer.id] = int(np.count_nonzero(mask))

    return RenderResult(
        image=fb.image_uint8(),
        depth=fb.depth.astype(np.float32),
        layer_ids=fb.layer.copy(),
        layer_order=tuple(l.id for l in ordered),
        coverage=coverage,
    )
