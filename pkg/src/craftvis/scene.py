"""Data objects, variable bindings, layers and scene documents.

A scene is declarative: data objects (points, lines, meshes, voxel
grids) carry named per-element variables, layers bind those variables to
visual channels (color, orientation, width, texture) backed by assets
(colormaps, texture sets, glyph assets), and the renderer consumes the
validated result.  Validation is collected, not fail-fast, so a UI can
show every binding problem at once.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bake import GlyphAsset, load_glyph_asset
from .color import ColorMap, import_colormap_xml
from .mesh import TriMesh, load_obj
from .texture import NormalMap, TextureImage, TextureSet, load_texture_set

LAYER_TYPES = ("glyph", "line", "surface", "volume")


class SceneError(ValueError):
    """A scene, layer or data file failed validation.

    ``diagnostics`` holds one human-readable message per problem.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class PointSet:
    """Unordered points in space."""

    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {p.shape}")
        object.__setattr__(self, "positions", p)

    @property
    def element_count(self) -> int:
        return len(self.positions)

    def bbox(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)


@dataclass(frozen=True)
class LineSet:
    """A bundle of polylines, optionally with per-point normals."""

    polylines: tuple = field(repr=False)
    normals: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        pls = []
        for i, pl in enumerate(self.polylines):
            a = np.asarray(pl, dtype=np.float64)
            if a.ndim != 2 or a.shape[1] != 3 or len(a) < 2:
                raise ValueError(f"polyline {i} must be (>=2, 3), got {a.shape}")
            pls.append(a)
        object.__setattr__(self, "polylines", tuple(pls))
        if self.normals is not None:
            ns = []
            if len(self.normals) != len(pls):
                raise ValueError("normals must match polylines in count")
            for i, n in enumerate(self.normals):
                a = np.asarray(n, dtype=np.float64)
                if a.shape != pls[i].shape:
                    raise ValueError(f"normals for polyline {i} must match its points")
                ns.append(a)
            object.__setattr__(self, "normals", tuple(ns))

    @property
    def element_count(self) -> int:
        return sum(len(p) for p in self.polylines)

    def offsets(self) -> np.ndarray:
        """Start index of each polyline in the concatenated point order."""
        lens = [len(p) for p in self.polylines]
        return np.concatenate([[0], np.cumsum(lens)])

    def bbox(self):
        allp = np.concatenate(self.polylines)
        return allp.min(axis=0), allp.max(axis=0)


@dataclass(frozen=True)
class VoxelGrid:
    """A regular grid of cell-centered scalar values.

    ``values[i, j, k]`` lives at ``origin + (i+0.5, j+0.5, k+0.5) * spacing``.
    Sampling interpolates trilinearly between cell centers, holds the
    boundary value across the outer half-cell, and is 0 outside the grid's
    bounding box.
    """

    values: np.ndarray = field(repr=False)
    origin: np.ndarray = field(default=None, repr=False)
    spacing: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"values must be 3d, got shape {v.shape}")
        origin = np.zeros(3) if self.origin is None else np.asarray(self.origin, dtype=np.float64)
        spacing = np.ones(3) if self.spacing is None else np.asarray(self.spacing, dtype=np.float64)
        if origin.shape != (3,) or spacing.shape != (3,):
            raise ValueError("origin and spacing must be 3-vectors")
        if np.any(spacing <= 0):
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def element_count(self) -> int:
        return int(np.prod(self.values.shape))

    def bbox(self):
        lo = self.origin
        hi = self.origin + np.asarray(self.dims) * self.spacing
        return lo, hi

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Trilinear sample at world points; 0 outside the bounding box."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        lo, hi = self.bbox()
        inside = np.all((p >= lo) & (p <= hi), axis=1)
        out = np.zeros(len(p))
        if not inside.any():
            return out if points.ndim > 1 else out[0]
        q = p[inside]
        g = (q - self.origin) / self.spacing - 0.5
        dims = np.asarray(self.dims, dtype=np.float64)
        g = np.clip(g, 0.0, dims - 1.0)
        i0 = np.floor(g).astype(np.int64)
        i0 = np.minimum(i0, np.asarray(self.dims) - 1)
        i1 = np.minimum(i0 + 1, np.asarray(self.dims) - 1)
        f = g - i0
        v = self.values
        c000 = v[i0[:, 0], i0[:, 1], i0[:, 2]]
        c100 = v[i1[:, 0], i0[:, 1], i0[:, 2]]
        c010 = v[i0[:, 0], i1[:, 1], i0[:, 2]]
        c110 = v[i1[:, 0], i1[:, 1], i0[:, 2]]
        c001 = v[i0[:, 0], i0[:, 1], i1[:, 2]]
        c101 = v[i1[:, 0], i0[:, 1], i1[:, 2]]
        c011 = v[i0[:, 0], i1[:, 1], i1[:, 2]]
        c111 = v[i1[:, 0], i1[:, 1], i1[:, 2]]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        c00 = c000 * (1 - fx) + c100 * fx
        c10 = c010 * (1 - fx) + c110 * fx
        c01 = c001 * (1 - fx) + c101 * fx
        c11 = c011 * (1 - fx) + c111 * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[inside] = c0 * (1 - fz) + c1 * fz
        return out if np.asarray(points).ndim > 1 else out[0]


Geometry = PointSet | LineSet | TriMesh | VoxelGrid


def _element_count(geometry) -> int:
    if isinstance(geometry, TriMesh):
        return geometry.vertex_count
    return geometry.element_count


@dataclass(frozen=True)
class DataObject:
    """A geometry plus named per-element scalar and vector variables."""

    name: str
    geometry: Geometry = field(repr=False)
    scalars: dict = field(default_factory=dict, repr=False)
    vectors: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = _element_count(self.geometry)
        scalars = {}
        for key, val in self.scalars.items():
            a = np.asarray(val, dtype=np.float64).reshape(-1)
            if len(a) != n:
                raise SceneError(
                    f"data {self.name!r}: scalar {key!r} has {len(a)} values, "
                    f"geometry has {n} elements")
            scalars[key] = a
        vectors = {}
        for key, val in self.vectors.items():
            a = np.asarray(val, dtype=np.float64)
            if a.shape != (n, 3):
                raise SceneError(
                    f"data {self.name!r}: vector {key!r} has shape {a.shape}, "
                    f"expected ({n}, 3)")
            vectors[key] = a
        object.__setattr__(self, "scalars", scalars)
        object.__setattr__(self, "vectors", vectors)

    @property
    def element_count(self) -> int:
        return _element_count(self.geometry)

    def scalar_range(self, name: str) -> "DataRange":
        v = self.scalars[name]
        lo, hi = float(v.min()), float(v.max())
        if hi <= lo:
            hi = lo + 1.0
        return DataRange(lo, hi)

    def bbox(self):
        return self.geometry.bbox()


@dataclass(frozen=True)
class DataRange:
    """A [min, max) normalization window for one variable."""

    min: float
    max: float

    def __post_init__(self):
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise ValueError("range bounds must be finite")
        if self.max <= self.min:
            raise ValueError(f"range max must exceed min, got [{self.min}, {self.max}]")

    def normalize(self, values) -> np.ndarray:
        """(v - min) / (max - min), clamped to [0, 1]."""
        v = np.asarray(values, dtype=np.float64)
        return np.clip((v - self.min) / (self.max - self.min), 0.0, 1.0)


@dataclass
class VisLayer:
    """One drawable: a data object routed through bindings to assets.

    ``bindings`` maps visual channels (color, orientation, width,
    texture) to variable names of the data object.  ``assets`` maps asset
    roles (colormap, texture_set, glyph, line_texture, normal_map,
    alpha_mask) to asset ids resolved against the scene.  ``style`` holds
    type-specific knobs; unknown keys are rejected at validation.
    """

    id: str
    layer_type: str
    data: str
    bindings: dict = field(default_factory=dict)
    assets: dict = field(default_factory=dict)
    style: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)


_STYLE_KEYS = {
    "glyph": {"sampling", "sample_count", "sample_spacing", "sample_seed",
              "size_percent", "orientation_mode", "blend_distance",
              "constant_color", "axis_width"},
    "line": {"geometry", "width", "radius", "segments", "rotational_offset",
             "u_repeat", "station_mode", "blend_distance", "constant_color"},
    "surface": {"projection_blend", "texels_per_unit", "blend_distance",
                "constant_color"},
    "volume": {"opacity_scale", "step_size"},
}
_ASSET_ROLES = {"colormap", "texture_set", "glyph", "line_texture",
                "normal_map", "alpha_mask"}
_GEOMETRY_FOR_TYPE = {
    "glyph": (PointSet, VoxelGrid, TriMesh),
    "line": (LineSet,),
    "surface": (TriMesh,),
    "volume": (VoxelGrid,),
}


def validate_layer(layer: VisLayer, data: DataObject | None,
                   assets: dict | None = None) -> list[str]:
    """All problems with one layer, as human-readable messages."""
    msgs = []
    lid = layer.id
    if layer.layer_type not in LAYER_TYPES:
        msgs.append(f"layer {lid!r}: unknown type {layer.layer_type!r} "
                    f"(expected one of {', '.join(LAYER_TYPES)})")
        return msgs
    if data is None:
        msgs.append(f"layer {lid!r}: references missing data object {layer.data!r}")
    else:
        wanted = _GEOMETRY_FOR_TYPE[layer.layer_type]
        if not isinstance(data.geometry, wanted):
            names = "/".join(t.__name__ for t in wanted)
            msgs.append(f"layer {lid!r}: {layer.layer_type} layers need {names} data, "
                        f"got {type(data.geometry).__name__}")
    for channel, var in layer.bindings.items():
        if channel not in ("color", "orientation", "width", "texture"):
            msgs.append(f"layer {lid!r}: unknown binding channel {channel!r}")
            continue
        if data is None:
            continue
        if channel == "orientation":
            if var not in data.vectors:
                msgs.append(f"layer {lid!r}: orientation binding {var!r} is not a "
                            f"vector variable of {layer.data!r}")
        else:
            pool = data.scalars
            if isinstance(data.geometry, VoxelGrid) and var == "value":
                pool = {**pool, "value": data.geometry.values.ravel()}
            if var not in pool:
                msgs.append(f"layer {lid!r}: {channel} binding {var!r} is not a "
                            f"scalar variable of {layer.data!r}")
    for role in layer.assets:
        if role not in _ASSET_ROLES:
            msgs.append(f"layer {lid!r}: unknown asset role {role!r}")
    if assets is not None:
        for role, ref in layer.assets.items():
            if role in _ASSET_ROLES and ref not in assets:
                msgs.append(f"layer {lid!r}: asset {ref!r} (role {role!r}) not found")
    needs_color_backing = "color" in layer.bindings
    color_sources = ("colormap", "texture_set", "line_texture")
    if needs_color_backing and not any(r in layer.assets for r in color_sources):
        msgs.append(f"layer {lid!r}: color binding "
                    f"{layer.bindings['color']!r} has no colormap or texture set")
    if layer.layer_type == "volume":
        if "colormap" not in layer.assets:
            msgs.append(f"layer {lid!r}: volume layers require a colormap asset")
    if layer.layer_type == "glyph":
        if "glyph" not in layer.assets:
            msgs.append(f"layer {lid!r}: glyph layers require a glyph asset")
        if data is not None and not isinstance(data.geometry, PointSet) \
                and "sampling" not in layer.style:
            msgs.append(f"layer {lid!r}: glyph layers over non-point data need a "
                        f"style.sampling method")
    bad_style = set(layer.style) - _STYLE_KEYS.get(layer.layer_type, set())
    for key in sorted(bad_style):
        msgs.append(f"layer {lid!r}: unknown style key {key!r} for "
                    f"{layer.layer_type} layers")
    for var, rng in layer.ranges.items():
        if not isinstance(rng, DataRange):
            try:
                lo, hi = float(rng[0]), float(rng[1])
                DataRange(lo, hi)
            except Exception:
                msgs.append(f"layer {lid!r}: range for {var!r} must be [min, max] "
                            f"with max > min")
    return msgs


@dataclass
class Scene:
    """Layers over named data objects and assets, plus view settings.

    ``data_specs`` and ``asset_specs`` remember where each entry was
    loaded from so the scene can be serialized back to a document.
    """

    name: str = "scene"
    data: dict = field(default_factory=dict)
    assets: dict = field(default_factory=dict)
    layers: list = field(default_factory=list)
    camera: dict | None = None
    background: tuple = (24, 24, 30, 255)
    seed: int = 0
    data_specs: dict = field(default_factory=dict)
    asset_specs: dict = field(default_factory=dict)


def add_layer(scene: Scene, layer: VisLayer) -> None:
    """Validate and append a layer; raises with every problem at once."""
    msgs = validate_layer(layer, scene.data.get(layer.data), scene.assets)
    if any(l.id == layer.id for l in scene.layers):
        msgs.insert(0, f"layer {layer.id!r}: duplicate layer id")
    if msgs:
        raise SceneError(msgs)
    scene.layers.append(layer)


def validate_scene(scene: Scene) -> list[str]:
    """Every problem in the scene; an empty list means renderable."""
    msgs = []
    if not scene.layers:
        msgs.append("scene has no layers")
    seen = set()
    for layer in scene.layers:
        if layer.id in seen:
            msgs.append(f"layer {layer.id!r}: duplicate layer id")
        seen.add(layer.id)
        msgs.extend(validate_layer(layer, scene.data.get(layer.data), scene.assets))
    return msgs


# ---------------------------------------------------------------------------
# Data loading


def _load_variable_sidecar(path, count: int, name: str):
    """CSV of per-element variables: header row of names, one row per element."""
    scalars: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SceneError(f"{path}: empty variable file") from None
        header = [h.strip() for h in header]
        cols: list[list[float]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SceneError(f"{path}:{lineno}: expected {len(header)} columns, "
                                 f"got {len(row)}")
            for c, cell in enumerate(row):
                try:
                    cols[c].append(float(cell))
                except ValueError:
                    raise SceneError(f"{path}:{lineno}: column {header[c]!r} value "
                                     f"{cell!r} is not a number") from None
    for h, col in zip(header, cols):
        if len(col) != count:
            raise SceneError(f"{path}: variable {h!r} has {len(col)} values, "
                             f"geometry {name!r} has {count} elements")
        scalars[h] = col
    return _group_vectors(scalars)


def _group_vectors(columns: dict) -> tuple[dict, dict]:
    """Split raw columns into scalars and _x/_y/_z-grouped vectors."""
    scalars = {}
    vectors = {}
    names = set(columns)
    done = set()
    for name in sorted(names):
        if name.endswith("_x"):
            stem = name[:-2]
            trio = [f"{stem}_x", f"{stem}_y", f"{stem}_z"]
            if all(t in names for t in trio):
                vectors[stem] = np.stack([np.asarray(columns[t], dtype=np.float64)
                                          for t in trio], axis=-1)
                done.update(trio)
    for name in sorted(names - done):
        scalars[name] = np.asarray(columns[name], dtype=np.float64)
    return scalars, vectors


def load_points_csv(path, name: str | None = None) -> DataObject:
    """Points with variables from a CSV with header ``x,y,z,var...``.

    Trailing columns become scalar variables; column triples named
    ``foo_x, foo_y, foo_z`` become a vector variable ``foo``.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SceneError(f"{path}: empty file") from None
        if header[:3] != ["x", "y", "z"]:
            raise SceneError(f"{path}:1: header must start with x,y,z "
                             f"(got {','.join(header[:3])})")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SceneError(f"{path}:{lineno}: expected {len(header)} columns, "
                                 f"got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise SceneError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise SceneError(f"{path}: no data rows")
    arr = np.asarray(rows)
    columns = {h: arr[:, i] for i, h in enumerate(header[3:], start=3)}
    scalars, vectors = _group_vectors(columns)
    return DataObject(name=name or path.stem, geometry=PointSet(arr[:, :3]),
                      scalars=scalars, vectors=vectors)


def load_polylines_json(path, name: str | None = None) -> DataObject:
    """Polylines from JSON: {"polylines": [{"points": [[x,y,z],..],
    "normals": optional, "scalars": {"name": [..]}}, ...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if "polylines" not in doc or not isinstance(doc["polylines"], list):
        raise SceneError(f"{path}: top-level 'polylines' list missing")
    polylines, normals, scalar_cols = [], [], {}
    any_normals = False
    for i, entry in enumerate(doc["polylines"]):
        pts = np.asarray(entry.get("points", []), dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise SceneError(f"{path}: polyline {i} needs >= 2 points of 3 coords")
        polylines.append(pts)
        if "normals" in entry:
            n = np.asarray(entry["normals"], dtype=np.float64)
            if n.shape != pts.shape:
                raise SceneError(f"{path}: polyline {i} normals shape {n.shape} "
                                 f"does not match points {pts.shape}")
            normals.append(n)
            any_normals = True
        else:
            normals.append(np.zeros_like(pts))
        for sname, vals in entry.get("scalars", {}).items():
            if len(vals) != len(pts):
                raise SceneError(f"{path}: polyline {i} scalar {sname!r} has "
                                 f"{len(vals)} values for {len(pts)} points")
            scalar_cols.setdefault(sname, []).append(np.asarray(vals, dtype=np.float64))
    n_polys = len(polylines)
    for sname, chunks in scalar_cols.items():
        if len(chunks) != n_polys:
            raise SceneError(f"{path}: scalar {sname!r} missing on some polylines")
    geometry = LineSet(tuple(polylines), tuple(normals) if any_normals else None)
    scalars = {s: np.concatenate(chunks) for s, chunks in scalar_cols.items()}
    return DataObject(name=name or path.stem, geometry=geometry, scalars=scalars)


_RAW_DTYPES = {"float32": np.float32, "float64": np.float64, "uint8": np.uint8}


def load_volume(path, name: str | None = None) -> DataObject:
    """Voxel grid from a JSON header next to a raw value file.

    Header: {"dims": [nx,ny,nz], "spacing": [..], "origin": [..],
    "dtype": "float32", "data": "file.raw", "variable": "name"}.
    The raw file holds values in C order for shape (nx, ny, nz), i.e.
    z varies fastest.
    """
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    for key in ("dims", "data"):
        if key not in header:
            raise SceneError(f"{path}: header missing {key!r}")
    dims = tuple(int(d) for d in header["dims"])
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise SceneError(f"{path}: dims must be three positive integers, got {dims}")
    dtype_name = header.get("dtype", "float32")
    if dtype_name not in _RAW_DTYPES:
        raise SceneError(f"{path}: unsupported dtype {dtype_name!r} "
                         f"(expected one of {sorted(_RAW_DTYPES)})")
    raw_path = path.parent / header["data"]
    if not raw_path.exists():
        raise SceneError(f"{path}: raw file {header['data']!r} not found")
    values = np.fromfile(raw_path, dtype=_RAW_DTYPES[dtype_name])
    expected = dims[0] * dims[1] * dims[2]
    if len(values) != expected:
        raise SceneError(f"{raw_path}: header declares {expected} values "
                         f"({dims[0]}x{dims[1]}x{dims[2]}), file has {len(values)}")
    grid = VoxelGrid(values.astype(np.float64).reshape(dims),
                     origin=header.get("origin"), spacing=header.get("spacing"))
    scalars = {}
    var = header.get("variable")
    if var:
        scalars[var] = grid.values.ravel()
    return DataObject(name=name or path.stem, geometry=grid, scalars=scalars)


def load_mesh_object(path, variables=None, name: str | None = None) -> DataObject:
    """A TriMesh data object from an OBJ, with optional variable sidecar CSV."""
    mesh = load_obj(path)
    scalars, vectors = {}, {}
    if variables is not None:
        scalars, vectors = _load_variable_sidecar(variables, mesh.vertex_count,
                                                  name or Path(path).stem)
    return DataObject(name=name or Path(path).stem, geometry=mesh,
                      scalars=scalars, vectors=vectors)


_FORMAT_LOADERS = {
    "obj": lambda p, name, extra: load_mesh_object(p, variables=extra, name=name),
    "csv-points": lambda p, name, extra: load_points_csv(p, name=name),
    "polylines": lambda p, name, extra: load_polylines_json(p, name=name),
    "volume": lambda p, name, extra: load_volume(p, name=name),
}


def load_data_object(path, format: str, name: str | None = None,
                     variables=None) -> DataObject:
    if format not in _FORMAT_LOADERS:
        raise SceneError(f"unknown data format {format!r} "
                         f"(expected one of {sorted(_FORMAT_LOADERS)})")
    return _FORMAT_LOADERS[format](path, name, variables)


# ---------------------------------------------------------------------------
# Scene documents


def _load_asset(kind: str, path: Path):
    if kind == "colormap":
        return import_colormap_xml(Path(path).read_bytes())
    if kind == "textureSet":
        return load_texture_set(path)
    if kind == "glyph":
        return load_glyph_asset(path)
    if kind in ("texture", "lineTexture"):
        return TextureImage.load(path)
    if kind == "normalMap":
        return NormalMap.load(path)
    if kind == "alphaMask":
        from PIL import Image
        return np.asarray(Image.open(path).convert("L"))
    raise SceneError(f"unknown asset kind {kind!r}")


def _layer_from_doc(entry: dict) -> VisLayer:
    ranges = {}
    for var, pair in entry.get("ranges", {}).items():
        try:
            ranges[var] = DataRange(float(pair[0]), float(pair[1]))
        except (ValueError, TypeError, IndexError) as exc:
            raise SceneError(f"layer {entry.get('id')!r}: bad range for {var!r}: {exc}")
    return VisLayer(
        id=str(entry.get("id", "")),
        layer_type=str(entry.get("type", "")),
        data=str(entry.get("data", "")),
        bindings=dict(entry.get("bindings", {})),
        assets=dict(entry.get("assets", {})),
        style=dict(entry.get("style", {})),
        ranges=ranges,
    )


def load_scene(path) -> Scene:
    """Load and validate a scene document; raises SceneError on problems."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    base = path.parent
    scene = Scene(name=doc.get("name", path.stem))
    if "background" in doc:
        bg = doc["background"]
        scene.background = tuple(int(c) for c in bg) if len(bg) == 4 else \
            tuple(int(c) for c in bg) + (255,)
    scene.seed = int(doc.get("seed", 0))
    scene.camera = doc.get("camera")

    problems = []
    for key, spec in doc.get("data", {}).items():
        try:
            extra = spec.get("variables")
            scene.data[key] = load_data_object(
                base / spec["path"], spec.get("format", "obj"), name=key,
                variables=(base / extra) if extra else None)
            scene.data_specs[key] = dict(spec)
        except (SceneError, ValueError, KeyError, OSError) as exc:
            problems.append(f"data {key!r}: {exc}")
    for key, spec in doc.get("assets", {}).items():
        try:
            scene.assets[key] = _load_asset(spec.get("kind", "texture"),
                                            base / spec["path"])
            scene.asset_specs[key] = dict(spec)
        except (SceneError, ValueError, KeyError, OSError) as exc:
            problems.append(f"asset {key!r}: {exc}")
    if problems:
        raise SceneError(problems)

    for entry in doc.get("layers", []):
        scene.layers.append(_layer_from_doc(entry))
    msgs = validate_scene(scene)
    if msgs:
        raise SceneError(msgs)
    return scene


def scene_to_doc(scene: Scene) -> dict:
    """The declarative document for a scene (paths as originally given)."""
    doc = {
        "name": scene.name,
        "background": list(scene.background),
        "seed": scene.seed,
        "data": {k: dict(v) for k, v in scene.data_specs.items()},
        "assets": {k: dict(v) for k, v in scene.asset_specs.items()},
        "layers": [],
    }
    if scene.camera is not None:
        doc["camera"] = scene.camera
    for layer in scene.layers:
        entry = {"id": layer.id, "type": layer.layer_type, "data": layer.data}
        if layer.bindings:
            entry["bindings"] = dict(layer.bindings)
        if layer.assets:
            entry["assets"] = dict(layer.assets)
        if layer.style:
            entry["style"] = dict(layer.style)
        if layer.ranges:
            entry["ranges"] = {k: [v.min, v.max] for k, v in layer.ranges.items()}
        doc["layers"].append(entry)
    return doc


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_doc(scene), indent=2))


def normalize(values, data_range: DataRange) -> np.ndarray:
    """Clamped (v - min) / (max - min)."""
    return data_range.normalize(values)
