"""Extrude polylines into ribbon or tube meshes with line-texture UVs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom import normalize_rows
from ..mesh import TriMesh

DEFAULT_TUBE_SEGMENTS = 12


@dataclass(frozen=True)
class LineMesh:
    """An extruded polyline: mesh plus per-vertex station bookkeeping.

    ``station_index[v]`` is the polyline point a mesh vertex belongs to,
    so per-point variables transfer to the extrusion unchanged.  The mesh
    UVs hold (u, v): u advances along the line (arc length or point
    index, by ``station_mode``), v runs across the ribbon or around the
    tube ring from 0 to 1.
    """

    mesh: TriMesh
    station_index: np.ndarray = field(repr=False)
    station_u: np.ndarray = field(repr=False)


def _tangents(points: np.ndarray) -> np.ndarray:
    t = np.empty_like(points)
    t[1:-1] = points[2:] - points[:-2]
    t[0] = points[1] - points[0]
    t[-1] = points[-1] - points[-2]
    return normalize_rows(t)


def _rmf_normals(points: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """Rotation-minimizing frames via the double-reflection method."""
    n = np.empty_like(points)
    t0 = tangents[0]
    seed = np.array([1.0, 0.0, 0.0]) if abs(t0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    r = seed - t0 * np.dot(seed, t0)
    r /= np.linalg.norm(r)
    n[0] = r
    for i in range(len(points) - 1):
        v1 = points[i + 1] - points[i]
        c1 = float(np.dot(v1, v1))
        if c1 < 1e-24:
            n[i + 1] = n[i]
            continue
        rl = n[i] - (2.0 / c1) * np.dot(v1, n[i]) * v1
        tl = tangents[i] - (2.0 / c1) * np.dot(v1, tangents[i]) * v1
        v2 = tangents[i + 1] - tl
        c2 = float(np.dot(v2, v2))
        if c2 < 1e-24:
            n[i + 1] = rl
        else:
            n[i + 1] = rl - (2.0 / c2) * np.dot(v2, rl) * v2
        n[i + 1] -= tangents[i + 1] * np.dot(n[i + 1], tangents[i + 1])
        norm = np.linalg.norm(n[i + 1])
        n[i + 1] = n[i + 1] / norm if norm > 1e-12 else n[i]
    return n


def _station_frames(points, normals, rotational_offset):
    t = _tangents(points)
    if normals is not None:
        n = np.asarray(normals, dtype=np.float64)
        n = n - t * np.einsum("ij,ij->i", n, t)[:, None]
        lens = np.linalg.norm(n, axis=1)
        if np.any(lens < 1e-9):
            rmf = _rmf_normals(points, t)
            n = np.where(lens[:, None] < 1e-9, rmf, n / np.maximum(lens[:, None], 1e-30))
        else:
            n = n / lens[:, None]
    else:
        n = _rmf_normals(points, t)
    b = np.cross(t, n)
    if rotational_offset:
        c = np.cos(rotational_offset)
        s = np.sin(rotational_offset)
        n, b = c * n + s * b, -s * n + c * b
    return t, n, b


def _station_u(points: np.ndarray, station_mode: str) -> np.ndarray:
    if station_mode == "index":
        return np.arange(len(points), dtype=np.float64)
    if station_mode != "arc_length":
        raise ValueError(f"unknown station mode {station_mode!r} "
                         "(expected 'arc_length' or 'index')")
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def extrude_line(points, geometry: str = "ribbon", width: float = 1.0,
                 radius: float = 0.5, segments: int = DEFAULT_TUBE_SEGMENTS,
                 normals=None, rotational_offset: float = 0.0,
                 station_mode: str = "arc_length") -> LineMesh:
    """Sweep a polyline into renderable geometry.

    Ribbons span ``width`` across the station normal's binormal with v
    from 0 to 1 edge to edge; tubes place ``segments`` points around each
    station ring plus a duplicated seam vertex so v runs 0 to 1 around
    the circumference.  Station frames use supplied per-point normals
    when given (projected perpendicular to the tangent) and a
    rotation-minimizing frame otherwise; ``rotational_offset`` (radians)
    spins the profile around the tangent.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 2:
        raise ValueError("polyline must be (>=2, 3)")
    t, n, b = _station_frames(points, normals, rotational_offset)
    u = _station_u(points, station_mode)
    ns = len(points)

    if geometry == "ribbon":
        if width <= 0:
            raise ValueError("ribbon width must be positive")
        half = width / 2.0
        verts = np.empty((2 * ns, 3))
        verts[0::2] = points - b * half
        verts[1::2] = points + b * half
        vnorm = np.repeat(n, 2, axis=0)
        uvs = np.empty((2 * ns, 2))
        uvs[0::2, 0] = u
        uvs[1::2, 0] = u
        uvs[0::2, 1] = 0.0
        uvs[1::2, 1] = 1.0
        station = np.repeat(np.arange(ns), 2)
        faces = []
        for i in range(ns - 1):
            a0, a1 = 2 * i, 2 * i + 1
            b0, b1 = 2 * (i + 1), 2 * (i + 1) + 1
            faces.append([a0, b0, a1])
            faces.append([a1, b0, b1])
        mesh = TriMesh(vertices=verts, faces=np.asarray(faces, dtype=np.int64),
                       normals=vnorm, uvs=uvs)
        return LineMesh(mesh=mesh, station_index=station,
                        station_u=uvs[:, 0].copy())

    if geometry == "tube":
        if radius <= 0:
            raise ValueError("tube radius must be positive")
        if segments < 3:
            raise ValueError("tube needs at least 3 segments")
        k = segments
        ring = k + 1  # seam vertex duplicated with v=1
        ang = 2.0 * np.pi * np.arange(ring) / k
        ca, sa = np.cos(ang), np.sin(ang)
        verts = np.empty((ns * ring, 3))
        vnorm = np.empty((ns * ring, 3))
        uvs = np.empty((ns * ring, 2))
        for i in range(ns):
            offs = ca[:, None] * n[i] + sa[:, None] * b[i]
            verts[i * ring:(i + 1) * ring] = points[i] + radius * offs
            vnorm[i * ring:(i + 1) * ring] = offs
            uvs[i * ring:(i + 1) * ring, 0] = u[i]
            uvs[i * ring:(i + 1) * ring, 1] = np.arange(ring) / k
        station = np.repeat(np.arange(ns), ring)
        faces = []
        for i in range(ns - 1):
            base0 = i * ring
            base1 = (i + 1) * ring
            for j in range(k):
                faces.append([base0 + j, base1 + j, base0 + j + 1])
                faces.append([base0 + j + 1, base1 + j, base1 + j + 1])
        mesh = TriMesh(vertices=verts, faces=np.asarray(faces, dtype=np.int64),
                       normals=vnorm, uvs=uvs)
        return LineMesh(mesh=mesh, station_index=station,
                        station_u=uvs[:, 0].copy())

    raise ValueError(f"unknown line geometry {geometry!r} (expected 'ribbon' or 'tube')")
