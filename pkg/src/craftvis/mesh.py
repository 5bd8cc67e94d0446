"""Triangle mesh type, OBJ round trip, and canonical orientation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geom import look_rotation, normalize_rows, quat_from_matrix, quat_to_matrix


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh with optional per-vertex normals and UVs."""

    vertices: np.ndarray = field(repr=False)
    faces: np.ndarray = field(repr=False)
    normals: np.ndarray | None = field(default=None, repr=False)
    uvs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite values")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.normals is not None:
            n = np.asarray(self.normals, dtype=np.float64)
            if n.shape != v.shape:
                raise ValueError("normals must match vertices in shape")
            object.__setattr__(self, "normals", n)
        if self.uvs is not None:
            uv = np.asarray(self.uvs, dtype=np.float64)
            if uv.shape != (len(v), 2):
                raise ValueError("uvs must be (V, 2)")
            object.__setattr__(self, "uvs", uv)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def face_normals(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return normalize_rows(n)

    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(n, axis=1)

    def with_vertex_normals(self) -> "TriMesh":
        """Copy with area-weighted smooth vertex normals."""
        tri = self.vertices[self.faces]
        fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])  # area-weighted
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.faces[:, k], fn)
        return replace(self, normals=normalize_rows(acc))

    def cleaned(self) -> "TriMesh":
        """Copy with degenerate faces (repeated indices, ~zero area) dropped."""
        f = self.faces
        distinct = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])
        tri = self.vertices[f]
        area2 = np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        scale = max(self.bbox_diagonal(), 1e-30)
        keep = distinct & (area2 > 1e-14 * scale * scale)
        return replace(self, faces=f[keep])

    def transformed(self, matrix: np.ndarray, translation=None) -> "TriMesh":
        """Apply a 3x3 linear map (plus optional translation) to the mesh."""
        m = np.asarray(matrix, dtype=np.float64)
        v = self.vertices @ m.T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        n = None
        if self.normals is not None:
            # Normals transform by the inverse transpose; for rotations that
            # is the matrix itself, but keep it general for scaled instancing.
            ninv = np.linalg.inv(m).T
            n = normalize_rows(self.normals @ ninv.T)
        return replace(self, vertices=v, normals=n)


def orient_mesh(mesh: TriMesh, forward, up) -> TriMesh:
    """Rotate and center a mesh so ``forward`` maps to +Z and ``up`` toward +Y.

    The mesh centroid moves to the origin.  ``forward`` and ``up`` must
    not be parallel.
    """
    rot = look_rotation(np.asarray(forward, dtype=np.float64),
                        np.asarray(up, dtype=np.float64))
    c = mesh.centroid()
    v = (mesh.vertices - c) @ rot.T
    n = normalize_rows(mesh.normals @ rot.T) if mesh.normals is not None else None
    return replace(mesh, vertices=v, normals=n)


def orientation_quaternion(forward, up) -> np.ndarray:
    """The (w, x, y, z) quaternion equivalent of :func:`orient_mesh`'s rotation."""
    return quat_from_matrix(look_rotation(np.asarray(forward, dtype=np.float64),
                                          np.asarray(up, dtype=np.float64)))


def apply_orientation(mesh: TriMesh, quaternion) -> TriMesh:
    """Rotate a mesh by a unit quaternion and move its centroid to the origin."""
    rot = quat_to_matrix(np.asarray(quaternion, dtype=np.float64))
    c = mesh.centroid()
    v = (mesh.vertices - c) @ rot.T
    n = normalize_rows(mesh.normals @ rot.T) if mesh.normals is not None else None
    return replace(mesh, vertices=v, normals=n)


def load_obj(path) -> TriMesh:
    """Load a Wavefront OBJ as a TriMesh.

    Polygon faces are fan-triangulated.  Because OBJ indexes positions,
    UVs and normals independently, vertices are split per unique
    (v, vt, vn) combination so attributes stay per-vertex.
    """
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    normals: list[list[float]] = []
    corners: dict[tuple, int] = {}
    out_v: list[list[float]] = []
    out_vt: list[list[float]] = []
    out_vn: list[list[float]] = []
    faces: list[list[int]] = []
    any_vt = any_vn = False

    def corner(token: str, lineno: int) -> int:
        nonlocal any_vt, any_vn
        parts = token.split("/")
        try:
            vi = int(parts[0])
            ti = int(parts[1]) if len(parts) > 1 and parts[1] else 0
            ni = int(parts[2]) if len(parts) > 2 and parts[2] else 0
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad face corner {token!r}") from exc
        vi = vi - 1 if vi > 0 else len(positions) + vi
        ti = ti - 1 if ti > 0 else (len(texcoords) + ti if ti else -1)
        ni = ni - 1 if ni > 0 else (len(normals) + ni if ni else -1)
        if not 0 <= vi < len(positions):
            raise ValueError(f"{path}:{lineno}: vertex index {parts[0]} out of range")
        key = (vi, ti, ni)
        idx = corners.get(key)
        if idx is None:
            idx = len(out_v)
            corners[key] = idx
            out_v.append(positions[vi])
            out_vt.append(texcoords[ti] if ti >= 0 else [0.0, 0.0])
            out_vn.append(normals[ni] if ni >= 0 else [0.0, 0.0, 0.0])
        if ti >= 0:
            any_vt = True
        if ni >= 0:
            any_vn = True
        return idx

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    positions.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    texcoords.append([float(x) for x in parts[1:3]])
                elif tag == "vn":
                    normals.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    ids = [corner(tok, lineno) for tok in parts[1:]]
                    if len(ids) < 3:
                        raise ValueError("face with fewer than 3 corners")
                    for k in range(1, len(ids) - 1):
                        faces.append([ids[0], ids[k], ids[k + 1]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None

    if not positions:
        raise ValueError(f"{path}: no vertices found")
    return TriMesh(
        vertices=np.asarray(out_v, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3),
        normals=normalize_rows(np.asarray(out_vn)) if any_vn else None,
        uvs=np.asarray(out_vt, dtype=np.float64) if any_vt else None,
    )


def save_obj(mesh: TriMesh, path) -> None:
    """Write a TriMesh as OBJ (positions, then optional vt/vn, shared indices)."""
    path = Path(path)
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    if mesh.uvs is not None:
        for t in mesh.uvs:
            lines.append(f"vt {float(t[0])!r} {float(t[1])!r}")
    if mesh.normals is not None:
        for n in mesh.normals:
            lines.append(f"vn {float(n[0])!r} {float(n[1])!r} {float(n[2])!r}")
    has_t, has_n = mesh.uvs is not None, mesh.normals is not None
    for f in mesh.faces:
        if has_t and has_n:
            lines.append("f " + " ".join(f"{i + 1}/{i + 1}/{i + 1}" for i in f))
        elif has_t:
            lines.append("f " + " ".join(f"{i + 1}/{i + 1}" for i in f))
        elif has_n:
            lines.append("f " + " ".join(f"{i + 1}//{i + 1}" for i in f))
        else:
            lines.append("f " + " ".join(str(i + 1) for i in f))
    path.write_text("\n".join(lines) + "\n")
