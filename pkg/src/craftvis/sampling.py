"""Seed point generation: regular lattices, uniform random, and
density-proportional Metropolis-Hastings over volumes or surfaces.

All samplers return a :class:`SampleSet` carrying positions plus the
parameters that produced them, and surface samplers additionally carry
(triangle, barycentric) provenance so per-vertex variables can be
interpolated at the samples later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh
from .scene import VoxelGrid

MH_CHAINS = 64
MH_BURN_IN = 1000
MH_THIN = 5
MH_SIGMA_FRACTION = 0.15


@dataclass(frozen=True)
class SampleSet:
    """Positions plus the recipe that generated them."""

    positions: np.ndarray = field(repr=False)
    method: str = "regular"
    params: dict = field(default_factory=dict)
    tri_indices: np.ndarray | None = field(default=None, repr=False)
    barycentric: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "positions", p)

    @property
    def count(self) -> int:
        return len(self.positions)


def _axis_coords(lo: float, hi: float, spacing: float) -> np.ndarray:
    """Centered lattice along one axis: floor(extent/spacing)+1 points."""
    extent = hi - lo
    n = int(np.floor(extent / spacing + 1e-9)) + 1
    if n <= 1:
        return np.array([(lo + hi) / 2.0])
    margin = (extent - (n - 1) * spacing) / 2.0
    return lo + margin + np.arange(n) * spacing


def _bbox_of(domain):
    if isinstance(domain, (VoxelGrid, TriMesh)):
        return domain.bbox()
    lo, hi = domain
    return np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)


def _closest_on_triangles(points: np.ndarray, tri: np.ndarray):
    """Closest point on each triangle for each (point, triangle) pair.

    ``points`` is (M, 3) and ``tri`` (M, 3, 3); returns closest points
    (M, 3) and barycentric coordinates (M, 3).  Vectorized version of the
    standard region-walk construction.
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = points - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = points - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    bary = np.zeros((len(points), 3))
    done = np.zeros(len(points), dtype=bool)

    m = (d1 <= 0) & (d2 <= 0)  # vertex a
    bary[m] = (1.0, 0.0, 0.0)
    done |= m
    m = (~done) & (d3 >= 0) & (d4 <= d3)  # vertex b
    bary[m] = (0.0, 1.0, 0.0)
    done |= m
    m = (~done) & (d6 >= 0) & (d5 <= d6)  # vertex c
    bary[m] = (0.0, 0.0, 1.0)
    done |= m

    vc = d1 * d4 - d3 * d2
    m = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)  # edge ab
    v = np.where(np.abs(d1 - d3) > 1e-300, d1 / np.where(d1 - d3 == 0, 1.0, d1 - d3), 0.0)
    bary[m, 0] = 1.0 - v[m]
    bary[m, 1] = v[m]
    done |= m

    vb = d5 * d2 - d1 * d6
    m = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)  # edge ac
    w = np.where(np.abs(d2 - d6) > 1e-300, d2 / np.where(d2 - d6 == 0, 1.0, d2 - d6), 0.0)
    bary[m, 0] = 1.0 - w[m]
    bary[m, 2] = w[m]
    done |= m

    va = d3 * d6 - d5 * d4
    m = (~done) & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)  # edge bc
    denom = (d4 - d3) + (d5 - d6)
    w = np.where(denom != 0, (d4 - d3) / np.where(denom == 0, 1.0, denom), 0.0)
    bary[m, 1] = 1.0 - w[m]
    bary[m, 2] = w[m]
    done |= m

    inner = ~done  # interior
    total = va + vb + vc
    safe = np.where(total == 0, 1.0, total)
    bary[inner, 1] = (vb / safe)[inner]
    bary[inner, 2] = (vc / safe)[inner]
    bary[inner, 0] = 1.0 - bary[inner, 1] - bary[inner, 2]

    closest = (bary[:, 0:1] * a + bary[:, 1:2] * b + bary[:, 2:3] * c)
    return closest, bary


def project_to_surface(mesh: TriMesh, points: np.ndarray, k: int = 24):
    """Nearest surface point for each query point.

    Candidate triangles come from a KD-tree over triangle centroids; the
    exact closest point is then taken over those candidates.  Returns
    (positions, tri_indices, barycentric).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tri = mesh.vertices[mesh.faces]
    centroids = tri.mean(axis=1)
    k = min(k, len(centroids))
    tree = cKDTree(centroids)
    _, cand = tree.query(points, k=k, workers=-1)
    cand = np.atleast_2d(cand)
    if cand.ndim == 1:
        cand = cand[:, None]
    m, kk = cand.shape
    flat_pts = np.repeat(points, kk, axis=0)
    flat_tri = tri[cand.ravel()]
    closest, bary = _closest_on_triangles(flat_pts, flat_tri)
    d2 = np.einsum("ij,ij->i", flat_pts - closest, flat_pts - closest).reshape(m, kk)
    best = np.argmin(d2, axis=1)
    rows = np.arange(m)
    sel = rows * kk + best
    return closest[sel], cand[rows, best], bary[sel]


def sample_regular(domain, spacing: float) -> SampleSet:
    """Evenly spaced samples over a volume's box or across a surface.

    The lattice is centered per axis: floor(extent/spacing)+1 planes per
    axis, or the axis midpoint when the extent is below the spacing.
    For surfaces the box lattice is projected to the nearest surface
    point and duplicates are dropped.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    lo, hi = _bbox_of(domain)
    axes = [_axis_coords(float(lo[d]), float(hi[d]), spacing) for d in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=-1)
    params = {"spacing": float(spacing)}
    if isinstance(domain, TriMesh):
        pos, tris, bary = project_to_surface(domain, pts)
        rounded = np.round(pos, 9)
        _, keep = np.unique(rounded, axis=0, return_index=True)
        keep = np.sort(keep)
        return SampleSet(pos[keep], method="regular", params=params,
                         tri_indices=tris[keep], barycentric=bary[keep])
    return SampleSet(pts, method="regular", params=params)


def sample_random(domain, count: int, seed: int = 0) -> SampleSet:
    """Uniform random samples: by volume over a box, by area over a surface."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    params = {"count": int(count), "seed": int(seed)}
    if isinstance(domain, TriMesh):
        areas = domain.face_areas()
        total = areas.sum()
        if total <= 0:
            raise ValueError("surface has zero area")
        tri_idx = rng.choice(len(areas), size=count, p=areas / total)
        u1 = rng.random(count)
        u2 = rng.random(count)
        su1 = np.sqrt(u1)
        bary = np.stack([1.0 - su1, su1 * (1.0 - u2), su1 * u2], axis=-1)
        tri = domain.vertices[domain.faces[tri_idx]]
        pos = np.einsum("ijk,ij->ik", tri, bary)
        return SampleSet(pos, method="random", params=params,
                         tri_indices=tri_idx, barycentric=bary)
    lo, hi = _bbox_of(domain)
    pts = rng.uniform(lo, hi, size=(count, 3))
    return SampleSet(pts, method="random", params=params)


# ---------------------------------------------------------------------------
# Density-proportional sampling


@dataclass(frozen=True)
class GridField:
    """Scalar density over a voxel grid (negative values read as 0)."""

    grid: VoxelGrid

    def max_value(self) -> float:
        return float(self.grid.values.max())

    def bbox(self):
        return self.grid.bbox()

    def density(self, points: np.ndarray) -> np.ndarray:
        return np.maximum(self.grid.sample(points), 0.0)


@dataclass(frozen=True)
class MeshField:
    """Per-vertex scalar density over a surface, interpolated within faces."""

    mesh: TriMesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(v) != self.mesh.vertex_count:
            raise ValueError("values must be per-vertex")
        object.__setattr__(self, "values", v)

    def max_value(self) -> float:
        return float(self.values.max())


def scalar_field(data_geometry, values=None):
    """Wrap a geometry (+ optional variable values) as a density field."""
    if isinstance(data_geometry, VoxelGrid):
        if values is not None:
            grid = VoxelGrid(np.asarray(values, dtype=np.float64).reshape(
                data_geometry.dims), origin=data_geometry.origin,
                spacing=data_geometry.spacing)
        else:
            grid = data_geometry
        return GridField(grid)
    if isinstance(data_geometry, TriMesh):
        if values is None:
            values = np.ones(data_geometry.vertex_count)
        return MeshField(data_geometry, values)
    raise TypeError(f"no density field over {type(data_geometry).__name__}")


def _mh_volume(fld: GridField, count, seed, chains, burn_in, thin, sigma_fraction):
    rng = np.random.default_rng(seed)
    lo, hi = fld.bbox()
    # Per-axis proposal scale: an isotropic kernel sized to the diagonal
    # overshoots thin boxes along their short axes and stalls the walk.
    sigma = sigma_fraction * np.maximum(np.asarray(hi) - np.asarray(lo), 1e-12)

    x = np.empty((chains, 3))
    fx = np.zeros(chains)
    missing = np.ones(chains, dtype=bool)
    for _ in range(2000):
        if not missing.any():
            break
        cand = rng.uniform(lo, hi, size=(chains, 3))
        fc = fld.density(cand)
        take = missing & (fc > 0)
        x[take] = cand[take]
        fx[take] = fc[take]
        missing &= ~take
    if missing.any():
        raise ValueError("density field has no region of positive mass to start in")

    quota = np.full(chains, count // chains, dtype=np.int64)
    quota[: count % chains] += 1
    q_max = int(quota.max())
    emitted = np.empty((q_max, chains, 3))
    n_emit = 0
    # Every thin-th post-burn-in state is kept, rejected repeats included;
    # skipping repeats would bias the walk away from low-acceptance regions.
    for step in range(burn_in + thin * q_max):
        prop = x + rng.normal(0.0, sigma, size=(chains, 3))
        fp = fld.density(prop)
        u = rng.random(chains)
        accept = u * fx < fp
        x[accept] = prop[accept]
        fx[accept] = fp[accept]
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            emitted[n_emit] = x
            n_emit += 1

    parts = [emitted[: quota[c], c] for c in range(chains)]
    return np.concatenate(parts)[:count], None, None


def _strip_atlas(mesh: TriMesh):
    """Area-preserving layout of all faces as stacked right triangles.

    Face i becomes the right triangle with legs ``leg[i]`` at vertical
    offset ``y0[i]``; the affine map to the 3D face has unit area ratio,
    so uniform measure on the strip is uniform measure on the surface.
    """
    areas = mesh.face_areas()
    keep = areas > 0
    leg = np.sqrt(2.0 * areas)
    y0 = np.concatenate([[0.0], np.cumsum(leg)])[:-1]
    return leg, y0, keep


def _mh_surface(fld: MeshField, count, seed, chains, burn_in, thin, sigma_fraction):
    rng = np.random.default_rng(seed)
    mesh = fld.mesh
    leg, y0, valid = _strip_atlas(mesh)
    height = float(y0[-1] + leg[-1]) if len(leg) else 0.0
    width = float(leg.max()) if len(leg) else 0.0
    # The strip is much taller than wide; scale the proposal per axis so
    # lateral steps stay inside triangles while vertical steps still hop
    # between faces.
    sigma = sigma_fraction * np.maximum(np.array([width, height]), 1e-12)
    y_edges = np.concatenate([y0, [height]])
    fvals = fld.values[mesh.faces]  # (F, 3)

    def density(p):
        xq, yq = p[:, 0], p[:, 1]
        fi = np.clip(np.searchsorted(y_edges, yq, side="right") - 1, 0, len(leg) - 1)
        yl = yq - y0[fi]
        a = leg[fi]
        b1 = np.where(a > 0, xq / np.where(a == 0, 1.0, a), 0.0)
        b2 = np.where(a > 0, yl / np.where(a == 0, 1.0, a), 0.0)
        inside = (yq >= 0) & (yq <= height) & (xq >= 0) & (yl >= 0) \
            & (b1 + b2 <= 1.0) & valid[fi]
        b0 = 1.0 - b1 - b2
        f = b0 * fvals[fi, 0] + b1 * fvals[fi, 1] + b2 * fvals[fi, 2]
        return np.where(inside, np.maximum(f, 0.0), 0.0), fi, np.stack([b0, b1, b2], -1)

    x = np.empty((chains, 2))
    fx = np.zeros(chains)
    cur_fi = np.zeros(chains, dtype=np.int64)
    cur_bary = np.zeros((chains, 3))
    missing = np.ones(chains, dtype=bool)
    for _ in range(2000):
        if not missing.any():
            break
        cand = np.stack([rng.uniform(0, width, chains),
                         rng.uniform(0, height, chains)], axis=-1)
        fc, fi, bary = density(cand)
        take = missing & (fc > 0)
        x[take] = cand[take]
        fx[take] = fc[take]
        cur_fi[take] = fi[take]
        cur_bary[take] = bary[take]
        missing &= ~take
    if missing.any():
        raise ValueError("density field has no region of positive mass to start in")

    quota = np.full(chains, count // chains, dtype=np.int64)
    quota[: count % chains] += 1
    q_max = int(quota.max())
    emit_fi = np.empty((q_max, chains), dtype=np.int64)
    emit_bary = np.empty((q_max, chains, 3))
    n_emit = 0
    # As in the volume walk: keep every thin-th state, repeats included.
    for step in range(burn_in + thin * q_max):
        prop = x + rng.normal(0.0, sigma, size=(chains, 2))
        fp, fi, bary = density(prop)
        u = rng.random(chains)
        accept = u * fx < fp
        x[accept] = prop[accept]
        fx[accept] = fp[accept]
        cur_fi[accept] = fi[accept]
        cur_bary[accept] = bary[accept]
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            emit_fi[n_emit] = cur_fi
            emit_bary[n_emit] = cur_bary
            n_emit += 1

    tris = np.concatenate([emit_fi[: quota[c], c] for c in range(chains)])[:count]
    barys = np.concatenate([emit_bary[: quota[c], c] for c in range(chains)])[:count]
    tri = mesh.vertices[mesh.faces[tris]]
    pos = np.einsum("ijk,ij->ik", tri, barys)
    return pos, tris, barys


def sample_density_mh(field, count: int, seed: int = 0, *, chains: int = MH_CHAINS,
                      burn_in: int = MH_BURN_IN, thin: int = MH_THIN,
                      sigma_fraction: float = MH_SIGMA_FRACTION) -> SampleSet:
    """Draw samples whose density follows a scalar field.

    Runs ``chains`` Metropolis-Hastings random walks in parallel with an
    isotropic Gaussian proposal (sigma = ``sigma_fraction`` of the domain
    diagonal), acceptance ``min(1, f'/f)`` with f read as 0 outside the
    domain, ``burn_in`` discarded steps, then every ``thin``-th state
    kept (a rejected step keeps and may re-emit the current state, which
    the stationary distribution requires).  Chains get near-equal quotas
    and results concatenate in chain order, so a (field, count, seed)
    triple always produces the same SampleSet.  Surfaces run the walk in
    a 2D area-preserving layout of the faces so the acceptance rule
    stays scalar.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if field.max_value() <= 0:
        raise ValueError("density field has no positive values")
    params = {"count": int(count), "seed": int(seed), "chains": int(chains),
              "burn_in": int(burn_in), "thin": int(thin),
              "sigma_fraction": float(sigma_fraction)}
    if isinstance(field, GridField):
        pos, tris, bary = _mh_volume(field, count, seed, chains, burn_in, thin,
                                     sigma_fraction)
    elif isinstance(field, MeshField):
        pos, tris, bary = _mh_surface(field, count, seed, chains, burn_in, thin,
                                      sigma_fraction)
    else:
        raise TypeError(f"unsupported field type {type(field).__name__}")
    return SampleSet(pos, method="density", params=params,
                     tri_indices=tris, barycentric=bary)


# ---------------------------------------------------------------------------
# Persistence


def save_sample_set(samples: SampleSet, path) -> None:
    """Binary cache (.npz) holding positions plus the generating recipe."""
    import json as _json
    payload = {
        "positions": samples.positions,
        "method": np.bytes_(samples.method.encode()),
        "params": np.bytes_(_json.dumps(samples.params, sort_keys=True).encode()),
    }
    if samples.tri_indices is not None:
        payload["tri_indices"] = samples.tri_indices
        payload["barycentric"] = samples.barycentric
    np.savez(path, **payload)


def load_sample_set(path) -> SampleSet:
    import json as _json
    with np.load(path) as data:
        return SampleSet(
            positions=data["positions"],
            method=bytes(data["method"]).decode(),
            params=_json.loads(bytes(data["params"]).decode()),
            tri_indices=data["tri_indices"] if "tri_indices" in data else None,
            barycentric=data["barycentric"] if "barycentric" in data else None,
        )


def export_sample_csv(samples: SampleSet, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,z\n")
        for p in samples.positions:
            fh.write(f"{p[0]:.9g},{p[1]:.9g},{p[2]:.9g}\n")
