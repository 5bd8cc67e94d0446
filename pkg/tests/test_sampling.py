import numpy as np
import pytest

from craftvis.fixtures import grid_surface, icosphere
from craftvis.sampling import (
    GridField,
    export_sample_csv,
    load_sample_set,
    project_to_surface,
    sample_density_mh,
    sample_random,
    sample_regular,
    save_sample_set,
    scalar_field,
)
from craftvis.scene import VoxelGrid


def flat_grid(nx=8, ny=8, fill=1.0):
    values = np.full((nx, ny, 1), fill)
    return VoxelGrid(values=values, origin=(0.0, 0.0, 0.0), spacing=(1.0, 1.0, 1.0))


def split_grid():
    """Left half twice as dense as the right half."""
    values = np.ones((8, 8, 1))
    values[:4] = 2.0
    return VoxelGrid(values=values, origin=(0.0, 0.0, 0.0), spacing=(1.0, 1.0, 1.0))


def cell_histogram(points, grid):
    lo = np.asarray(grid.origin)
    spacing = np.asarray(grid.spacing)
    dims = grid.values.shape
    idx = np.floor((points - lo) / spacing).astype(int)
    idx = np.clip(idx, 0, np.array(dims) - 1)
    hist = np.zeros(dims)
    np.add.at(hist, (idx[:, 0], idx[:, 1], idx[:, 2]), 1.0)
    return hist


def tv_distance(points, grid):
    hist = cell_histogram(points, grid)
    p = hist / hist.sum()
    q = grid.values / grid.values.sum()
    return 0.5 * np.abs(p - q).sum()


# --- regular / random -------------------------------------------------------


def test_regular_points_on_lattice():
    ss = sample_regular(flat_grid(4, 4), spacing=1.0)
    assert ss.method == "regular"
    assert len(ss.positions) > 0
    lo = ss.positions.min(axis=0)
    steps = (ss.positions - lo) / 1.0
    assert np.allclose(steps, np.round(steps), atol=1e-9)


def test_regular_spacing_validates():
    with pytest.raises(ValueError):
        sample_regular(flat_grid(), spacing=0.0)


def test_random_inside_bbox_and_deterministic():
    g = flat_grid(6, 5)
    a = sample_random(g, 200, seed=3)
    b = sample_random(g, 200, seed=3)
    c = sample_random(g, 200, seed=4)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)
    assert len(a.positions) == 200
    lo = np.array(g.origin)
    hi = lo + (np.array(g.values.shape)) * np.array(g.spacing)
    assert np.all(a.positions >= lo - 1e-9)
    assert np.all(a.positions <= hi + 1e-9)


def test_random_on_mesh_lands_on_surface():
    mesh = icosphere(subdivisions=2)
    ss = sample_random(mesh, 150, seed=1)
    proj, _, _ = project_to_surface(mesh, ss.positions)
    assert np.max(np.linalg.norm(proj - ss.positions, axis=1)) < 1e-6


# --- density (volume) -------------------------------------------------------


def test_mh_volume_deterministic_and_counted():
    field = scalar_field(split_grid())
    a = sample_density_mh(field, 3000, seed=9)
    b = sample_density_mh(field, 3000, seed=9)
    c = sample_density_mh(field, 3000, seed=10)
    assert len(a.positions) == 3000
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)
    assert a.method == "density"


def test_mh_count_not_divisible_by_chains():
    field = scalar_field(flat_grid())
    ss = sample_density_mh(field, 1003, seed=0)
    assert len(ss.positions) == 1003


def test_mh_never_samples_zero_density():
    values = np.ones((8, 8, 1))
    values[2:6] = 0.0  # dead band through the middle
    g = VoxelGrid(values=values, origin=(0.0, 0.0, 0.0), spacing=(1.0, 1.0, 1.0))
    field = scalar_field(g)
    ss = sample_density_mh(field, 5000, seed=7)
    assert np.all(field.density(ss.positions) > 0.0)
    # interpolation reaches half a cell past the band edge; beyond that the
    # density is exactly zero and nothing may land there
    x = ss.positions[:, 0]
    assert not np.any((x >= 2.5) & (x < 5.5))


def test_mh_split_grid_matches_density():
    field = scalar_field(split_grid())
    ss = sample_density_mh(field, 60_000, seed=2)
    assert tv_distance(ss.positions, split_grid()) < 0.05
    left = np.sum(ss.positions[:, 0] < 4.0)
    right = len(ss.positions) - left
    assert left / right == pytest.approx(2.0, rel=0.1)


def test_mh_tv_decreases_with_count():
    g = flat_grid()
    field = scalar_field(g)
    tvs = [tv_distance(sample_density_mh(field, n, seed=5).positions, g)
           for n in (10_000, 100_000, 200_000)]
    assert tvs[0] > tvs[1] > tvs[2]
    assert tvs[2] < 0.05


# --- density (surface) ------------------------------------------------------


def test_mh_surface_points_on_mesh():
    mesh, variables = grid_surface(n=24)
    field = scalar_field(mesh, variables["ridge"] - variables["ridge"].min() + 0.1)
    ss = sample_density_mh(field, 2000, seed=3)
    proj, _, _ = project_to_surface(mesh, ss.positions)
    assert np.max(np.linalg.norm(proj - ss.positions, axis=1)) < 1e-6
    assert ss.tri_indices is not None
    assert len(ss.tri_indices) == 2000


def test_mh_surface_weighted_by_scalar():
    mesh = icosphere(subdivisions=3)
    z = mesh.vertices[:, 2]
    density = np.where(z > 0, 4.0, 1.0)  # upper hemisphere four times denser
    ss = sample_density_mh(scalar_field(mesh, density), 20_000, seed=6)
    upper = np.sum(ss.positions[:, 2] > 0)
    lower = len(ss.positions) - upper
    assert upper / lower == pytest.approx(4.0, rel=0.15)


def test_mh_surface_deterministic():
    mesh = icosphere(subdivisions=2)
    field = scalar_field(mesh, np.ones(mesh.vertex_count))
    a = sample_density_mh(field, 500, seed=1)
    b = sample_density_mh(field, 500, seed=1)
    assert np.array_equal(a.positions, b.positions)


def test_mh_raises_without_positive_mass():
    mesh = icosphere(subdivisions=1)
    field = scalar_field(mesh, -np.ones(mesh.vertex_count))  # clamps to zero
    with pytest.raises(ValueError, match="positive"):
        sample_density_mh(field, 10, seed=0)
    dead = scalar_field(flat_grid(fill=0.0))
    with pytest.raises(ValueError, match="positive"):
        sample_density_mh(dead, 10, seed=0)


# --- persistence ------------------------------------------------------------


def test_sample_set_cache_roundtrip(tmp_path):
    field = scalar_field(flat_grid())
    ss = sample_density_mh(field, 400, seed=8)
    p = tmp_path / "samples.npz"
    save_sample_set(ss, p)
    back = load_sample_set(p)
    assert np.array_equal(back.positions, ss.positions)
    assert back.method == ss.method
    assert back.params == ss.params


def test_sample_csv_export(tmp_path):
    ss = sample_random(flat_grid(), 15, seed=0)
    p = tmp_path / "pts.csv"
    export_sample_csv(ss, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "x,y,z"
    assert len(lines) == 16
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.allclose(vals, ss.positions, atol=1e-8)
