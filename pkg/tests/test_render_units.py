import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from craftvis.render.camera import Camera, frame_scene_camera
from craftvis.render.glyphs import GlyphInstance, place_glyphs, select_lod
from craftvis.render.lines import extrude_line
from craftvis.render.raster import Framebuffer, prepare_draw, rasterize
from craftvis.render.shading import (
    colormap_lut,
    compute_bin_blend,
    lambert,
    lut_lookup,
    sample_bilinear,
    triplanar_weights,
)
from craftvis.color import ColorMap, LabColor


# --- bin blending -----------------------------------------------------------


def test_bin_blend_floor_rule_bulk():
    rng = np.random.default_rng(0)
    t = rng.random(10_000)
    n = int(rng.integers(1, 12))
    a, b, wa = compute_bin_blend(t, n, 0.08)
    base = np.minimum(np.floor(t * n).astype(int), n - 1)
    assert np.array_equal(a, base)
    assert np.all(wa >= 0.5 - 1e-12)
    assert np.all(wa <= 1.0)
    assert np.all((b == a) | (np.abs(b - a) == 1))


def test_bin_blend_zero_distance_is_step():
    t = np.linspace(0, 1, 1001)
    a, b, wa = compute_bin_blend(t, 4, 0.0)
    assert np.array_equal(a, b)
    assert np.all(wa == 1.0)
    assert np.array_equal(np.unique(a), [0, 1, 2, 3])


def test_bin_blend_boundary_is_even_split():
    a, b, wa = compute_bin_blend(0.5, 2, 0.2)
    assert wa == pytest.approx(0.5)
    assert {a, b} == {0, 1}


@given(st.floats(0, 1), st.integers(1, 10),
       st.floats(0.01, 0.5))
@settings(max_examples=60)
def test_bin_blend_weights_partition_unity(t, n, d):
    a, b, wa = compute_bin_blend(t, n, d)
    assert 0.0 <= wa <= 1.0
    assert 0 <= a < n
    assert 0 <= b < n


def test_bin_blend_continuity_bound():
    # numerical continuity: weight changes no faster than N/d per unit t
    n, d = 5, 0.1
    t = np.linspace(0, 1, 20_001)
    _, _, wa = compute_bin_blend(t, n, d)
    # effective blended weight of the lower-indexed bin, as a continuous curve
    a, b, _ = compute_bin_blend(t, n, d)
    low = np.minimum(a, b)
    w_low = np.where(a <= b, wa, 1.0 - wa)
    dt = t[1] - t[0]
    deltas = np.abs(np.diff(w_low))
    mask = np.diff(low) == 0  # only within one bin-pair region
    assert np.all(deltas[mask] <= dt * n / d + 1e-6)


def test_bin_blend_validates():
    with pytest.raises(ValueError):
        compute_bin_blend(0.5, 0, 0.1)
    with pytest.raises(ValueError):
        compute_bin_blend(0.5, 3, -0.1)


# --- triplanar --------------------------------------------------------------


def test_triplanar_axis_pure_one_hot():
    for axis in range(3):
        n = np.zeros(3)
        n[axis] = 1.0
        w = triplanar_weights(n)
        expect = np.zeros(3)
        expect[axis] = 1.0
        assert np.allclose(w, expect)


@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
       .filter(lambda v: np.linalg.norm(v) > 0.05))
@settings(max_examples=60)
def test_triplanar_weights_sum_to_one(n):
    w = triplanar_weights(np.asarray(n))
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w >= 0)


def test_triplanar_high_power_selects_argmax():
    rng = np.random.default_rng(3)
    normals = rng.normal(size=(500, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    # drop near-ties: within ~8% dominance the blend legitimately splits
    s = np.sort(np.abs(normals), axis=1)
    keep = s[:, 2] > s[:, 1] * 1.1
    normals = normals[keep]
    assert len(normals) > 300
    w = triplanar_weights(normals, power=64.0)
    top = np.argmax(np.abs(normals), axis=1)
    assert np.all(w[np.arange(len(w)), top] > 0.99)


# --- texture fetch / shading -------------------------------------------------


def test_bilinear_constant_image():
    img = np.full((8, 8, 3), 0.25)
    u = np.array([0.1, 0.5, 0.93])
    v = np.array([0.2, 0.8, 0.01])
    out = sample_bilinear(img, u, v)
    assert np.allclose(out, 0.25)


def test_bilinear_interpolates_midpoint():
    img = np.zeros((1, 2, 1))
    img[0, 1, 0] = 1.0
    # u=0.5 lands halfway between the two texel centers
    out = sample_bilinear(img, np.array([0.5]), np.array([0.5]))
    assert out[0, 0] == pytest.approx(0.5)


def test_bilinear_wraps_horizontally():
    img = np.zeros((1, 4, 1))
    img[0, 0, 0] = 1.0
    a = sample_bilinear(img, np.array([0.125]), np.array([0.5]))
    b = sample_bilinear(img, np.array([1.125]), np.array([0.5]))
    assert np.allclose(a, b)


def test_lambert_ambient_floor():
    albedo = np.ones((4, 3))
    n = np.tile([0.0, 0.0, 1.0], (4, 1))
    light = np.array([0.0, 0.0, 1.0])  # light travels along +z, away-facing
    out = lambert(albedo, n, light)
    assert np.allclose(out, 0.3)


def test_lambert_full_when_facing():
    albedo = np.full((2, 3), 0.8)
    n = np.tile([0.0, 0.0, 1.0], (2, 1))
    light = np.array([0.0, 0.0, -1.0])  # travelling toward the surface
    out = lambert(albedo, n, light)
    assert np.allclose(out, 0.8)


def test_colormap_lut_endpoints():
    cm = ColorMap("g", (0.0, 1.0), (LabColor(0, 0, 0), LabColor(100, 0, 0)))
    lut = colormap_lut(cm, size=256)
    assert lut.shape == (256, 3)
    assert np.allclose(lut[0], 0.0, atol=1e-3)
    assert np.allclose(lut[-1], 1.0, atol=1e-3)
    rgb = lut_lookup(lut, np.array([0.0, 1.0]))
    assert np.allclose(rgb[0], lut[0])
    assert np.allclose(rgb[1], lut[-1])


# --- line extrusion ----------------------------------------------------------


def wavy_line(n=40):
    s = np.linspace(0, 4 * np.pi, n)
    return np.stack([s, np.sin(s), 0.2 * np.cos(s)], axis=1)


def test_extrude_u_strictly_increasing_and_total_length():
    pts = wavy_line()
    lm = extrude_line(pts, geometry="ribbon", width=0.5)
    # station_u is per mesh vertex; all vertices of one station share a u
    u = np.empty(len(pts))
    for i in range(len(pts)):
        vals = lm.station_u[lm.station_index == i]
        assert np.allclose(vals, vals[0])
        u[i] = vals[0]
    assert np.all(np.diff(u) > 0)
    seglen = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    assert u[-1] == pytest.approx(seglen, rel=1e-6)


def test_ribbon_shape_and_width():
    pts = wavy_line(10)
    lm = extrude_line(pts, geometry="ribbon", width=0.8)
    mesh = lm.mesh
    assert mesh.vertex_count == 20
    assert mesh.face_count == 18
    widths = np.linalg.norm(mesh.vertices[1::2] - mesh.vertices[0::2], axis=1)
    assert np.allclose(widths, 0.8, atol=1e-9)
    # v runs 0..1 across
    assert np.allclose(np.unique(mesh.uvs[:, 1]), [0.0, 1.0])


def test_tube_ring_and_seam():
    pts = wavy_line(8)
    lm = extrude_line(pts, geometry="tube", radius=0.3, segments=10)
    mesh = lm.mesh
    # segments + 1 duplicated seam vertex per station
    assert mesh.vertex_count == 8 * 11
    ring = mesh.vertices[:11]
    d = np.linalg.norm(ring - pts[0], axis=1)
    assert np.allclose(d, 0.3, atol=1e-9)
    assert np.allclose(ring[0], ring[-1], atol=1e-12)
    v = mesh.uvs[:11, 1]
    assert v[0] == 0.0 and v[-1] == 1.0


def test_supplied_normals_steer_the_ribbon():
    pts = np.stack([np.linspace(0, 1, 5), np.zeros(5), np.zeros(5)], axis=1)
    n = np.tile([0.0, 0.0, 1.0], (5, 1))
    lm = extrude_line(pts, geometry="ribbon", width=0.2, normals=n)
    mesh = lm.mesh
    # ribbon lies in the xy plane, normal along z
    assert np.allclose(mesh.vertices[:, 2], 0.0, atol=1e-12)
    assert np.allclose(mesh.normals[:, 2], 1.0, atol=1e-9)


def test_index_station_mode_counts_points():
    pts = wavy_line(6)
    lm = extrude_line(pts, geometry="ribbon", width=0.1, station_mode="index")
    assert np.allclose(lm.station_u, np.repeat(np.arange(6, dtype=float), 2))


def test_extrude_rejects_bad_input():
    with pytest.raises(ValueError):
        extrude_line(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        extrude_line(wavy_line(4), geometry="noodle")
    with pytest.raises(ValueError):
        extrude_line(wavy_line(4), geometry="ribbon", width=0.0)


# --- glyph placement ---------------------------------------------------------


def test_glyph_base_scale_from_size_percent():
    inst = place_glyphs(np.zeros((1, 3)), data_extent=(10.0, 4.0, 2.0),
                        glyph_extent=(2.0, 2.0, 2.0), size_percent=5.0)
    # largest data extent 10, 5% of it is 0.5, glyph largest extent 2 -> 0.25
    assert np.allclose(inst[0].scale, 0.25)


def test_glyph_vector_orientation_turns_z():
    inst = place_glyphs(np.zeros((1, 3)), data_extent=(1, 1, 1),
                        glyph_extent=(1, 1, 1),
                        orientations=np.array([[1.0, 0.0, 0.0]]),
                        orientation_mode="vector")
    turned = inst[0].rotation @ np.array([0.0, 0.0, 1.0])
    assert np.allclose(turned, [1.0, 0.0, 0.0], atol=1e-9)


def test_glyph_width_scales_lateral_axes_only():
    inst = place_glyphs(np.zeros((2, 3)), data_extent=(1, 1, 1),
                        glyph_extent=(1, 1, 1),
                        width_values=np.array([0.0, 1.0]))
    thin, wide = inst
    assert thin.scale[2] == pytest.approx(wide.scale[2])
    assert thin.scale[0] == pytest.approx(0.25 * thin.scale[2])
    assert wide.scale[0] == pytest.approx(1.75 * wide.scale[2])


def test_glyph_random_orientation_deterministic():
    a = place_glyphs(np.zeros((3, 3)), data_extent=(1, 1, 1), glyph_extent=(1, 1, 1),
                     orientation_mode="random", seed=5)
    b = place_glyphs(np.zeros((3, 3)), data_extent=(1, 1, 1), glyph_extent=(1, 1, 1),
                     orientation_mode="random", seed=5)
    for x, y in zip(a, b):
        assert np.allclose(x.rotation, y.rotation)
    # rotations are proper
    for x in a:
        assert np.allclose(x.rotation @ x.rotation.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(x.rotation) == pytest.approx(1.0)


def test_select_lod_by_projected_size():
    cam = Camera(position=(0, 0, 10), look_at=(0, 0, 0), width=800, height=600)
    near = GlyphInstance(rotation=np.eye(3), scale=np.ones(3),
                         position=np.array([0.0, 0.0, 9.0]), scalar=0.0)
    far = GlyphInstance(rotation=np.eye(3), scale=np.full(3, 0.01),
                        position=np.array([0.0, 0.0, -50.0]), scalar=0.0)
    assert select_lod(3, near, glyph_radius=1.0, camera=cam) == 0
    assert select_lod(3, far, glyph_radius=1.0, camera=cam) == 2
    assert select_lod(1, near, glyph_radius=1.0, camera=cam) == 0


# --- camera ------------------------------------------------------------------


def test_camera_projects_center():
    cam = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=200, height=100)
    xy, z = cam.project(cam.to_camera(np.array([[0.0, 0.0, 0.0]])))
    assert np.allclose(xy[0], [100.0, 50.0])
    assert z[0] == pytest.approx(5.0)


def test_camera_y_axis_points_down_in_pixels():
    cam = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=200, height=200)
    xy_up, _ = cam.project(cam.to_camera(np.array([[0.0, 1.0, 0.0]])))
    xy_down, _ = cam.project(cam.to_camera(np.array([[0.0, -1.0, 0.0]])))
    assert xy_up[0, 1] < xy_down[0, 1]


def test_camera_rays_hit_projected_pixels():
    cam = Camera(position=(1, 2, 8), look_at=(0, 0, 0), width=64, height=48)
    dirs = cam.ray_directions()
    assert dirs.shape == (48, 64, 3)
    p = np.array([[0.3, -0.2, 0.4]])
    xy, z = cam.project(cam.to_camera(p))
    px, py = int(round(xy[0, 0] - 0.5)), int(round(xy[0, 1] - 0.5))
    d = dirs[py, px]
    to_p = p[0] - np.asarray(cam.position)
    cos = np.dot(d, to_p) / np.linalg.norm(to_p)
    assert cos > 0.999


def test_camera_dict_roundtrip():
    cam = Camera(position=(1, 2, 3), look_at=(0, 1, 0), up=(0, 0, 1),
                 fov_deg=35, width=320, height=240)
    back = Camera.from_dict(cam.to_dict())
    assert back == cam


def test_frame_scene_camera_sees_whole_bbox():
    lo = np.array([-2.0, -1.0, 0.0])
    hi = np.array([3.0, 4.0, 2.5])
    cam = frame_scene_camera(lo, hi, width=160, height=120)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    xy, z = cam.project(cam.to_camera(corners))
    assert np.all(z > 0)
    assert np.all(xy[:, 0] >= 0) and np.all(xy[:, 0] <= 160)
    assert np.all(xy[:, 1] >= 0) and np.all(xy[:, 1] <= 120)


# --- rasterizer --------------------------------------------------------------


def quad_attrs(z, shade):
    """Two triangles forming a unit quad at depth z, constant shading."""
    verts = np.array([
        [-1.0, -1.0, z], [1.0, -1.0, z], [1.0, 1.0, z], [-1.0, 1.0, z]])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    attrs = np.full((4, 1), shade)
    return verts, faces, attrs


def flat_shader(value):
    def shader(attrs):
        n = len(attrs)
        rgba = np.empty((n, 4))
        rgba[:, :3] = value
        rgba[:, 3] = 1.0
        return rgba
    return shader


def test_depth_buffer_keeps_nearer_quad():
    cam = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=64, height=64)
    fb = Framebuffer.create(64, 64, background=(0, 0, 0, 1))
    vn, fn, an = quad_attrs(1.0, 1.0)   # nearer to the camera
    vf, ff, af = quad_attrs(-1.0, 0.0)  # farther
    near = prepare_draw(cam, vn, fn, an, flat_shader(1.0), 0)
    far = prepare_draw(cam, vf, ff, af, flat_shader(0.5), 1)
    rasterize(fb, [far, near])     # draw order must not matter
    fb2 = Framebuffer.create(64, 64, background=(0, 0, 0, 1))
    rasterize(fb2, [near, far])
    assert np.array_equal(fb.color, fb2.color)
    assert fb.color[32, 32, 0] == pytest.approx(1.0)
    assert fb.layer[32, 32] == 0
    assert fb.depth[32, 32] == pytest.approx(4.0, rel=1e-3)


def test_rasterize_workers_identical():
    cam = Camera(position=(0.3, 0.1, 5), look_at=(0, 0, 0), width=96, height=80)
    rng = np.random.default_rng(1)
    draws = []
    for i in range(5):
        v = rng.normal(scale=1.2, size=(12, 3))
        f = rng.integers(0, 12, size=(14, 3))
        a = rng.random((12, 1))
        d = prepare_draw(cam, v, f, a, flat_shader(rng.random()), i)
        if d is not None:
            draws.append(d)
    images = []
    for workers in (1, 2, 8):
        fb = Framebuffer.create(96, 80)
        rasterize(fb, draws, workers=workers)
        images.append(fb.image_uint8())
    assert np.array_equal(images[0], images[1])
    assert np.array_equal(images[0], images[2])


def test_prepare_draw_clips_behind_camera():
    cam = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=32, height=32)
    verts = np.array([[0, 0, 20.0], [1, 0, 20.0], [0, 1, 20.0]])  # behind the eye
    out = prepare_draw(cam, verts, np.array([[0, 1, 2]]), np.zeros((3, 1)),
                       flat_shader(1.0), 0)
    assert out is None


def test_partial_clip_still_draws():
    cam = Camera(position=(0, 0, 5), look_at=(0, 0, 0), width=48, height=48)
    # one vertex behind the camera, two in front
    verts = np.array([[0, 0.5, 20.0], [-2, -1, 0.0], [2, -0.5, 0.0]])
    out = prepare_draw(cam, verts, np.array([[0, 1, 2]]), np.zeros((3, 1)),
                       flat_shader(1.0), 0)
    assert out is not None
    fb = Framebuffer.create(48, 48, background=(0, 0, 0, 1))
    rasterize(fb, [out])
    assert np.any(fb.layer >= 0)
