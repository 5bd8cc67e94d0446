import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from craftvis.fixtures import noise_texture, ramp_image
from craftvis.texture import (
    NormalMap,
    TextureImage,
    TextureSet,
    build_texture_set,
    crop,
    load_texture_set,
    make_normal_map,
    save_texture_set,
    tile_preview,
)


def noise_img(seed=0, w=32, h=24):
    return TextureImage(noise_texture(width=w, height=h, seed=seed))


def test_texture_image_adds_alpha():
    img = TextureImage(np.zeros((4, 5, 3), dtype=np.uint8))
    assert img.pixels.shape == (4, 5, 4)
    assert np.all(img.pixels[..., 3] == 255)


def test_texture_image_quantizes_floats():
    img = TextureImage(np.full((2, 2, 3), 12.6))
    assert img.pixels.dtype == np.uint8
    assert np.all(img.rgb == 13)


def test_texture_image_rejects_bad_shape():
    with pytest.raises(ValueError):
        TextureImage(np.zeros((4, 4), dtype=np.uint8))


def test_tile_once_is_identity():
    img = noise_img()
    tiled = tile_preview(img, 1, 1)
    assert tiled.pixels.tobytes() == img.pixels.tobytes()


def test_tile_repeats_modular():
    img = noise_img()
    tiled = tile_preview(img, 3, 2)
    assert tiled.width == img.width * 3
    assert tiled.height == img.height * 2
    for ty in range(2):
        for tx in range(3):
            block = tiled.pixels[ty * img.height:(ty + 1) * img.height,
                                 tx * img.width:(tx + 1) * img.width]
            assert np.array_equal(block, img.pixels)


rect = st.tuples(
    st.integers(min_value=0, max_value=20),
    st.integers(min_value=0, max_value=12),
    st.integers(min_value=1, max_value=12),
    st.integers(min_value=1, max_value=12),
)


@given(rect, st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=3))
@settings(max_examples=40)
def test_crop_then_tile_matches_modular_indexing(r, nx, ny):
    img = noise_img()
    x, y, w, h = r
    cropped = crop(img, x, y, w, h)
    tiled = tile_preview(cropped, nx, ny)
    yy = (np.arange(h * ny) % h) + y
    xx = (np.arange(w * nx) % w) + x
    expect = img.pixels[np.ix_(yy, xx)]
    assert np.array_equal(tiled.pixels, expect)


def test_crop_out_of_bounds():
    with pytest.raises(ValueError):
        crop(noise_img(), 30, 0, 8, 8)


def test_crop_keeps_physical_scale():
    img = TextureImage(noise_texture(), physical_scale=0.4)
    assert crop(img, 0, 0, 8, 8).physical_scale == 0.4


# --- normal maps ----------------------------------------------------------


def test_flat_image_encodes_flat_normal():
    flat = TextureImage(np.full((16, 16, 3), 90, dtype=np.uint8))
    nm = make_normal_map(flat)
    assert np.all(nm.pixels == np.array([128, 128, 255], dtype=np.uint8))


def test_decoded_normals_unit_length():
    nm = make_normal_map(noise_img(), strength=3.0)
    lengths = np.linalg.norm(nm.decode(), axis=-1)
    assert np.allclose(lengths, 1.0, atol=1e-9)


def test_encode_decode_within_quantization():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(10, 10, 3))
    v[..., 2] = np.abs(v[..., 2]) + 0.2
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    back = NormalMap.encode(v).decode()
    assert np.max(np.abs(back - v)) <= 2.0 / 255.0


def test_ramp_gradient_direction():
    # brightness increasing along +x tilts normals toward -x
    img = TextureImage(ramp_image(width=32, height=16, axis=1))
    n = make_normal_map(img, strength=2.0).decode()
    interior = n[4:-4, 4:-4]
    assert np.all(interior[..., 0] < 0)
    assert np.allclose(interior[..., 1], 0.0, atol=2.0 / 255.0)


def test_stronger_strength_tilts_more():
    img = TextureImage(ramp_image(width=32, height=16, axis=1))
    weak = make_normal_map(img, strength=0.5).decode()
    strong = make_normal_map(img, strength=4.0).decode()
    assert np.mean(strong[4:-4, 4:-4, 2]) < np.mean(weak[4:-4, 4:-4, 2])


# --- texture sets ----------------------------------------------------------


def test_build_set_mixed_sizes_error():
    entries = [noise_img(0, 16, 16), noise_img(1, 32, 32)]
    with pytest.raises(ValueError, match="resample"):
        build_texture_set(entries)


def test_build_set_resample_upsamples_to_largest():
    entries = [noise_img(0, 16, 16), noise_img(1, 32, 32)]
    ts = build_texture_set(entries, resample=True)
    assert ts.size == (32, 32)
    assert len(ts) == 2


def test_build_set_with_normals_and_masks():
    entries = [noise_img(s) for s in range(3)]
    masks = [np.full((24, 32), 255, dtype=np.uint8) for _ in range(3)]
    ts = build_texture_set(entries, name="leaves", normal_strength=2.0, alpha_masks=masks)
    assert len(ts.normal_maps) == 3
    assert len(ts.alpha_masks) == 3


def test_set_rejects_mismatched_normal_count():
    entries = [noise_img(s) for s in range(2)]
    nm = (make_normal_map(entries[0]),)
    with pytest.raises(ValueError):
        TextureSet(name="bad", images=tuple(entries), normal_maps=nm)


def test_save_load_roundtrip(tmp_path):
    entries = [noise_img(s) for s in range(2)]
    masks = [np.where(np.arange(32)[None, :] < 16, 255, 0).astype(np.uint8).repeat(1, axis=0)
             * np.ones((24, 1), dtype=np.uint8) for _ in range(2)]
    ts = build_texture_set(entries, name="set", normal_strength=1.5,
                           alpha_masks=[m.astype(np.uint8) for m in masks])
    manifest = save_texture_set(ts, tmp_path / "ts")
    back = load_texture_set(manifest)
    assert back.name == ts.name
    assert len(back) == len(ts)
    for a, b in zip(back.images, ts.images):
        assert np.array_equal(a.pixels, b.pixels)
    for a, b in zip(back.normal_maps, ts.normal_maps):
        assert np.array_equal(a.pixels, b.pixels)
    for a, b in zip(back.alpha_masks, ts.alpha_masks):
        assert np.array_equal(a, b)


def test_texture_png_roundtrip(tmp_path):
    img = noise_img(2)
    p = tmp_path / "t.png"
    img.save(p)
    back = TextureImage.load(p)
    assert np.array_equal(back.pixels, img.pixels)
