"""Content-addressed asset store: registration, lookup, integrity."""

import json
import threading

import numpy as np
import pytest

from craftvis.color import ColorMap, LabColor, export_colormap
from craftvis.fixtures import icosphere, noise_texture
from craftvis.library import (AssetLibrary, LibraryError, load_asset,
                              register_path)
from craftvis.mesh import save_obj
from craftvis.texture import (TextureImage, build_texture_set,
                              save_texture_set)


@pytest.fixture
def lib(tmp_path):
    return AssetLibrary(tmp_path / "store")


def gray_map():
    return ColorMap(
        name="gray",
        positions=(0.0, 1.0),
        colors=(LabColor.from_srgb((0, 0, 0)), LabColor.from_srgb((255, 255, 255))),
    )


def test_register_get_read_roundtrip(lib):
    payload = {"notes.txt": b"alpha", "data/values.bin": b"\x00\x01\x02"}
    aid = lib.register("texture", "speckle", payload, tags=("demo",))
    rec = lib.get(aid)
    assert rec.kind == "texture"
    assert rec.name == "speckle"
    assert rec.tags == ("demo",)
    assert rec.files == ("data/values.bin", "notes.txt")
    assert lib.read_file(aid, "notes.txt") == b"alpha"
    assert lib.read_file(aid, "data/values.bin") == b"\x00\x01\x02"


def test_register_is_idempotent(lib):
    payload = {"a.txt": b"same"}
    first = lib.register("texture", "t", payload)
    created = lib.get(first).created
    second = lib.register("texture", "t", payload)
    assert second == first
    assert lib.get(second).created == created
    assert len(lib.query()) == 1


def test_id_depends_on_content_and_metadata(lib):
    a = lib.register("texture", "t", {"a.txt": b"one"})
    b = lib.register("texture", "t", {"a.txt": b"two"})
    c = lib.register("texture", "renamed", {"a.txt": b"one"})
    assert len({a, b, c}) == 3


def test_unknown_kind_and_empty_payload(lib):
    with pytest.raises(LibraryError, match="unknown asset kind"):
        lib.register("shader", "s", {"a": b"x"})
    with pytest.raises(LibraryError, match="empty"):
        lib.register("texture", "t", {})


def test_query_filters(lib):
    lib.register("texture", "rock wall", {"a": b"1"}, tags=("rough",))
    lib.register("texture", "moss", {"a": b"2"}, tags=("green", "rough"))
    lib.register("colormap", "moss ramp", {"a": b"3"})
    assert {r.name for r in lib.query(kind="texture")} == {"rock wall", "moss"}
    assert {r.name for r in lib.query(name="MOSS")} == {"moss", "moss ramp"}
    assert {r.name for r in lib.query(tag="rough")} == {"rock wall", "moss"}
    assert lib.query(kind="texture", tag="green")[0].name == "moss"
    assert lib.query(tag="absent") == []


def test_query_sorted_by_created_then_id(lib):
    for i in range(5):
        lib.register("texture", f"t{i}", {"a": bytes([i])})
    rows = lib.query()
    keys = [(r.created, r.asset_id) for r in rows]
    assert keys == sorted(keys)


def test_remove(lib):
    aid = lib.register("texture", "gone", {"a": b"x"})
    lib.remove(aid)
    with pytest.raises(LibraryError, match="no asset"):
        lib.get(aid)
    assert lib.query() == []
    with pytest.raises(LibraryError, match="no asset"):
        lib.remove(aid)


def test_index_rebuild_after_deletion(lib):
    ids = [lib.register("texture", f"t{i}", {"a": bytes([i])})
           for i in range(3)]
    index_path = lib.root / "index.json"
    index_path.unlink()
    lib.rebuild_index()
    doc = json.loads(index_path.read_text())
    assert {row["id"] for row in doc["assets"]} == set(ids)


def test_index_tracks_store(lib):
    aid = lib.register("texture", "t", {"a": b"x"})
    assert [r["id"] for r in lib.load_index()["assets"]] == [aid]
    lib.remove(aid)
    assert lib.load_index()["assets"] == []


def test_read_file_verify_detects_corruption(lib):
    aid = lib.register("texture", "t", {"a.bin": b"original"})
    assert lib.read_file(aid, "a.bin", verify=True) == b"original"
    (lib.payload_dir(aid) / "a.bin").write_bytes(b"tampered")
    with pytest.raises(LibraryError, match="corrupt"):
        lib.read_file(aid, "a.bin", verify=True)


def test_read_file_unknown_rel(lib):
    aid = lib.register("texture", "t", {"a.bin": b"x"})
    with pytest.raises(LibraryError, match="has no file"):
        lib.read_file(aid, "missing.bin")


def test_register_path_file_and_dir(lib, tmp_path):
    f = tmp_path / "single.txt"
    f.write_bytes(b"file payload")
    aid = register_path(lib, "texture", "single", f)
    assert lib.read_file(aid, "single.txt") == b"file payload"

    d = tmp_path / "bundle"
    (d / "sub").mkdir(parents=True)
    (d / "top.txt").write_bytes(b"t")
    (d / "sub" / "leaf.txt").write_bytes(b"l")
    did = register_path(lib, "textureSet", "bundle", d)
    rec = lib.get(did)
    assert set(rec.files) == {"top.txt", "sub/leaf.txt"}
    assert lib.read_file(did, "sub/leaf.txt") == b"l"


def test_load_asset_colormap(lib):
    cmap = gray_map()
    aid = lib.register("colormap", "gray", {"gray.xml": export_colormap(cmap, "xml")})
    back = load_asset(lib, aid)
    assert back.positions == cmap.positions
    assert back.colors == cmap.colors


def test_load_asset_texture_set(lib, tmp_path):
    entries = [TextureImage(noise_texture(16, 16, seed=s)) for s in (0, 1)]
    ts = build_texture_set(entries, name="pair")
    save_texture_set(ts, tmp_path / "pair")
    aid = register_path(lib, "textureSet", "pair", tmp_path / "pair")
    back = load_asset(lib, aid)
    assert len(back.images) == 2
    assert np.array_equal(back.images[0].pixels, ts.images[0].pixels)


def test_load_asset_mesh(lib, tmp_path):
    mesh = icosphere(1)
    save_obj(mesh, tmp_path / "ball.obj")
    aid = register_path(lib, "mesh", "ball", tmp_path / "ball.obj")
    back = load_asset(lib, aid)
    assert np.allclose(back.vertices[back.faces], mesh.vertices[mesh.faces])


def test_load_asset_refuses_corrupt_store(lib):
    cmap = gray_map()
    aid = lib.register("colormap", "gray", {"g.xml": export_colormap(cmap, "xml")})
    (lib.payload_dir(aid) / "g.xml").write_bytes(b"<ColorMaps/>")
    with pytest.raises(LibraryError, match="corrupt"):
        load_asset(lib, aid)


def test_concurrent_registration(lib):
    errors = []

    def worker(i):
        try:
            for k in range(8):
                lib.register("texture", f"t{k}", {"a": bytes([k])})
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert len(lib.query()) == 8
    doc = lib.load_index()
    assert len(doc["assets"]) == 8
