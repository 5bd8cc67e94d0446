"""Content-addressed on-disk store for reusable visualization assets.

Layout under the library root:

    records/<id>.json   one metadata record per asset (source of truth)
    payloads/<id>/      the asset's files (images, meshes, manifests)
    index.json          derived listing, rebuildable from records/

Asset ids are sha256 over the payload bytes plus the canonical metadata,
so registering identical content twice is a no-op that returns the same id.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

ASSET_KINDS = (
    "colormap", "texture", "textureSet", "lineTexture", "normalMap",
    "alphaMask", "glyph", "mesh",
)


class LibraryError(Exception):
    pass


@dataclass(frozen=True)
class AssetRecord:
    """Metadata for one stored asset."""

    asset_id: str
    kind: str
    name: str
    created: str
    files: tuple
    tags: tuple = ()
    source: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.asset_id,
            "kind": self.kind,
            "name": self.name,
            "created": self.created,
            "files": list(self.files),
            "tags": list(self.tags),
            "source": self.source,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssetRecord":
        return cls(
            asset_id=d["id"], kind=d["kind"], name=d["name"],
            created=d["created"], files=tuple(d["files"]),
            tags=tuple(d.get("tags", ())), source=d.get("source"),
            extra=d.get("extra", {}),
        )


def _canonical_meta(kind: str, name: str, tags, source, extra) -> bytes:
    doc = {
        "kind": kind, "name": name, "tags": sorted(tags),
        "source": source, "extra": extra,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def _hash_payload(files: dict) -> "hashlib._Hash":
    h = hashlib.sha256()
    for rel in sorted(files):
        h.update(rel.encode())
        h.update(b"\0")
        h.update(files[rel])
        h.update(b"\0")
    return h


def _now() -> str:
    import datetime
    return datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ")


class AssetLibrary:
    """A directory of assets addressed by content hash.

    All mutating operations write through a temp file followed by
    ``os.replace`` so a crashed process never leaves a half-written
    record, and the in-process lock makes concurrent registration from
    threads safe.
    """

    def __init__(self, root) -> None:
        self.root = Path(root)
        self._lock = threading.Lock()
        (self.root / "records").mkdir(parents=True, exist_ok=True)
        (self.root / "payloads").mkdir(parents=True, exist_ok=True)
        if not self._index_path.exists():
            self.rebuild_index()

    # -- paths ------------------------------------------------------------

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _record_path(self, asset_id: str) -> Path:
        return self.root / "records" / f"{asset_id}.json"

    def payload_dir(self, asset_id: str) -> Path:
        return self.root / "payloads" / asset_id

    # -- core -------------------------------------------------------------

    def register(self, kind: str, name: str, files: dict, *, tags=(),
                 source: str | None = None, extra: dict | None = None) -> str:
        """Store an asset and return its id.

        ``files`` maps relative file names to raw bytes.  Registering the
        exact same content and metadata again returns the existing id
        without touching the store.
        """
        if kind not in ASSET_KINDS:
            raise LibraryError(
                f"unknown asset kind {kind!r}; expected one of {ASSET_KINDS}")
        if not files:
            raise LibraryError("asset payload is empty")
        extra = extra or {}
        h = _hash_payload(files)
        h.update(_canonical_meta(kind, name, tags, source, extra))
        asset_id = h.hexdigest()

        with self._lock:
            rec_path = self._record_path(asset_id)
            if rec_path.exists():
                return asset_id
            pdir = self.payload_dir(asset_id)
            tmp = Path(tempfile.mkdtemp(dir=self.root / "payloads"))
            try:
                for rel, data in files.items():
                    target = tmp / rel
                    target.parent.mkdir(parents=True, exist_ok=True)
                    target.write_bytes(data)
                os.replace(tmp, pdir)
            except BaseException:
                shutil.rmtree(tmp, ignore_errors=True)
                raise
            record = AssetRecord(
                asset_id=asset_id, kind=kind, name=name, created=_now(),
                files=tuple(sorted(files)), tags=tuple(tags), source=source,
                extra=extra)
            self._write_json(rec_path, record.to_dict())
            self._rebuild_index_locked()
        return asset_id

    def get(self, asset_id: str) -> AssetRecord:
        path = self._record_path(asset_id)
        if not path.exists():
            raise LibraryError(f"no asset with id {asset_id!r}")
        return AssetRecord.from_dict(json.loads(path.read_text()))

    def read_file(self, asset_id: str, rel: str, *, verify: bool = False) -> bytes:
        rec = self.get(asset_id)
        if rel not in rec.files:
            raise LibraryError(f"asset {asset_id[:12]} has no file {rel!r}")
        data = (self.payload_dir(asset_id) / rel).read_bytes()
        if verify:
            files = {r: (self.payload_dir(asset_id) / r).read_bytes()
                     for r in rec.files}
            h = _hash_payload(files)
            h.update(_canonical_meta(rec.kind, rec.name, rec.tags, rec.source,
                                     rec.extra))
            if h.hexdigest() != asset_id:
                raise LibraryError(
                    f"asset {asset_id[:12]} payload does not match its id; "
                    f"the store is corrupt")
        return data

    def remove(self, asset_id: str) -> None:
        with self._lock:
            path = self._record_path(asset_id)
            if not path.exists():
                raise LibraryError(f"no asset with id {asset_id!r}")
            path.unlink()
            shutil.rmtree(self.payload_dir(asset_id), ignore_errors=True)
            self._rebuild_index_locked()

    # -- queries ----------------------------------------------------------

    def query(self, kind: str | None = None, name: str | None = None,
              tag: str | None = None) -> list:
        out = []
        for rec in self._all_records():
            if kind is not None and rec.kind != kind:
                continue
            if name is not None and name.lower() not in rec.name.lower():
                continue
            if tag is not None and tag not in rec.tags:
                continue
            out.append(rec)
        out.sort(key=lambda r: (r.created, r.asset_id))
        return out

    def _all_records(self):
        for path in sorted((self.root / "records").glob("*.json")):
            yield AssetRecord.from_dict(json.loads(path.read_text()))

    # -- index ------------------------------------------------------------

    def rebuild_index(self) -> None:
        with self._lock:
            self._rebuild_index_locked()

    def _rebuild_index_locked(self) -> None:
        rows = [r.to_dict() for r in self._all_records()]
        rows.sort(key=lambda r: (r["created"], r["id"]))
        self._write_json(self._index_path, {"assets": rows})

    def load_index(self) -> dict:
        return json.loads(self._index_path.read_text())

    @staticmethod
    def _write_json(path: Path, doc: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


# ---------------------------------------------------------------------------
# Typed helpers


def register_path(library: AssetLibrary, kind: str, name: str, path, **kw) -> str:
    """Register a file or directory from disk."""
    path = Path(path)
    if path.is_dir():
        files = {str(p.relative_to(path)): p.read_bytes()
                 for p in sorted(path.rglob("*")) if p.is_file()}
    else:
        files = {path.name: path.read_bytes()}
    return library.register(kind, name, files, **kw)


def load_asset(library: AssetLibrary, asset_id: str):
    """Materialize a stored asset as the matching runtime object."""
    from .scene import _load_asset as build

    rec = library.get(asset_id)
    # touch one file with verification so corruption surfaces on load
    library.read_file(asset_id, rec.files[0], verify=True)
    pdir = library.payload_dir(asset_id)
    kind = rec.kind
    if kind == "textureSet":
        return build(kind, pdir / "textureset.json")
    if kind == "glyph":
        return build(kind, pdir / "glyph.json")
    if kind == "mesh":
        from .mesh import load_obj
        objs = [f for f in rec.files if f.endswith(".obj")]
        if not objs:
            raise LibraryError(f"mesh asset {asset_id[:12]} holds no .obj file")
        return load_obj(pdir / objs[0])
    obj = build(kind, pdir / rec.files[0])
    if kind in ("texture", "lineTexture"):
        scale = rec.extra.get("physical_scale")
        if scale is not None:
            import dataclasses
            obj = dataclasses.replace(obj, physical_scale=float(scale))
    return obj
