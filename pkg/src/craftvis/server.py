"""HTTP service exposing the asset pipeline to interactive front ends.

Every endpoint is stateless apart from the asset library directory; all
binary payloads travel base64-encoded inside JSON, except rendered
images which come back as raw PNG bodies.
"""

from __future__ import annotations

import base64
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel, Field

from . import __version__
from . import color as colorlib
from .library import AssetLibrary, LibraryError, register_path
from .scene import SceneError
from .texture import TextureImage, make_normal_map, tile_preview


def _decode_image(data_b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data_b64)
        return np.asarray(Image.open(io.BytesIO(raw)).convert("RGBA"))
    except Exception:
        raise HTTPException(status_code=422, detail="image is not decodable")


def _png_b64(array: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class PaletteRequest(BaseModel):
    image: str = Field(description="base64 PNG or JPEG")
    count: int = 6
    image_id: str | None = None


class ColormapSampleRequest(BaseModel):
    xml: str = Field(description="colormap XML document")
    positions: list[float]


class ColormapExportRequest(BaseModel):
    name: str
    positions: list[float]
    rgb: list[list[int]]
    format: str = "xml"


class NormalMapRequest(BaseModel):
    image: str
    strength: float = 2.0


class TileRequest(BaseModel):
    image: str
    columns: int = 3
    rows: int = 3


class SynthesizeRequest(BaseModel):
    image: str
    output_height: int = 2048
    seed: int = 0
    jump_probability: float = 0.1
    min_quality: float = 10.0
    min_jump_size: int = 1


class OrientRequest(BaseModel):
    obj: str = Field(description="base64 OBJ text")
    forward: list[float]
    up: list[float] = [0.0, 1.0, 0.0]


class LodRequest(BaseModel):
    obj: str
    targets: list[int] = [5000, 500, 100]
    bake_resolution: int = 256
    name: str = "glyph"


class SampleRequest(BaseModel):
    obj: str | None = None
    volume: dict | None = None
    method: str = "regular"
    spacing: float | None = None
    count: int = 100
    seed: int = 0


class RegisterRequest(BaseModel):
    kind: str
    name: str
    files: dict[str, str] = Field(description="relative name -> base64 bytes")
    tags: list[str] = []
    source: str | None = None


class RenderRequest(BaseModel):
    scene: dict = Field(description="scene document with inline data/assets")
    width: int | None = None
    height: int | None = None
    workers: int = 1


def create_app(library_root=None) -> FastAPI:
    app = FastAPI(title="craftvis", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])

    root = library_root or os.environ.get("CRAFTVIS_LIBRARY")
    if root is None:
        root = Path.home() / ".craftvis" / "library"
    library = AssetLibrary(Path(root).expanduser())

    def fail(exc) -> "NoReturn":
        if isinstance(exc, SceneError):
            raise HTTPException(status_code=422,
                                detail=list(exc.diagnostics)) from exc
        raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    # -- color ----------------------------------------------------------

    @app.post("/palette")
    def palette(req: PaletteRequest):
        px = _decode_image(req.image)[..., :3]
        try:
            swatches = colorlib.extract_palette(px, count=req.count,
                                                image_id=req.image_id)
        except ValueError as exc:
            fail(exc)
        out = []
        for s in swatches:
            r, g, b = colorlib.lab_to_srgb(s.color.as_array())
            out.append({
                "lab": [s.color.L, s.color.a, s.color.b],
                "rgb": [int(r), int(g), int(b)],
                "population": s.population,
                "source_rgb": list(s.source_rgb),
                "source_xy": list(s.source_xy) if s.source_xy else None,
                "image_id": s.image_id,
            })
        return {"swatches": out}

    @app.post("/colormap/sample")
    def colormap_sample(req: ColormapSampleRequest):
        try:
            cmap = colorlib.import_colormap_xml(req.xml.encode())
            lab = cmap.sample(np.asarray(req.positions, dtype=np.float64))
        except (ValueError, SceneError) as exc:
            fail(exc)
        rgb = colorlib.lab_to_srgb(lab)
        return {
            "name": cmap.name,
            "lab": np.asarray(lab).tolist(),
            "rgb": np.asarray(rgb).tolist(),
        }

    @app.post("/colormap/export")
    def colormap_export(req: ColormapExportRequest):
        try:
            colors = tuple(colorlib.LabColor.from_srgb(c) for c in req.rgb)
            cmap = colorlib.ColorMap(name=req.name,
                                     positions=tuple(req.positions),
                                     colors=colors)
            data = colorlib.export_colormap(cmap, req.format)
        except ValueError as exc:
            fail(exc)
        if req.format == "xml":
            return {"xml": data.decode()}
        return {"png": base64.b64encode(data).decode("ascii")}

    # -- textures ---------------------------------------------------------

    @app.post("/texture/normalmap")
    def texture_normalmap(req: NormalMapRequest):
        px = _decode_image(req.image)
        try:
            nm = make_normal_map(TextureImage(px), strength=req.strength)
        except ValueError as exc:
            fail(exc)
        return {"normal_map": _png_b64(nm.pixels)}

    @app.post("/texture/tile")
    def texture_tile(req: TileRequest):
        px = _decode_image(req.image)
        try:
            tiled = tile_preview(TextureImage(px), req.columns, req.rows)
        except ValueError as exc:
            fail(exc)
        return {"image": _png_b64(tiled.pixels)}

    @app.post("/synthesize")
    def synthesize_tex(req: SynthesizeRequest):
        from .linetex import SynthesisParams, synthesize
        px = _decode_image(req.image)
        params = SynthesisParams(
            jump_probability=req.jump_probability, min_quality=req.min_quality,
            min_jump_size=req.min_jump_size, output_height=req.output_height,
            seed=req.seed)
        try:
            result = synthesize(TextureImage(px), params)
        except ValueError as exc:
            fail(exc)
        return {"image": _png_b64(result.image.pixels),
                "sidecar": result.sidecar()}

    # -- meshes -----------------------------------------------------------

    def _mesh_from_b64(obj_b64: str):
        from .mesh import load_obj
        try:
            text = base64.b64decode(obj_b64)
        except Exception:
            raise HTTPException(status_code=422, detail="obj is not base64")
        with tempfile.NamedTemporaryFile(suffix=".obj", delete=False) as fh:
            fh.write(text)
            tmp = fh.name
        try:
            return load_obj(tmp)
        except ValueError as exc:
            fail(exc)
        finally:
            os.unlink(tmp)

    def _mesh_to_b64(mesh) -> str:
        from .mesh import save_obj
        with tempfile.NamedTemporaryFile(suffix=".obj", delete=False) as fh:
            tmp = fh.name
        try:
            save_obj(mesh, tmp)
            return base64.b64encode(Path(tmp).read_bytes()).decode("ascii")
        finally:
            os.unlink(tmp)

    @app.post("/mesh/orient")
    def mesh_orient(req: OrientRequest):
        from .mesh import orient_mesh, orientation_quaternion
        mesh = _mesh_from_b64(req.obj)
        try:
            oriented = orient_mesh(mesh, np.asarray(req.forward),
                                   np.asarray(req.up))
            quat = orientation_quaternion(np.asarray(req.forward),
                                          np.asarray(req.up))
        except ValueError as exc:
            fail(exc)
        return {"obj": _mesh_to_b64(oriented),
                "quaternion": [float(q) for q in quat],
                "vertex_count": oriented.vertex_count}

    @app.post("/mesh/lod")
    def mesh_lod(req: LodRequest):
        from .bake import build_lod_chain
        mesh = _mesh_from_b64(req.obj)
        try:
            asset = build_lod_chain(mesh, targets=tuple(req.targets),
                                    bake_resolution=req.bake_resolution,
                                    name=req.name)
        except ValueError as exc:
            fail(exc)
        lods = []
        for lod in asset.lods:
            lods.append({
                "obj": _mesh_to_b64(lod.mesh),
                "normal_map": _png_b64(lod.normal_map.pixels),
                "base_vertex_count": lod.base_vertex_count,
            })
        return {"name": asset.name, "lods": lods}

    # -- sampling -----------------------------------------------------------

    @app.post("/sample")
    def sample_points(req: SampleRequest):
        from .sampling import (sample_density_mh, sample_random,
                               sample_regular, scalar_field)
        from .scene import VoxelGrid
        if (req.obj is None) == (req.volume is None):
            raise HTTPException(status_code=422,
                                detail="provide exactly one of obj or volume")
        if req.obj is not None:
            geom = _mesh_from_b64(req.obj)
            values = None
        else:
            vol = req.volume
            try:
                values = np.asarray(vol["values"], dtype=np.float64)
                geom = VoxelGrid(values, origin=vol.get("origin"),
                                 spacing=vol.get("spacing"))
            except (KeyError, ValueError) as exc:
                fail(exc)
            values = geom.values.ravel()
        try:
            if req.method == "regular":
                spacing = req.spacing
                if spacing is None:
                    lo, hi = geom.bbox()
                    spacing = float(np.max(np.asarray(hi) - np.asarray(lo))) / 10.0
                result = sample_regular(geom, spacing)
            elif req.method == "random":
                result = sample_random(geom, req.count, seed=req.seed)
            elif req.method == "density":
                result = sample_density_mh(scalar_field(geom, values),
                                           req.count, seed=req.seed)
            else:
                raise HTTPException(status_code=422,
                                    detail=f"unknown method {req.method!r}")
        except (ValueError, SceneError) as exc:
            fail(exc)
        return {"positions": result.positions.tolist(),
                "method": result.method, "count": result.count}

    # -- asset library ------------------------------------------------------

    @app.get("/assets")
    def assets_list(kind: str | None = None, name: str | None = None,
                    tag: str | None = None):
        records = library.query(kind=kind, name=name, tag=tag)
        return {"assets": [r.to_dict() for r in records]}

    @app.post("/assets")
    def assets_register(req: RegisterRequest):
        try:
            files = {rel: base64.b64decode(b64) for rel, b64 in req.files.items()}
        except Exception:
            raise HTTPException(status_code=422, detail="files are not base64")
        try:
            asset_id = library.register(req.kind, req.name, files,
                                        tags=tuple(req.tags), source=req.source)
        except LibraryError as exc:
            fail(exc)
        return {"id": asset_id}

    @app.get("/assets/{asset_id}")
    def assets_get(asset_id: str):
        try:
            rec = library.get(asset_id)
        except LibraryError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return rec.to_dict()

    @app.get("/assets/{asset_id}/files/{rel:path}")
    def assets_file(asset_id: str, rel: str):
        try:
            data = library.read_file(asset_id, rel)
        except LibraryError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return Response(content=data, media_type="application/octet-stream")

    # -- rendering ------------------------------------------------------------

    @app.post("/render")
    def render(req: RenderRequest):
        import dataclasses

        from .render import Camera, render_scene
        from .scene import load_scene
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            doc = dict(req.scene)
            inline = doc.pop("inline_files", {})
            try:
                for rel, b64 in inline.items():
                    target = tmp / rel
                    if not target.resolve().is_relative_to(tmp.resolve()):
                        raise HTTPException(status_code=422,
                                            detail=f"bad inline path {rel!r}")
                    target.parent.mkdir(parents=True, exist_ok=True)
                    target.write_bytes(base64.b64decode(b64))
            except HTTPException:
                raise
            except Exception:
                raise HTTPException(status_code=422,
                                    detail="inline_files are not base64")
            scene_path = tmp / "scene.json"
            scene_path.write_text(json.dumps(doc))
            try:
                sc = load_scene(scene_path)
                camera = Camera.from_dict(sc.camera) if sc.camera else None
                if camera is not None and (req.width or req.height):
                    camera = dataclasses.replace(
                        camera, width=req.width or camera.width,
                        height=req.height or camera.height)
                result = render_scene(sc, camera=camera, workers=req.workers)
            except (SceneError, ValueError) as exc:
                fail(exc)
        headers = {
            "X-Layer-Coverage": json.dumps(result.coverage),
            "X-Layer-Order": json.dumps(list(result.layer_order)),
        }
        return Response(content=result.png_bytes(), media_type="image/png",
                        headers=headers)

    return app
