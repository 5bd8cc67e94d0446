"""Command line front end.

Exit codes: 0 on success, 1 when an operation fails on its input
(bad mesh, unreadable scene, unreachable target), 2 for usage errors.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import color as colorlib
from .library import AssetLibrary, LibraryError, register_path
from .mesh import load_obj, save_obj
from .scene import SceneError
from .texture import TextureImage, make_normal_map


def _fail(message) -> "NoReturn":
    if isinstance(message, SceneError) and len(message.diagnostics) > 1:
        for line in message.diagnostics:
            click.echo(f"error: {line}", err=True)
    else:
        click.echo(f"error: {message}", err=True)
    sys.exit(1)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SceneError, LibraryError, ValueError, OSError) as exc:
            _fail(exc)
    return wrapper


def _parse_vec(text: str, what: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.BadParameter(f"{what} must be three comma-separated numbers")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise click.BadParameter(f"{what} must be numeric") from None


@click.group()
@click.version_option(package_name="craftvis")
def main():
    """Turn digitized craft materials into reusable visualization assets."""


# ---------------------------------------------------------------------------
# Color


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("-n", "--count", default=6, show_default=True, help="Swatch count.")
@click.option("--json", "as_json", is_flag=True, help="Emit JSON to stdout.")
@handles_errors
def palette(image, count, as_json):
    """Extract the dominant colors of IMAGE."""
    from PIL import Image
    px = np.asarray(Image.open(image).convert("RGB"))
    swatches = colorlib.extract_palette(px, count=count, image_id=Path(image).name)
    if as_json:
        rows = []
        for s in swatches:
            r, g, b = colorlib.lab_to_srgb(s.color.as_array())
            rows.append({
                "lab": [s.color.L, s.color.a, s.color.b],
                "rgb": [int(r), int(g), int(b)],
                "population": s.population,
                "source_rgb": list(s.source_rgb),
                "source_xy": list(s.source_xy) if s.source_xy else None,
                "image_id": s.image_id,
            })
        click.echo(json.dumps(rows, indent=2))
        return
    for s in swatches:
        r, g, b = colorlib.lab_to_srgb(s.color.as_array())
        click.echo(f"#{r:02x}{g:02x}{b:02x}  L={s.color.L:7.2f} "
                   f"a={s.color.a:7.2f} b={s.color.b:7.2f}  "
                   f"population={s.population}")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("-n", "--count", default=6, show_default=True)
@click.option("--name", default=None, help="Colormap name (default: image stem).")
@click.option("--strip", type=click.Path(dir_okay=False),
              help="Also write a PNG preview strip here.")
@handles_errors
def colormap(image, output, count, name, strip):
    """Build a colormap from IMAGE's palette and write it as XML."""
    from PIL import Image
    px = np.asarray(Image.open(image).convert("RGB"))
    swatches = colorlib.extract_palette(px, count=count, image_id=Path(image).name)
    cmap = colorlib.colormap_from_swatches(name or Path(image).stem, swatches)
    Path(output).write_bytes(colorlib.export_colormap(cmap, "xml"))
    click.echo(f"wrote {output} ({len(swatches)} control points)")
    if strip:
        Path(strip).write_bytes(colorlib.export_colormap(cmap, "png-strip"))
        click.echo(f"wrote {strip}")


# ---------------------------------------------------------------------------
# Textures


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--strength", default=2.0, show_default=True,
              help="Gradient-to-slope scale.")
@handles_errors
def normalmap(image, output, strength):
    """Derive a tangent-space normal map from IMAGE's luminance."""
    nm = make_normal_map(TextureImage.load(image), strength=strength)
    nm.save(output)
    click.echo(f"wrote {output} ({nm.pixels.shape[1]}x{nm.pixels.shape[0]})")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--height", default=2048, show_default=True,
              help="Output strip height in rows.")
@click.option("--seed", default=0, show_default=True)
@click.option("--jump-probability", default=0.1, show_default=True)
@click.option("--min-quality", default=10.0, show_default=True)
@click.option("--min-jump-size", default=1, show_default=True)
@handles_errors
def synthesize(image, output, height, seed, jump_probability, min_quality,
               min_jump_size):
    """Grow a seamless vertical strip from a short line-texture swatch."""
    from .linetex import SynthesisParams, save_synthesis
    from .linetex import synthesize as synth
    params = SynthesisParams(
        jump_probability=jump_probability, min_quality=min_quality,
        min_jump_size=min_jump_size, output_height=height, seed=seed)
    result = synth(TextureImage.load(image), params)
    sidecar = save_synthesis(result, output)
    click.echo(f"wrote {output} ({height} rows, loop starts at walked row "
               f"{result.loop_start})")
    click.echo(f"wrote {sidecar}")


# ---------------------------------------------------------------------------
# Meshes


@main.group()
def mesh():
    """Mesh preparation: orient, decimate, LOD chains."""


@mesh.command()
@click.argument("obj", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--forward", required=True,
              help="Direction to map onto +Z, as 'x,y,z'.")
@click.option("--up", default="0,1,0", show_default=True)
@handles_errors
def orient(obj, output, forward, up):
    """Recenter OBJ and rotate a chosen direction onto +Z."""
    from .mesh import orient_mesh
    oriented = orient_mesh(load_obj(obj), _parse_vec(forward, "--forward"),
                           _parse_vec(up, "--up"))
    save_obj(oriented, output)
    click.echo(f"wrote {output}")


@mesh.command()
@click.argument("obj", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--target", required=True, type=int, help="Vertex count to reach.")
@handles_errors
def decimate(obj, output, target):
    """Reduce OBJ to roughly --target vertices."""
    from .decimate import decimate as run
    src = load_obj(obj)
    out, info = run(src, target, return_info=True)
    save_obj(out, output)
    click.echo(f"wrote {output} ({src.vertex_count} -> {out.vertex_count} vertices, "
               f"{info['collapses']} collapses)")


@mesh.command()
@click.argument("obj", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "out_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--targets", default="5000,500,100", show_default=True,
              help="Comma-separated vertex targets, largest first.")
@click.option("--resolution", default=1024, show_default=True,
              help="Normal map resolution.")
@click.option("--name", default=None)
@handles_errors
def lod(obj, out_dir, targets, resolution, name):
    """Build a LOD chain with baked normal maps from OBJ."""
    from .bake import build_lod_chain, save_glyph_asset
    try:
        levels = tuple(int(t) for t in targets.split(","))
    except ValueError:
        raise click.BadParameter("--targets must be comma-separated integers")
    src = load_obj(obj)
    asset = build_lod_chain(src, targets=levels, bake_resolution=resolution,
                            name=name or Path(obj).stem)
    manifest = save_glyph_asset(asset, out_dir)
    counts = ", ".join(str(l.base_vertex_count) for l in asset.lods)
    click.echo(f"wrote {manifest} (LOD vertex counts: {counts})")


# ---------------------------------------------------------------------------
# Sampling


@main.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default="obj", show_default=True,
              type=click.Choice(["obj", "volume"]),
              help="What SOURCE is: a mesh OBJ or a volume JSON header.")
@click.option("--method", default="regular", show_default=True,
              type=click.Choice(["regular", "random", "density"]))
@click.option("--spacing", type=float, help="Lattice spacing for regular sampling.")
@click.option("--count", default=100, show_default=True,
              help="Sample count for random or density sampling.")
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--cache", type=click.Path(dir_okay=False),
              help="Also write a binary sample cache (.npz).")
@handles_errors
def sample(source, fmt, method, spacing, count, seed, output, cache):
    """Sample seed points over a mesh or volume, written as x,y,z CSV."""
    from .sampling import (export_sample_csv, sample_density_mh, sample_random,
                           sample_regular, save_sample_set, scalar_field)
    from .scene import load_data_object
    data = load_data_object(source, fmt)
    geom = data.geometry
    if method == "regular":
        if spacing is None:
            lo, hi = geom.bbox()
            spacing = float(np.max(np.asarray(hi) - np.asarray(lo))) / 10.0
        result = sample_regular(geom, spacing)
    elif method == "random":
        result = sample_random(geom, count, seed=seed)
    else:
        vals = next(iter(data.scalars.values())) if data.scalars else None
        result = sample_density_mh(scalar_field(geom, vals), count, seed=seed)
    export_sample_csv(result, output)
    click.echo(f"wrote {output} ({result.count} points, method={method})")
    if cache:
        save_sample_set(result, cache)
        click.echo(f"wrote {cache}")


# ---------------------------------------------------------------------------
# Asset library


def _library(root) -> AssetLibrary:
    import os
    root = root or os.environ.get("CRAFTVIS_LIBRARY", "~/.craftvis/library")
    return AssetLibrary(Path(root).expanduser())


@main.group()
def asset():
    """Content-addressed asset library."""


@asset.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--kind", required=True,
              type=click.Choice(["colormap", "texture", "textureSet",
                                 "lineTexture", "normalMap", "alphaMask",
                                 "glyph", "mesh"]))
@click.option("--name", required=True)
@click.option("--tag", "tags", multiple=True)
@click.option("--source", default=None, help="Free-form provenance note.")
@click.option("--root", default=None, help="Library root directory.")
@handles_errors
def register(path, kind, name, tags, source, root):
    """Store a file or directory as a library asset; prints its id."""
    lib = _library(root)
    asset_id = register_path(lib, kind, name, path, tags=tags, source=source)
    click.echo(asset_id)


@asset.command()
@click.option("--kind", default=None)
@click.option("--name", default=None, help="Substring filter.")
@click.option("--tag", default=None)
@click.option("--root", default=None)
@click.option("--json", "as_json", is_flag=True)
@handles_errors
def ls(kind, name, tag, root, as_json):
    """List library assets."""
    lib = _library(root)
    records = lib.query(kind=kind, name=name, tag=tag)
    if as_json:
        click.echo(json.dumps([r.to_dict() for r in records], indent=2))
        return
    for r in records:
        tag_note = f" [{','.join(r.tags)}]" if r.tags else ""
        click.echo(f"{r.asset_id[:12]}  {r.kind:<12} {r.name}{tag_note}")
    if not records:
        click.echo("(no assets)", err=True)


# ---------------------------------------------------------------------------
# Rendering and serving


@main.command()
@click.argument("scene_arg", required=False, metavar="[SCENE]",
                type=click.Path(exists=True, dir_okay=False))
@click.option("--scene", "scene_opt", type=click.Path(exists=True, dir_okay=False),
              help="Scene document (alternative to the positional argument).")
@click.option("-o", "--out", "--output", "output", required=True,
              type=click.Path(dir_okay=False))
@click.option("--camera", "camera_path", type=click.Path(exists=True, dir_okay=False),
              help="Camera JSON file overriding the scene camera.")
@click.option("--seed", default=None, type=int, help="Override the scene seed.")
@click.option("--size", default=None, help="Output size as WxH, e.g. 1024x768.")
@click.option("--width", default=None, type=int)
@click.option("--height", default=None, type=int)
@click.option("--workers", default=1, show_default=True)
@click.option("--depth", "depth_path", type=click.Path(dir_okay=False),
              help="Also dump the depth buffer (raw float32 + JSON header).")
@click.option("--coverage", is_flag=True, help="Print per-layer pixel coverage.")
@handles_errors
def render(scene_arg, scene_opt, output, camera_path, seed, size, width, height,
           workers, depth_path, coverage):
    """Render a scene document to a PNG."""
    import dataclasses

    from .render import Camera, frame_scene_camera, render_scene, save_depth, \
        save_render
    from .scene import load_scene
    scene = scene_arg or scene_opt
    if scene is None:
        raise click.UsageError("provide a scene document (positional or --scene)")
    if size is not None:
        try:
            width, height = (int(v) for v in size.lower().split("x"))
        except ValueError:
            raise click.BadParameter("--size must look like 1024x768")
    sc = load_scene(scene)
    if seed is not None:
        sc.seed = seed
    camera = None
    if camera_path is not None:
        camera = Camera.from_dict(json.loads(Path(camera_path).read_text()))
    elif sc.camera is not None:
        camera = Camera.from_dict(sc.camera)
    if width or height:
        if camera is None:
            los, his = zip(*(d.bbox() for d in sc.data.values()))
            camera = frame_scene_camera(np.min(np.stack(los), axis=0),
                                        np.max(np.stack(his), axis=0))
        camera = dataclasses.replace(camera, width=width or camera.width,
                                     height=height or camera.height)
    result = render_scene(sc, camera=camera, workers=workers)
    save_render(result, output)
    click.echo(f"wrote {output}")
    if depth_path:
        header = save_depth(result, depth_path)
        click.echo(f"wrote {depth_path} and {header}")
    if coverage:
        for layer_id in result.layer_order:
            click.echo(f"{layer_id}: {result.coverage[layer_id]} px")


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--full", is_flag=True, help="Larger assets (slower to build).")
@handles_errors
def demo(out_dir, full):
    """Write a small self-contained demo scene into OUT_DIR."""
    from .fixtures import write_demo_scene
    path = write_demo_scene(out_dir, compact=not full)
    click.echo(f"wrote {path}")
    click.echo(f"render it with: craftvis render {path} -o demo.png")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8775, show_default=True)
@click.option("--library", "library_root", default=None,
              help="Asset library root (default: CRAFTVIS_LIBRARY or ~/.craftvis).")
@handles_errors
def serve(host, port, library_root):
    """Run the HTTP service used by interactive front ends."""
    import uvicorn

    from .server import create_app
    app = create_app(library_root=library_root)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
