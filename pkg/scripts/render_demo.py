"""Render the demo scene and report per-layer coverage and timing.

Usage:
    python3 scripts/render_demo.py --out frame.png [--size 1024x768]
                                   [--workers 4] [--scene path/to/scene.json]

Without --scene, a compact demo scene is built in a temp directory first.
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from craftvis.fixtures import write_demo_scene
from craftvis.render import frame_scene_camera, render_scene, save_depth, \
    save_render
from craftvis.scene import load_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scene", type=Path, default=None)
    ap.add_argument("--out", type=Path, default=Path("frame.png"))
    ap.add_argument("--size", default="800x600")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--depth", type=Path, default=None,
                    help="also dump the float32 depth buffer here")
    ap.add_argument("--full", action="store_true",
                    help="build the larger demo variant (ignored with --scene)")
    args = ap.parse_args()

    width, height = (int(v) for v in args.size.lower().split("x"))

    tmp = None
    scene_path = args.scene
    if scene_path is None:
        tmp = tempfile.TemporaryDirectory()
        t0 = time.perf_counter()
        scene_path = write_demo_scene(tmp.name, compact=not args.full)
        print(f"built demo scene in {time.perf_counter() - t0:.1f}s")

    scene = load_scene(scene_path)
    los, his = zip(*(d.bbox() for d in scene.data.values()))
    camera = frame_scene_camera(np.min(np.stack(los), axis=0),
                                np.max(np.stack(his), axis=0),
                                width=width, height=height)

    t0 = time.perf_counter()
    result = render_scene(scene, camera, workers=args.workers)
    dt = time.perf_counter() - t0
    save_render(result, args.out)
    print(f"rendered {width}x{height} with {args.workers} workers "
          f"in {dt:.2f}s -> {args.out}")
    for layer_id in result.layer_order:
        share = result.coverage[layer_id] / (width * height)
        print(f"  {layer_id:<10} {result.coverage[layer_id]:>8} px "
              f"({share:6.1%})")
    if args.depth is not None:
        header = save_depth(result, args.depth)
        print(f"wrote {args.depth} and {header}")
    if tmp is not None:
        tmp.cleanup()


if __name__ == "__main__":
    main()
