"""Regenerate the bundled demo scene and the small test fixture images.

Usage:
    python3 scripts/make_fixtures.py --out build/demo [--full]

Writes a self-contained scene directory (data/, assets/, scene.json) plus a
few loose fixture images handy for poking at the CLI by hand.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

from craftvis.fixtures import (color_blocks, noise_texture, stripe_texture,
                               write_demo_scene)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="build/demo", type=Path)
    ap.add_argument("--full", action="store_true",
                    help="larger assets; slower but prettier")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for the loose fixture images")
    args = ap.parse_args()

    scene_path = write_demo_scene(args.out, compact=not args.full)
    print(f"wrote {scene_path}")

    loose = args.out / "fixtures"
    loose.mkdir(parents=True, exist_ok=True)
    rng_seed = args.seed
    Image.fromarray(color_blocks(
        [(255, 0, 0), (0, 255, 0), (0, 0, 255)], block=32)).save(
        loose / "rgb_blocks.png")
    Image.fromarray(noise_texture(256, 256, seed=rng_seed)).save(
        loose / "noise.png")
    Image.fromarray(stripe_texture(256, 24, seed=rng_seed)).save(
        loose / "stripes.png")
    print(f"wrote {loose}/rgb_blocks.png, noise.png, stripes.png")
    print(f"try: craftvis render {scene_path} -o demo.png --size 800x600")


if __name__ == "__main__":
    main()
