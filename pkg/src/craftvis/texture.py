"""Texture images, editing helpers, normal maps and texture sets."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geom import normalize_rows

# Rec.709 luma weights, applied to the stored (gamma-encoded) channels.
_LUMA = np.array([0.2126, 0.7152, 0.0722])

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)


@dataclass(frozen=True)
class TextureImage:
    """An RGBA raster, optionally annotated with a physical scale.

    ``physical_scale`` is stored units per pixel (e.g. mm/px from a scan)
    and is carried along but never interpreted by the math here.
    """

    pixels: np.ndarray = field(repr=False)
    physical_scale: float | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[-1] not in (3, 4):
            raise ValueError(f"expected (H, W, 3|4) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("texture must be at least 1x1")
        if px.dtype != np.uint8:
            px = np.clip(np.round(np.asarray(px, dtype=np.float64)), 0, 255).astype(np.uint8)
        if px.shape[-1] == 3:
            alpha = np.full(px.shape[:2] + (1,), 255, dtype=np.uint8)
            px = np.concatenate([px, alpha], axis=-1)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[..., :3]

    @staticmethod
    def load(path) -> "TextureImage":
        return TextureImage(np.asarray(Image.open(path).convert("RGBA")))

    def save(self, path) -> None:
        Image.fromarray(self.pixels).save(path)

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


def crop(image: TextureImage, x: int, y: int, width: int, height: int) -> TextureImage:
    """Crop a rectangle out of ``image``; the rect must lie fully inside."""
    if width < 1 or height < 1:
        raise ValueError(f"crop size must be positive, got {width}x{height}")
    if x < 0 or y < 0 or x + width > image.width or y + height > image.height:
        raise ValueError(
            f"crop rect ({x},{y},{width},{height}) exceeds image bounds "
            f"{image.width}x{image.height}")
    return TextureImage(image.pixels[y:y + height, x:x + width].copy(),
                        physical_scale=image.physical_scale)


def tile_preview(image: TextureImage, nx: int, ny: int) -> TextureImage:
    """Repeat the image nx times horizontally and ny times vertically."""
    if nx < 1 or ny < 1:
        raise ValueError("tile counts must be >= 1")
    return TextureImage(np.tile(image.pixels, (ny, nx, 1)),
                        physical_scale=image.physical_scale)


def luminance(image: TextureImage) -> np.ndarray:
    """Rec.709 luma of the stored channels, as floats in [0, 1]."""
    return (image.rgb.astype(np.float64) / 255.0) @ _LUMA


def _sobel(height_field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (correlation, /8 scale) with clamp-to-edge."""
    padded = np.pad(height_field, 1, mode="edge")
    gx = np.zeros_like(height_field)
    gy = np.zeros_like(height_field)
    h, w = height_field.shape
    for dy in range(3):
        for dx in range(3):
            window = padded[dy:dy + h, dx:dx + w]
            if _SOBEL_X[dy, dx]:
                gx += _SOBEL_X[dy, dx] * window
            if _SOBEL_Y[dy, dx]:
                gy += _SOBEL_Y[dy, dx] * window
    return gx / 8.0, gy / 8.0


@dataclass(frozen=True)
class NormalMap:
    """Tangent-space normals encoded as an (H, W, 3) uint8 raster."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[-1] != 3 or px.dtype != np.uint8:
            raise ValueError("normal map wants (H, W, 3) uint8 pixels")
        object.__setattr__(self, "pixels", px)

    @staticmethod
    def encode(normals: np.ndarray) -> "NormalMap":
        """Pack unit vectors with c = round((n + 1) / 2 * 255)."""
        n = np.asarray(normals, dtype=np.float64)
        return NormalMap(np.round((n + 1.0) / 2.0 * 255.0).clip(0, 255).astype(np.uint8))

    def decode(self) -> np.ndarray:
        """Unit vectors recovered from the encoding (renormalized)."""
        n = self.pixels.astype(np.float64) / 255.0 * 2.0 - 1.0
        return normalize_rows(n)

    @staticmethod
    def load(path) -> "NormalMap":
        return NormalMap(np.asarray(Image.open(path).convert("RGB")))

    def save(self, path) -> None:
        Image.fromarray(self.pixels).save(path)

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


def make_normal_map(image: TextureImage, strength: float = 2.0) -> NormalMap:
    """Derive a tangent-space normal map from image luminance.

    Treats Rec.709 luma as a height field, takes 3x3 Sobel gradients with
    clamp-to-edge boundaries, and forms
    ``normalize(-strength * gx, -strength * gy, 1)`` per texel.  A flat
    image therefore encodes to the constant (128, 128, 255).
    """
    gx, gy = _sobel(luminance(image))
    n = np.stack([-strength * gx, -strength * gy, np.ones_like(gx)], axis=-1)
    return NormalMap.encode(normalize_rows(n))


def _resample_bilinear(image: TextureImage, width: int, height: int) -> TextureImage:
    pil = Image.fromarray(image.pixels).resize((width, height), Image.BILINEAR)
    return TextureImage(np.asarray(pil), physical_scale=image.physical_scale)


@dataclass(frozen=True)
class TextureSet:
    """An ordered run of same-sized textures bound to one visual variable.

    Entry order is meaningful: entry i colors value bin i when the set is
    bound to a normalized variable.  Optional parallel normal maps and
    single-channel alpha masks must match the color entries in count and
    size.
    """

    name: str
    images: tuple[TextureImage, ...]
    normal_maps: tuple[NormalMap, ...] | None = None
    alpha_masks: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if not self.images:
            raise ValueError("a texture set needs at least one image")
        w, h = self.images[0].width, self.images[0].height
        for i, img in enumerate(self.images):
            if (img.width, img.height) != (w, h):
                raise ValueError(
                    f"entry {i} is {img.width}x{img.height}, expected {w}x{h}")
        if self.normal_maps is not None:
            if len(self.normal_maps) != len(self.images):
                raise ValueError("normal map count differs from image count")
            for i, nm in enumerate(self.normal_maps):
                if nm.pixels.shape[:2] != (h, w):
                    raise ValueError(f"normal map {i} size mismatch")
        if self.alpha_masks is not None:
            if len(self.alpha_masks) != len(self.images):
                raise ValueError("alpha mask count differs from image count")
            masks = []
            for i, m in enumerate(self.alpha_masks):
                m = np.asarray(m)
                if m.shape != (h, w):
                    raise ValueError(f"alpha mask {i} size mismatch")
                masks.append(m.astype(np.uint8))
            object.__setattr__(self, "alpha_masks", tuple(masks))

    @property
    def size(self) -> tuple[int, int]:
        return self.images[0].width, self.images[0].height

    def __len__(self) -> int:
        return len(self.images)


def build_texture_set(images, name: str = "set", normal_strength: float | None = None,
                      alpha_masks=None, resample: bool = False) -> TextureSet:
    """Assemble a TextureSet from texture images.

    Mixed sizes are an error by default; with ``resample=True`` smaller
    entries are bilinearly upsampled to the largest entry (ties broken by
    width).  ``normal_strength`` derives a normal map per entry.
    """
    images = [img if isinstance(img, TextureImage) else TextureImage(img) for img in images]
    sizes = {(im.width, im.height) for im in images}
    if len(sizes) > 1:
        if not resample:
            listing = ", ".join(f"{w}x{h}" for w, h in sorted(sizes))
            raise ValueError(f"texture set entries differ in size ({listing}); "
                             "pass resample=True to upsample to the largest")
        w, h = max(sizes, key=lambda s: (s[0] * s[1], s[0]))
        images = [_resample_bilinear(im, w, h) if (im.width, im.height) != (w, h) else im
                  for im in images]
        if alpha_masks is not None:
            alpha_masks = [
                np.asarray(Image.fromarray(np.asarray(m, dtype=np.uint8)).resize(
                    (w, h), Image.BILINEAR))
                if np.asarray(m).shape != (h, w) else np.asarray(m, dtype=np.uint8)
                for m in alpha_masks]
    normal_maps = None
    if normal_strength is not None:
        normal_maps = tuple(make_normal_map(im, strength=normal_strength) for im in images)
    masks = tuple(alpha_masks) if alpha_masks is not None else None
    return TextureSet(name=name, images=tuple(images), normal_maps=normal_maps,
                      alpha_masks=masks)


def save_texture_set(ts: TextureSet, directory) -> Path:
    """Write a texture set as PNG files plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"name": ts.name, "images": [], "normal_maps": None, "alpha_masks": None}
    for i, img in enumerate(ts.images):
        rel = f"entry{i}.png"
        img.save(directory / rel)
        manifest["images"].append(rel)
    if ts.normal_maps is not None:
        manifest["normal_maps"] = []
        for i, nm in enumerate(ts.normal_maps):
            rel = f"entry{i}_normal.png"
            nm.save(directory / rel)
            manifest["normal_maps"].append(rel)
    if ts.alpha_masks is not None:
        manifest["alpha_masks"] = []
        for i, m in enumerate(ts.alpha_masks):
            rel = f"entry{i}_alpha.png"
            Image.fromarray(m, mode="L").save(directory / rel)
            manifest["alpha_masks"].append(rel)
    path = directory / "textureset.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_texture_set(manifest_path) -> TextureSet:
    """Load a texture set from its JSON manifest."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    images = tuple(TextureImage.load(base / rel) for rel in manifest["images"])
    normal_maps = None
    if manifest.get("normal_maps"):
        normal_maps = tuple(NormalMap.load(base / rel) for rel in manifest["normal_maps"])
    alpha_masks = None
    if manifest.get("alpha_masks"):
        alpha_masks = tuple(
            np.asarray(Image.open(base / rel).convert("L")) for rel in manifest["alpha_masks"])
    return TextureSet(name=manifest.get("name", manifest_path.parent.name),
                      images=images, normal_maps=normal_maps, alpha_masks=alpha_masks)
