"""Color handling: sRGB <-> CIELAB, palette extraction, colormaps.

All perceptual math happens in CIELAB under the D65 illuminant.  sRGB is
only ever the storage / display encoding.  Arrays are numpy ``float64``
with color channels on the last axis; 8-bit images are ``uint8``.

References used while writing this module: IEC 61966-2-1 for the sRGB
transfer function and CIE 15:2004 for the Lab equations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from xml.etree import ElementTree

import numpy as np
from PIL import Image

# D65 reference white and the standard Lab thresholds.
_REF_WHITE = np.array([0.95047, 1.0, 1.08883])
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0

# Linear sRGB -> XYZ (D65), IEC 61966-2-1.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)


def _srgb_decode(c: np.ndarray) -> np.ndarray:
    """Gamma-expand sRGB values in [0, 1] to linear light."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_encode(c: np.ndarray) -> np.ndarray:
    """Gamma-compress linear light in [0, 1] to sRGB."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.maximum(c, 0.0) ** (1 / 2.4) - 0.055)


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert sRGB to CIELAB (D65).

    Parameters
    ----------
    rgb : array_like, shape (..., 3)
        8-bit integers in [0, 255] or floats in [0, 1].

    Returns
    -------
    ndarray, shape (..., 3)
        L in [0, 100], a/b roughly in [-128, 127].
    """
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing axis of size 3, got shape {rgb.shape}")
    if np.issubdtype(rgb.dtype, np.integer):
        rgb = rgb.astype(np.float64) / 255.0
    else:
        rgb = rgb.astype(np.float64)
    xyz = _srgb_decode(rgb) @ _RGB_TO_XYZ.T
    r = xyz / _REF_WHITE
    f = np.where(r > _EPS, np.cbrt(r), (_KAPPA * r + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Convert CIELAB (D65) to 8-bit sRGB, clamping out-of-gamut channels."""
    lab = np.asarray(lab, dtype=np.float64)
    if lab.shape[-1] != 3:
        raise ValueError(f"expected trailing axis of size 3, got shape {lab.shape}")
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    f3 = f ** 3
    r = np.where(f3 > _EPS, f3, (116.0 * f - 16.0) / _KAPPA)
    # The L branch of the inverse uses L directly, not fy**3.
    L = lab[..., 0]
    ry = np.where(L > _KAPPA * _EPS, ((L + 16.0) / 116.0) ** 3, L / _KAPPA)
    r = np.concatenate([r[..., :1], ry[..., None], r[..., 2:]], axis=-1)
    xyz = r * _REF_WHITE
    lin = np.clip(xyz @ _XYZ_TO_RGB.T, 0.0, 1.0)
    srgb = np.clip(_srgb_encode(lin), 0.0, 1.0)
    return np.round(srgb * 255.0).astype(np.uint8)


def delta_e76(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """CIE76 color difference: Euclidean distance in Lab."""
    d = np.asarray(lab1, dtype=np.float64) - np.asarray(lab2, dtype=np.float64)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class LabColor:
    """A single CIELAB color."""

    L: float
    a: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.a, self.b])

    @staticmethod
    def from_array(arr) -> "LabColor":
        L, a, b = (float(v) for v in np.asarray(arr, dtype=np.float64))
        return LabColor(L, a, b)

    @staticmethod
    def from_srgb(rgb) -> "LabColor":
        return LabColor.from_array(srgb_to_lab(np.asarray(rgb)))

    def to_srgb(self) -> tuple[int, int, int]:
        r, g, b = lab_to_srgb(self.as_array())
        return int(r), int(g), int(b)


@dataclass(frozen=True)
class Swatch:
    """A palette entry with provenance back to the source image.

    ``source_xy`` is the (x, y) pixel of the first occurrence of the
    member color nearest the cluster mean, so a UI can point at where in
    the scan a swatch came from.
    """

    color: LabColor
    population: int
    source_rgb: tuple[int, int, int]
    source_xy: tuple[int, int] | None = None
    image_id: str | None = None


def _image_pixels(image) -> np.ndarray:
    """Coerce supported inputs to an (H, W, 3) uint8 array."""
    if isinstance(image, Image.Image):
        return np.asarray(image.convert("RGB"), dtype=np.uint8)
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[-1] == 4:
        arr = arr[..., :3]
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(np.asarray(arr, dtype=np.float64)), 0, 255).astype(np.uint8)
    return arr


def extract_palette(image, count: int = 6, image_id: str | None = None) -> list[Swatch]:
    """Extract the ``count`` most prominent colors of an image.

    Modified median cut over the image's unique colors in Lab space:
    repeatedly split the box with the largest population-times-extent
    product along its longest Lab axis at the weighted median, then
    represent each box by its population-weighted mean.  Swatches come
    back ordered by descending population.  When the image has fewer
    distinct colors than ``count``, the swatch list cycles through the
    boxes so the caller always receives exactly ``count`` entries.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pixels = _image_pixels(image)
    h, w, _ = pixels.shape
    flat = pixels.reshape(-1, 3)
    uniq, inverse, counts = np.unique(flat, axis=0, return_inverse=True, return_counts=True)
    first = np.full(len(uniq), len(flat), dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(len(flat)))
    labs = srgb_to_lab(uniq)
    weights = counts.astype(np.float64)

    boxes: list[np.ndarray] = [np.arange(len(uniq))]
    while len(boxes) < count:
        best, best_score = -1, 0.0
        for i, idx in enumerate(boxes):
            if len(idx) < 2:
                continue
            ext = labs[idx].max(axis=0) - labs[idx].min(axis=0)
            extent = float(ext.max())
            if extent <= 0.0:
                continue
            score = float(weights[idx].sum()) * extent
            if score > best_score:
                best, best_score = i, score
        if best < 0:
            break
        idx = boxes[best]
        ext = labs[idx].max(axis=0) - labs[idx].min(axis=0)
        axis = int(np.argmax(ext))
        order = idx[np.argsort(labs[idx, axis], kind="stable")]
        cum = np.cumsum(weights[order])
        k = int(np.searchsorted(cum, cum[-1] / 2.0)) + 1
        k = min(max(k, 1), len(order) - 1)
        boxes[best] = order[:k]
        boxes.append(order[k:])

    entries = []
    for idx in boxes:
        wsum = weights[idx].sum()
        mean = (labs[idx] * weights[idx, None]).sum(axis=0) / wsum
        d = delta_e76(labs[idx], mean)
        rep = idx[int(np.argmin(d))]
        flat_pos = int(first[rep])
        entries.append((int(wsum), mean, rep, flat_pos))
    entries.sort(key=lambda e: -e[0])

    swatches = []
    for i in range(count):
        pop, mean, rep, flat_pos = entries[i % len(entries)]
        swatches.append(Swatch(
            color=LabColor.from_array(mean),
            population=pop,
            source_rgb=tuple(int(c) for c in uniq[rep]),
            source_xy=(flat_pos % w, flat_pos // w),
            image_id=image_id,
        ))
    return swatches


@dataclass(frozen=True)
class ColorMap:
    """An ordered set of Lab control points on [0, 1].

    Sampling interpolates piecewise-linearly between bracketing control
    points in Lab, which keeps perceptual spacing even when the sRGB
    rendering of the ramp is not linear per channel.
    """

    name: str
    positions: tuple[float, ...]
    colors: tuple[LabColor, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.positions) < 2:
            raise ValueError("a colormap needs at least 2 control points")
        if len(self.positions) != len(self.colors):
            raise ValueError("positions and colors differ in length")
        pos = np.asarray(self.positions, dtype=np.float64)
        if np.any(pos < 0.0) or np.any(pos > 1.0):
            raise ValueError("control point positions must lie in [0, 1]")
        if np.any(np.diff(pos) <= 0.0):
            raise ValueError("control point positions must be strictly increasing")

    def sample(self, t) -> np.ndarray:
        """Lab color(s) at parameter ``t`` (clamped to [0, 1])."""
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        pos = np.asarray(self.positions)
        labs = np.stack([c.as_array() for c in self.colors])
        tc = np.clip(t, pos[0], pos[-1])
        hi = np.clip(np.searchsorted(pos, tc, side="right"), 1, len(pos) - 1)
        lo = hi - 1
        span = pos[hi] - pos[lo]
        frac = (tc - pos[lo]) / span
        return labs[lo] + frac[..., None] * (labs[hi] - labs[lo])

    def sample_one(self, t: float) -> LabColor:
        return LabColor.from_array(self.sample(float(t)))


def colormap_from_swatches(name: str, swatches, positions=None) -> ColorMap:
    """Build a colormap from palette swatches, evenly spaced by default."""
    colors = tuple(s.color if isinstance(s, Swatch) else s for s in swatches)
    if positions is None:
        positions = tuple(np.linspace(0.0, 1.0, len(colors)))
    return ColorMap(name=name, positions=tuple(float(p) for p in positions), colors=colors)


def colormap_strip(cmap: ColorMap, width: int = 1024, height: int = 32) -> np.ndarray:
    """(height, width, 3) uint8 preview strip of the colormap."""
    t = np.arange(width, dtype=np.float64) / (width - 1)
    row = lab_to_srgb(cmap.sample(t))
    return np.broadcast_to(row, (height, width, 3)).copy()


def export_colormap(cmap: ColorMap, format: str = "xml") -> bytes:
    """Serialize a colormap.

    ``xml`` writes the interchange schema understood by common viz tools
    (Point elements with x/o/r/g/b attributes under a Lab-space ColorMap).
    Positions are written with ``repr`` so re-importing reproduces them
    bit for bit.  ``png-strip`` renders a 1024x32 preview image.
    """
    if format == "xml":
        lines = ["<ColorMaps>", f'<ColorMap name="{_xml_escape(cmap.name)}" space="Lab">']
        for p, c in zip(cmap.positions, cmap.colors):
            r, g, b = (int(v) for v in lab_to_srgb(c.as_array()))
            lines.append(
                f'<Point x="{p!r}" o="1" r="{r / 255.0!r}" g="{g / 255.0!r}" b="{b / 255.0!r}"/>'
            )
        lines += ["</ColorMap>", "</ColorMaps>", ""]
        return "\n".join(lines).encode("utf-8")
    if format == "png-strip":
        buf = io.BytesIO()
        Image.fromarray(colormap_strip(cmap)).save(buf, format="PNG")
        return buf.getvalue()
    raise ValueError(f"unknown colormap export format: {format!r}")


def import_colormap_xml(data) -> ColorMap:
    """Parse a colormap from the XML interchange schema."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    root = ElementTree.fromstring(data)
    node = root.find("ColorMap") if root.tag == "ColorMaps" else root
    if node is None or node.tag != "ColorMap":
        raise ValueError("no ColorMap element found")
    positions, colors = [], []
    for pt in node.findall("Point"):
        positions.append(float(pt.attrib["x"]))
        rgb = [int(round(float(pt.attrib[ch]) * 255.0)) for ch in ("r", "g", "b")]
        colors.append(LabColor.from_srgb(np.array(rgb, dtype=np.uint8)))
    return ColorMap(name=node.attrib.get("name", "imported"),
                    positions=tuple(positions), colors=tuple(colors))


def _xml_escape(s: str) -> str:
    return (s.replace("&", "&amp;").replace("<", "&lt;")
             .replace(">", "&gt;").replace('"', "&quot;"))
