"""Glyph instancing: placement transforms and screen-size LOD choice."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom import look_rotation, quat_to_matrix

LOD_PIXEL_THRESHOLDS = (64.0, 16.0)  # projected diameter cutoffs for LOD 0 / 1
WIDTH_SCALE_RANGE = (0.25, 1.75)  # lateral multiplier across a width variable


@dataclass(frozen=True)
class GlyphInstance:
    """One placed glyph: rotation, per-axis scale, translation."""

    rotation: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    position: np.ndarray = field(repr=False)
    scalar: float = 0.0  # normalized color value carried for shading


def _vector_rotation(direction: np.ndarray, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Rotation taking the glyph's +Z axis onto ``direction``."""
    norm = float(np.linalg.norm(direction))
    if norm < 1e-12:
        return np.eye(3)
    d = direction / norm
    upv = np.asarray(up, dtype=np.float64)
    if np.linalg.norm(np.cross(d, upv)) < 1e-9:
        upv = np.array([1.0, 0.0, 0.0])
    # look_rotation maps d -> +Z; the instance wants the inverse.
    return look_rotation(d, upv).T


def place_glyphs(positions, *, data_extent, glyph_extent, size_percent: float = 5.0,
                 orientations=None, orientation_mode: str = "vector",
                 width_values=None, seed: int = 0,
                 color_values=None) -> list[GlyphInstance]:
    """Compute a transform per glyph instance.

    The base scale makes the glyph's largest extent cover
    ``size_percent`` percent of the data's largest extent.  Orientation
    comes from a bound vector variable (glyph +Z turned onto the
    vector; zero vectors keep the identity), a fixed identity, or a
    seeded uniform random rotation per instance.  A width variable
    (already normalized to [0, 1]) scales the two lateral axes across
    ``WIDTH_SCALE_RANGE``.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if size_percent <= 0:
        raise ValueError("size_percent must be positive")
    data_extent = np.asarray(data_extent, dtype=np.float64)
    glyph_extent = np.asarray(glyph_extent, dtype=np.float64)
    g = float(glyph_extent.max())
    if g <= 0:
        raise ValueError("glyph has zero extent")
    d = float(data_extent.max())
    if d <= 0:
        d = 1.0
    base = (size_percent / 100.0) * d / g

    n = len(positions)
    if orientations is not None:
        orientations = np.asarray(orientations, dtype=np.float64).reshape(-1, 3)
        if len(orientations) != n:
            raise ValueError("orientations must match positions in count")
    if width_values is not None:
        width_values = np.clip(np.asarray(width_values, dtype=np.float64).reshape(-1),
                               0.0, 1.0)
        if len(width_values) != n:
            raise ValueError("width_values must match positions in count")
    if color_values is not None:
        color_values = np.asarray(color_values, dtype=np.float64).reshape(-1)
        if len(color_values) != n:
            raise ValueError("color_values must match positions in count")

    instances = []
    wlo, whi = WIDTH_SCALE_RANGE
    for i in range(n):
        if orientation_mode == "vector" and orientations is not None:
            rot = _vector_rotation(orientations[i])
        elif orientation_mode == "random":
            rng = np.random.default_rng([seed, i])
            q = rng.normal(size=4)
            rot = quat_to_matrix(q / np.linalg.norm(q))
        elif orientation_mode in ("fixed", "vector"):
            rot = np.eye(3)
        else:
            raise ValueError(f"unknown orientation mode {orientation_mode!r}")
        scale = np.full(3, base)
        if width_values is not None:
            lateral = wlo + (whi - wlo) * width_values[i]
            scale[0] *= lateral
            scale[1] *= lateral
        instances.append(GlyphInstance(
            rotation=rot, scale=scale, position=positions[i],
            scalar=float(color_values[i]) if color_values is not None else 0.0))
    return instances


def select_lod(n_lods: int, instance: GlyphInstance, glyph_radius: float,
               camera) -> int:
    """LOD index from the projected bounding-sphere diameter in pixels."""
    if n_lods < 1:
        raise ValueError("need at least one LOD")
    r = glyph_radius * float(instance.scale.max())
    dist = float(np.linalg.norm(instance.position - np.asarray(camera.position)))
    dist = max(dist, 1e-9)
    _, ty = camera.tan_half()
    pixels = (2.0 * r / (dist * ty)) * (camera.height / 2.0)
    if pixels > LOD_PIXEL_THRESHOLDS[0]:
        idx = 0
    elif pixels > LOD_PIXEL_THRESHOLDS[1]:
        idx = 1
    else:
        idx = 2
    return min(idx, n_lods - 1)
