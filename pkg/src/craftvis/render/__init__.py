"""Deterministic software renderer for layered scenes."""

from .camera import Camera, frame_scene_camera
from .engine import RenderResult, render_scene, save_depth, save_render
from .shading import compute_bin_blend, triplanar_weights
from .lines import extrude_line, LineMesh
from .glyphs import place_glyphs, select_lod

__all__ = [
    "Camera", "frame_scene_camera", "RenderResult", "render_scene",
    "save_depth", "save_render", "compute_bin_blend", "triplanar_weights",
    "extrude_line", "LineMesh", "place_glyphs", "select_lod",
]
