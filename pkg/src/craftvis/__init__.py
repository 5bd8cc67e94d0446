"""Toolkit for turning scanned handcrafted media into visualization assets.

Submodules are deliberately flat and numpy-first:

``color``
    sRGB/Lab conversion, palette extraction, colormap construction and export.
``texture``
    Texture images, crop/tile helpers, Sobel normal maps, texture sets.
``linetex``
    Row-based synthesis of arbitrarily long line textures from short scans.
``mesh`` / ``decimate`` / ``uvatlas`` / ``bake``
    Triangle mesh type, orientation, quadric decimation, UV atlassing and
    normal-map baking, assembled into glyph assets with LOD chains.
``sampling``
    Regular, uniform-random and density-proportional point sampling.
``scene``
    Data objects, variable bindings, layer validation and scene files.
``render``
    Deterministic software renderer for layered scenes.
``library``
    Content-addressed on-disk asset library.
"""

__version__ = "0.1.0"
