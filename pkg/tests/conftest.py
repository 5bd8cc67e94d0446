import numpy as np
import pytest

from craftvis.fixtures import color_blocks, stripe_texture, write_demo_scene
from craftvis.texture import TextureImage


@pytest.fixture
def rgb_blocks():
    """Image of pure red, green and blue blocks."""
    return color_blocks([(255, 0, 0), (0, 255, 0), (0, 0, 255)], block=16)


@pytest.fixture
def stripe_source():
    return TextureImage(stripe_texture(height=64, width=12, seed=3))


@pytest.fixture(scope="session")
def demo_scene_dir(tmp_path_factory):
    """A small but complete on-disk scene, built once per session."""
    root = tmp_path_factory.mktemp("demo_scene")
    scene_path = write_demo_scene(root, compact=True)
    return scene_path.parent


@pytest.fixture(scope="session")
def demo_scene_path(demo_scene_dir):
    return demo_scene_dir / "scene.json"
