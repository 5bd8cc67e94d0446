"""Perspective pinhole camera."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geom import normalize


@dataclass(frozen=True)
class Camera:
    """Look-at perspective camera.

    ``fov_deg`` is the vertical field of view.  Camera space is chosen so
    depth (+z) increases away from the eye along the view direction,
    which is what the depth buffer stores.
    """

    position: tuple
    look_at: tuple
    up: tuple = (0.0, 1.0, 0.0)
    fov_deg: float = 45.0
    width: int = 800
    height: int = 600

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError("fov must lie in (0, 180) degrees")
        p = np.asarray(self.position, dtype=np.float64)
        t = np.asarray(self.look_at, dtype=np.float64)
        if np.linalg.norm(t - p) < 1e-12:
            raise ValueError("camera position and look_at coincide")
        f = normalize(t - p)
        u = np.asarray(self.up, dtype=np.float64)
        if np.linalg.norm(np.cross(f, u)) < 1e-9:
            raise ValueError("camera up is parallel to the view direction")

    def basis(self):
        """(right, up, forward) orthonormal world-space vectors."""
        p = np.asarray(self.position, dtype=np.float64)
        t = np.asarray(self.look_at, dtype=np.float64)
        forward = normalize(t - p)
        right = normalize(np.cross(forward, np.asarray(self.up, dtype=np.float64)))
        up = np.cross(right, forward)
        return right, up, forward

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points -> camera space (x right, y up, z = depth)."""
        right, up, forward = self.basis()
        p = np.asarray(points, dtype=np.float64) - np.asarray(self.position)
        return np.stack([p @ right, p @ up, p @ forward], axis=-1)

    def tan_half(self):
        ty = math.tan(math.radians(self.fov_deg) / 2.0)
        tx = ty * self.width / self.height
        return tx, ty

    def project(self, cam_points: np.ndarray):
        """Camera-space points -> pixel coordinates (x right, y down).

        Returns (xy, depth); callers must have clipped z > 0 already.
        """
        p = np.asarray(cam_points, dtype=np.float64)
        tx, ty = self.tan_half()
        z = p[..., 2]
        x_ndc = p[..., 0] / (z * tx)
        y_ndc = p[..., 1] / (z * ty)
        x = (x_ndc * 0.5 + 0.5) * self.width
        y = (0.5 - y_ndc * 0.5) * self.height
        return np.stack([x, y], axis=-1), z

    def ray_directions(self) -> np.ndarray:
        """Unit world-space ray direction per pixel center, (H, W, 3)."""
        right, up, forward = self.basis()
        tx, ty = self.tan_half()
        xs = ((np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0) * tx
        ys = (1.0 - (np.arange(self.height) + 0.5) / self.height * 2.0) * ty
        gx, gy = np.meshgrid(xs, ys)
        d = (gx[..., None] * right + gy[..., None] * up + forward)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def near_plane(self) -> float:
        dist = float(np.linalg.norm(np.asarray(self.look_at, dtype=np.float64)
                                    - np.asarray(self.position, dtype=np.float64)))
        return max(1e-6, 1e-3 * dist)

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "look_at": [float(v) for v in self.look_at],
            "up": [float(v) for v in self.up],
            "fov_deg": float(self.fov_deg),
            "width": int(self.width),
            "height": int(self.height),
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(
            position=tuple(d["position"]),
            look_at=tuple(d["look_at"]),
            up=tuple(d.get("up", (0.0, 1.0, 0.0))),
            fov_deg=float(d.get("fov_deg", 45.0)),
            width=int(d.get("width", 800)),
            height=int(d.get("height", 600)),
        )


def frame_scene_camera(bbox_lo, bbox_hi, width: int = 800, height: int = 600,
                       fov_deg: float = 45.0) -> Camera:
    """A deterministic default camera framing a bounding box."""
    lo = np.asarray(bbox_lo, dtype=np.float64)
    hi = np.asarray(bbox_hi, dtype=np.float64)
    center = (lo + hi) / 2.0
    diag = float(np.linalg.norm(hi - lo))
    if diag <= 0:
        diag = 1.0
    direction = normalize(np.array([0.55, 0.6, 0.95]))
    pos = center + direction * diag * 1.6
    return Camera(position=tuple(pos), look_at=tuple(center),
                  fov_deg=fov_deg, width=width, height=height)
