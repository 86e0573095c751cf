"""Headless CPU rendering: first-person RGB24 frames with no display or GPU.

One ray per screen column across the 2D world. Sky fills the rows above
the horizon, floor shades fill the rows below (darker with distance), and
entities exposing a `billboard()` method draw as flat-colored vertical
rectangles whose projected size falls off as 1/distance, painted far to
near so the nearest wins each pixel.

The projection is a pinhole model with square pixels:

    focal        = (width/2) / tan(hfov/2)
    column       = width/2 + focal * lateral / depth
    row(z)       = height/2 + focal * (eye_height - z) / depth
    floor_dist   = eye_height * focal / (row + 0.5 - height/2)
    floor_shade  = 1 / (1 + 0.15 * floor_dist)

Rendering is a pure function of (world state, pose, config): repeated
calls produce byte-identical buffers. Single-threaded by design.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import kernel
from .avatars import Avatar
from .kernel import World
from .wire import DType, Tensor

SKY_COLOR = (135, 206, 235)
FLOOR_COLOR = (96, 128, 80)
FLOOR_FADE = 0.15
NEAR_CLIP = 0.1

# Render invocations since process start; instrumentation for laziness checks.
render_count = 0

_background_cache: dict[tuple, np.ndarray] = {}


@dataclass(frozen=True)
class CameraConfig:
    width: int = 96
    height: int = 72
    hfov: float = math.pi / 2
    eye_height: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("camera needs width, height >= 1")
        if not 0 < self.hfov < math.pi:
            raise ValueError("horizontal fov must be in (0, pi)")

    @property
    def focal(self) -> float:
        return (self.width / 2) / math.tan(self.hfov / 2)


@dataclass
class FrameBuffer:
    width: int
    height: int
    pixels: bytes  # row-major RGB24, top row first; len == width*height*3


def _background(cfg: CameraConfig) -> np.ndarray:
    key = (cfg.width, cfg.height, cfg.hfov, cfg.eye_height)
    cached = _background_cache.get(key)
    if cached is None:
        horizon = cfg.height // 2
        img = np.empty((cfg.height, cfg.width, 3), dtype=np.uint8)
        img[:horizon] = SKY_COLOR
        rows = np.arange(horizon, cfg.height, dtype=np.float64)
        dist = cfg.eye_height * cfg.focal / (rows + 0.5 - cfg.height / 2)
        shade = 1.0 / (1.0 + FLOOR_FADE * dist)
        floor = np.round(np.outer(shade, np.array(FLOOR_COLOR, dtype=np.float64)))
        img[horizon:] = floor.astype(np.uint8)[:, np.newaxis, :]
        cached = _background_cache[key] = img
    return cached


def render_camera(world: World, position: tuple[float, float], heading: float,
                  cfg: CameraConfig = CameraConfig()) -> FrameBuffer:
    """Render the world from a pose. Deterministic; no world mutation."""
    global render_count
    render_count += 1
    img = _background(cfg).copy()
    horizon = cfg.height / 2
    focal = cfg.focal
    fx, fy = math.cos(heading), math.sin(heading)
    rx, ry = math.sin(heading), -math.cos(heading)
    px, py = position

    sprites = []
    for entity in world.entities:
        describe = getattr(entity, "billboard", None)
        if describe is None:
            continue
        sprite = describe()
        if sprite is None:
            continue
        color, radius, tall = sprite
        dx, dy = entity.x - px, entity.y - py
        depth = dx * fx + dy * fy
        if depth <= NEAR_CLIP:
            continue
        lateral = dx * rx + dy * ry
        sprites.append((depth, entity.id, lateral, color, radius, tall))

    # Painter's order, far to near, so nearer sprites occlude.
    sprites.sort(key=lambda s: (-s[0], s[1]))
    for depth, _eid, lateral, color, radius, tall in sprites:
        center = cfg.width / 2 + focal * lateral / depth
        half = focal * radius / depth
        c0 = max(0, int(math.floor(center - half)))
        c1 = min(cfg.width, int(math.ceil(center + half)))
        if c1 <= c0:
            continue
        bottom = horizon + focal * cfg.eye_height / depth
        top = horizon + focal * (cfg.eye_height - tall) / depth
        r0 = max(0, int(math.floor(top)))
        r1 = min(cfg.height, int(math.ceil(bottom)))
        if r1 <= r0:
            continue
        img[r0:r1, c0:c1] = color

    return FrameBuffer(cfg.width, cfg.height, img.tobytes())


def camera_sensor(avatar: Avatar, name: str, cfg: CameraConfig = CameraConfig()) -> int:
    """Register a lazy U8 pixel sensor of shape [height, width, 3] on the avatar.

    Rendering happens only when the observation is actually requested.
    """

    def read() -> Tensor:
        entity = avatar.entity
        fb = render_camera(avatar.world, (entity.x, entity.y), entity.heading, cfg)
        return Tensor(DType.U8, (cfg.height, cfg.width, 3), fb.pixels)

    return avatar.register_sensor(name, DType.U8, (cfg.height, cfg.width, 3), read)


def write_ppm(fb: FrameBuffer, path: str) -> None:
    """Dump a frame buffer as a binary PPM (P6) for visual inspection."""
    with open(path, "wb") as f:
        f.write(f"P6\n{fb.width} {fb.height}\n255\n".encode("ascii"))
        f.write(fb.pixels)


def main(argv=None) -> int:
    from . import envs  # noqa: F401  (registers the reference scenes)

    parser = argparse.ArgumentParser(
        prog="lockstep-render",
        description="Render a scene from a pose to a PPM file (debug tool).",
    )
    parser.add_argument("--scene", default="seek_avoid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pose", default="5,5,0", help="X,Y,HEADING (meters, radians)")
    parser.add_argument("--width", type=int, default=96)
    parser.add_argument("--height", type=int, default=72)
    parser.add_argument("--fov", type=float, default=math.pi / 2)
    parser.add_argument("--out", default="frame.ppm")
    args = parser.parse_args(argv)

    x, y, heading = (float(v) for v in args.pose.split(","))
    world = kernel.create_world(args.scene, args.seed)
    cfg = CameraConfig(args.width, args.height, args.fov)
    fb = render_camera(world, (x, y), heading, cfg)
    write_ppm(fb, args.out)
    print(f"wrote {args.out}: {fb.width}x{fb.height}, {len(fb.pixels)} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
