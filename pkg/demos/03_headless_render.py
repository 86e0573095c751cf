"""Headless rendering: first-person RGB frames with no display or GPU.

Run:  python3 demos/03_headless_render.py
Writes seek_avoid_*.ppm files viewable with any image tool.
"""

import hashlib
import math

from lockstep import kernel
from lockstep.render import CameraConfig, render_camera, write_ppm

world = kernel.create_world("seek_avoid", seed=7)
cfg = CameraConfig()  # 96x72, 90-degree horizontal field of view

# Sweep the camera through the arena; apples render as red billboards,
# lemons as yellow ones, scaled by 1/distance with nearest-first occlusion.
for name, pose in [
    ("center", ((5.0, 5.0), 0.0)),
    ("corner", ((1.0, 1.0), math.pi / 4)),
    ("back", ((9.0, 9.0), -3 * math.pi / 4)),
]:
    fb = render_camera(world, *pose, cfg)
    path = f"seek_avoid_{name}.ppm"
    write_ppm(fb, path)
    digest = hashlib.sha256(fb.pixels).hexdigest()[:16]
    print(f"{path}: {fb.width}x{fb.height}, {len(fb.pixels)} bytes, sha256 {digest}")

# Rendering is a pure function of (world state, pose, config).
once = render_camera(world, (5.0, 5.0), 0.0, cfg).pixels
again = render_camera(world, (5.0, 5.0), 0.0, cfg).pixels
print("\nrepeat render byte-identical:", once == again)

# Higher resolutions are just camera configuration.
big = render_camera(world, (5.0, 5.0), 0.0, CameraConfig(320, 240))
write_ppm(big, "seek_avoid_320x240.ppm")
print(f"seek_avoid_320x240.ppm: {len(big.pixels)} bytes")
