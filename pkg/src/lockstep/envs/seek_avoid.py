"""Seek Avoid: first-person pickup task in a 10x10 m arena.

The agent moves continuously, collecting apples (+1) and avoiding lemons
(-1). Pickups spawn at seeded uniform positions at least 1 m apart and at
least 1 m from the agent spawn. The episode terminates when every apple
is consumed, or is interrupted at the 900-frame limit (30 s at 30 Hz).
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .. import kernel
from ..avatars import Avatar, Task
from ..kernel import Entity, World
from ..render import CameraConfig, camera_sensor
from ..wire import DType, EpisodeStateTag, Tensor

ARENA_SIZE = 10.0
MAX_SPEED = 3.0            # m/s
MAX_TURN_RATE = math.pi / 2  # rad/s
PICKUP_RADIUS = 0.5
MIN_SPACING = 1.0
APPLE_COUNT = 10
LEMON_COUNT = 5
EPISODE_FRAME_LIMIT = 900
SPAWN_POSE = (5.0, 5.0, 0.0)

APPLE_COLOR = (200, 30, 30)
LEMON_COLOR = (230, 220, 40)
PICKUP_DRAW_RADIUS = 0.25
PICKUP_DRAW_HEIGHT = 0.5


class Pickup(Entity):
    def __init__(self, x: float, y: float, kind: str):
        super().__init__()
        self.x = x
        self.y = y
        self.kind = kind  # "apple" | "lemon"
        self.consumed = False

    @property
    def reward(self) -> float:
        return 1.0 if self.kind == "apple" else -1.0

    def billboard(self):
        if self.consumed:
            return None
        color = APPLE_COLOR if self.kind == "apple" else LEMON_COLOR
        return color, PICKUP_DRAW_RADIUS, PICKUP_DRAW_HEIGHT

    def state_bytes(self) -> bytes:
        return struct.pack("<ddBB", self.x, self.y,
                           1 if self.kind == "apple" else 2, self.consumed)


class AgentBody(Entity):
    """The avatar's physical embodiment: pose, velocity, and action intents."""

    def __init__(self, x: float, y: float, heading: float):
        super().__init__()
        self.x = x
        self.y = y
        self.heading = heading
        self.vx = 0.0
        self.vy = 0.0
        self.ax = 0.0
        self.ay = 0.0
        self.score = 0.0
        self.move = 0.0
        self.strafe = 0.0
        self.look = 0.0
        self.jump = False  # accepted but inert: no vertical dynamics

    def update(self, world: World) -> None:
        dt = world.clock.dt
        self.heading += self.look * MAX_TURN_RATE * dt
        # Local intent (forward, right); cap the magnitude so diagonal input
        # cannot exceed the speed limit.
        mx, my = self.move, self.strafe
        norm = math.hypot(mx, my)
        if norm > 1.0:
            mx, my = mx / norm, my / norm
        fx, fy = math.cos(self.heading), math.sin(self.heading)
        rx, ry = math.sin(self.heading), -math.cos(self.heading)
        vx = (mx * fx + my * rx) * MAX_SPEED
        vy = (mx * fy + my * ry) * MAX_SPEED
        self.ax = (vx - self.vx) / dt
        self.ay = (vy - self.vy) / dt
        self.vx = vx
        self.vy = vy
        self.x = min(max(self.x + vx * dt, 0.0), ARENA_SIZE)
        self.y = min(max(self.y + vy * dt, 0.0), ARENA_SIZE)
        radius_sq = PICKUP_RADIUS * PICKUP_RADIUS
        for entity in world.entities:
            if isinstance(entity, Pickup) and not entity.consumed:
                dx, dy = entity.x - self.x, entity.y - self.y
                if dx * dx + dy * dy <= radius_sq:
                    entity.consumed = True
                    self.score += entity.reward

    def state_bytes(self) -> bytes:
        return struct.pack(
            "<11dB", self.x, self.y, self.heading, self.vx, self.vy,
            self.ax, self.ay, self.score, self.move, self.strafe,
            self.look, self.jump,
        )


def _place_pickups(world: World) -> None:
    sx, sy, _ = SPAWN_POSE
    placed: list[tuple[float, float]] = []
    spacing_sq = MIN_SPACING * MIN_SPACING
    for kind in ["apple"] * APPLE_COUNT + ["lemon"] * LEMON_COUNT:
        for _ in range(10_000):
            x = world.rng.uniform(PICKUP_RADIUS, ARENA_SIZE - PICKUP_RADIUS)
            y = world.rng.uniform(PICKUP_RADIUS, ARENA_SIZE - PICKUP_RADIUS)
            if (x - sx) ** 2 + (y - sy) ** 2 < spacing_sq:
                continue
            if any((x - px) ** 2 + (y - py) ** 2 < spacing_sq for px, py in placed):
                continue
            world.add_entity(Pickup(x, y, kind))
            placed.append((x, y))
            break
        else:
            raise RuntimeError("could not place pickups with required spacing")


def build_scene(world: World, settings: dict) -> None:
    _place_pickups(world)


class SeekAvoidTask(Task):
    def __init__(self, world: World):
        self._world = world
        self._body: AgentBody | None = None
        self._start_frame = 0
        self._score_before = 0.0

    def start_episode(self, world: World, avatar: Avatar) -> None:
        if avatar.entity is not None and avatar.entity.alive:
            world.remove_entity(avatar.entity)
        for pickup in world.entities_of(Pickup):
            world.remove_entity(pickup)
        _place_pickups(world)
        body = AgentBody(*SPAWN_POSE)
        world.add_entity(body)
        avatar.entity = body
        self._body = body
        self._start_frame = world.clock.frame_index
        self._score_before = 0.0

    def on_step(self, world: World, avatar: Avatar) -> None:
        self._score_before = self._body.score

    def reward(self) -> float:
        return self._body.score - self._score_before

    def episode_state(self) -> EpisodeStateTag:
        if self._body is None:
            return EpisodeStateTag.RUNNING
        apples_left = sum(1 for p in self._world.entities_of(Pickup)
                          if p.kind == "apple" and not p.consumed)
        if apples_left == 0:
            return EpisodeStateTag.TERMINATED
        if self._world.clock.frame_index - self._start_frame >= EPISODE_FRAME_LIMIT:
            return EpisodeStateTag.INTERRUPTED
        return EpisodeStateTag.RUNNING


def make_session(world: World, agent_id: int, join_settings: dict):
    from . import setting_value

    width = int(setting_value(join_settings, "pixels_width", 96))
    height = int(setting_value(join_settings, "pixels_height", 72))

    task = SeekAvoidTask(world)
    avatar = Avatar(world)

    def set_field(name, convert):
        def hook(value: Tensor):
            setattr(avatar.entity, name, convert(value.item()))
        return hook

    avatar.register_actuator("MOVE_BACK_FORWARD", DType.F32, (), (-1.0, 1.0),
                             set_field("move", float))
    avatar.register_actuator("STRAFE_LEFT_RIGHT", DType.F32, (), (-1.0, 1.0),
                             set_field("strafe", float))
    avatar.register_actuator("LOOK_LEFT_RIGHT", DType.F32, (), (-1.0, 1.0),
                             set_field("look", float))
    avatar.register_actuator("JUMP", DType.BOOL, (), None, set_field("jump", bool))

    avatar.register_sensor("SCORE", DType.F32, (),
                           lambda: Tensor.from_scalar(avatar.entity.score, DType.F32))
    avatar.register_sensor(
        "ACCELERATION", DType.F32, (3,),
        lambda: Tensor.from_numpy(
            np.array([avatar.entity.ax, avatar.entity.ay, 0.0], dtype="<f4")),
    )
    camera_sensor(avatar, "PIXELS", CameraConfig(width, height))
    return task, avatar


kernel.register_scene(kernel.SceneDef("seek_avoid", build_scene, make_session))
