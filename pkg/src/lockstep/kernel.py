"""Deterministic fixed-timestep simulation kernel.

Owns worlds, entities, the clock, and seeded randomness. A world advances
one fixed-delta frame at a time; entity update hooks run in insertion
order, so identical (scene, seed, action history) always reproduces the
identical state trajectory. Nothing here is thread-safe by design: a
world belongs to exactly one execution context (the scheduler loop).

state_hash() is the replay-tooling contract: a 64-bit FNV-1a over the
canonical little-endian serialization of all entity state, in entity
order, each entity contributing its id (u64 LE) followed by its own
state_bytes(). See protocol.md for the hash and RNG definitions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .rng import SplitMix64

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3

DEFAULT_DELTA = Fraction(1, 30)


class WorldStateError(RuntimeError):
    """Lifecycle violation: operating on a destroyed world, or reentrant update."""


class InvalidWorldSettings(ValueError):
    """Unknown scene or unusable creation settings."""


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass
class SimClock:
    """Frame counter with an exact rational timebase (no accumulation drift)."""

    frame_index: int = 0
    delta_time: Fraction = DEFAULT_DELTA
    time_scale: Fraction = Fraction(1)

    def __post_init__(self):
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")

    @property
    def sim_time(self) -> Fraction:
        return self.frame_index * self.delta_time * self.time_scale

    @property
    def dt(self) -> float:
        """The float step used by per-frame physics (same value every frame)."""
        return float(self.delta_time * self.time_scale)


class Entity:
    """A simulated object: unique id plus kind-specific state and an update hook."""

    def __init__(self):
        self.id: int = 0
        self.alive: bool = True

    def update(self, world: "World") -> None:
        pass

    def state_bytes(self) -> bytes:
        """Canonical little-endian serialization of all mutable state."""
        return b""


ACTIVE = "ACTIVE"
DESTROYED = "DESTROYED"


class World:
    """A seeded, deterministic simulation instance."""

    def __init__(self, name: str, scene_id: str, seed: int,
                 settings: dict | None = None, delta_time: Fraction = DEFAULT_DELTA):
        self.name = name
        self.scene_id = scene_id
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.settings = dict(settings or {})
        self.clock = SimClock(delta_time=delta_time)
        self.rng = SplitMix64(self.seed)
        self.entities: list[Entity] = []
        self.status = ACTIVE
        self._next_entity_id = 1
        self._in_frame = False

    def add_entity(self, entity: Entity) -> Entity:
        entity.id = self._next_entity_id
        self._next_entity_id += 1
        self.entities.append(entity)
        return entity

    def remove_entity(self, entity: Entity) -> None:
        entity.alive = False
        self.entities.remove(entity)

    def entities_of(self, kind: type) -> list:
        return [e for e in self.entities if isinstance(e, kind)]

    def state_hash(self) -> int:
        parts = []
        for e in self.entities:
            parts.append(struct.pack("<Q", e.id))
            parts.append(e.state_bytes())
        return fnv1a64(b"".join(parts))


@dataclass(frozen=True)
class SceneDef:
    """A registered scene: how to populate a world and how agents join it.

    `build` populates a fresh world using only world.rng for randomness.
    `make_session` maps join settings to a (task, avatar) pair.
    """

    name: str
    build: Callable[[World, dict], None]
    make_session: Callable[[World, int, dict], tuple]


SCENES: dict[str, SceneDef] = {}


def register_scene(scene: SceneDef) -> None:
    SCENES[scene.name] = scene


def create_world(scene_id: str, seed: int, settings: dict | None = None,
                 name: str = "") -> World:
    """Build a world from a registered scene, seeded and at frame 0."""
    scene = SCENES.get(scene_id)
    if scene is None:
        raise InvalidWorldSettings(f"invalid world settings: unknown scene '{scene_id}'")
    world = World(name or scene_id, scene_id, seed, settings)
    scene.build(world, world.settings)
    return world


def advance_frame(world: World) -> int:
    """Run every entity's update hook once, in order; returns the new frame index.

    Single-writer contract: asserts against reentrant advancement.
    """
    if world.status != ACTIVE:
        raise WorldStateError(f"world '{world.name}' is {world.status}")
    if world._in_frame:
        raise WorldStateError("advance_frame reentered: concurrent mutation")
    world._in_frame = True
    try:
        for entity in list(world.entities):
            if entity.alive:
                entity.update(world)
        world.clock.frame_index += 1
    finally:
        world._in_frame = False
    return world.clock.frame_index


def reset_world(world: World) -> World:
    """Restore the world to its initial state: same scene, same seed, frame 0.

    Joined sessions are the session layer's concern; it re-primes their
    tasks after calling this.
    """
    if world.status != ACTIVE:
        raise WorldStateError(f"world '{world.name}' is {world.status}")
    scene = SCENES[world.scene_id]
    world.entities.clear()
    world.rng = SplitMix64(world.seed)
    world.clock.frame_index = 0
    world._next_entity_id = 1
    scene.build(world, world.settings)
    return world


def destroy_world(world: World) -> None:
    world.status = DESTROYED
    world.entities.clear()
