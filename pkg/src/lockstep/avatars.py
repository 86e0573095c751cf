"""Avatars, actuators, sensors, and tasks: the contract environment authors implement.

An avatar is an agent's embodiment: an ordered set of named actuators
(write channels, optionally bounded) and sensors (side-effect-free read
channels). Uids are assigned densely from 1 in registration order,
separately for actuators and sensors, and are stable for the lifetime of
a join. A task defines episode lifecycle, the per-step scalar reward,
and the simulation-advancement preference for agent steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import wire
from .kernel import Entity, World
from .wire import DType, EpisodeStateTag, Tensor


class RegistrationError(ValueError):
    pass


class ActionError(ValueError):
    pass


class ObservationError(ValueError):
    pass


@dataclass
class Actuator:
    uid: int
    name: str
    dtype: DType
    shape: tuple[int, ...]
    bounds: tuple[float, float] | None
    hook: Callable[[Tensor], None]

    def spec(self) -> wire.ActuatorSpec:
        return wire.ActuatorSpec(self.uid, self.name, self.dtype, self.shape, self.bounds)


@dataclass
class Sensor:
    uid: int
    name: str
    dtype: DType
    shape: tuple[int, ...]
    hook: Callable[[], Tensor]

    def spec(self) -> wire.SensorSpec:
        return wire.SensorSpec(self.uid, self.name, self.dtype, self.shape)


def default_tensor(dtype: DType, shape: tuple[int, ...]) -> Tensor:
    """The value an omitted actuator is reset to: zeros / false / empty strings."""
    if dtype == DType.STRING:
        count = 1
        for extent in shape:
            count *= extent
        return Tensor.from_strings([""] * count, shape)
    return Tensor.from_numpy(np.zeros(shape, dtype=wire._NUMPY_DTYPE[dtype]))


def clamp_tensor(value: Tensor, bounds: tuple[float, float] | None) -> Tensor:
    """Range-clamp elementwise; idempotent, and the identity when unbounded."""
    if bounds is None or value.dtype == DType.STRING:
        return value
    lo, hi = bounds
    if value.dtype == DType.BOOL:
        return value
    arr = value.to_numpy()
    clipped = np.clip(arr, lo, hi).astype(arr.dtype)
    if (clipped == arr).all():
        return value
    return Tensor.from_numpy(clipped)


class Avatar:
    """An agent's controllable embodiment inside one world."""

    def __init__(self, world: World, entity: Entity | None = None):
        self.world = world
        self.entity = entity
        self.actuators: list[Actuator] = []
        self.sensors: list[Sensor] = []
        self.strict_bounds = False
        self._actuators_by_uid: dict[int, Actuator] = {}
        self._sensors_by_uid: dict[int, Sensor] = {}

    def register_actuator(self, name: str, dtype: DType, shape: tuple[int, ...] = (),
                          bounds: tuple[float, float] | None = None,
                          hook: Callable[[Tensor], None] = lambda t: None) -> int:
        if any(a.name == name for a in self.actuators):
            raise RegistrationError(f"duplicate actuator name '{name}'")
        if bounds is not None and bounds[0] > bounds[1]:
            raise RegistrationError(f"actuator bounds {bounds} require min <= max")
        uid = len(self.actuators) + 1
        actuator = Actuator(uid, name, dtype, tuple(shape), bounds, hook)
        self.actuators.append(actuator)
        self._actuators_by_uid[uid] = actuator
        return uid

    def register_sensor(self, name: str, dtype: DType, shape: tuple[int, ...] = (),
                        hook: Callable[[], Tensor] = lambda: None) -> int:
        if any(s.name == name for s in self.sensors):
            raise RegistrationError(f"duplicate sensor name '{name}'")
        uid = len(self.sensors) + 1
        sensor = Sensor(uid, name, dtype, tuple(shape), hook)
        self.sensors.append(sensor)
        self._sensors_by_uid[uid] = sensor
        return uid

    def spec_set(self) -> wire.SpecSet:
        return wire.SpecSet(
            tuple(a.spec() for a in self.actuators),
            tuple(s.spec() for s in self.sensors),
        )

    def apply_actions(self, actions: dict[int, Tensor]) -> None:
        """Validate, then write every actuator: provided values clamped to
        bounds, omitted ones reset to their default. All-or-nothing: any
        invalid entry fails the whole call before a single write happens.
        """
        for uid, value in actions.items():
            actuator = self._actuators_by_uid.get(uid)
            if actuator is None:
                raise ActionError(f"unknown actuator uid {uid}")
            if value.dtype != actuator.dtype or value.shape != actuator.shape:
                raise ActionError(
                    f"action for '{actuator.name}' has dtype {value.dtype.name} shape "
                    f"{value.shape}, spec is {actuator.dtype.name} {actuator.shape}"
                )
            if self.strict_bounds and actuator.bounds is not None:
                lo, hi = actuator.bounds
                arr = value.to_numpy()
                if (arr < lo).any() or (arr > hi).any():
                    raise ActionError(f"action for '{actuator.name}' outside bounds [{lo}, {hi}]")
        for actuator in self.actuators:
            if actuator.uid in actions:
                actuator.hook(clamp_tensor(actions[actuator.uid], actuator.bounds))
            else:
                actuator.hook(default_tensor(actuator.dtype, actuator.shape))

    def read_observations(self, uids) -> dict[int, Tensor]:
        """Snapshot the requested sensors at the current simulation state."""
        for uid in uids:
            if uid not in self._sensors_by_uid:
                raise ObservationError(f"unknown sensor uid {uid}")
        out: dict[int, Tensor] = {}
        for uid in uids:
            sensor = self._sensors_by_uid[uid]
            value = sensor.hook()
            if value.dtype != sensor.dtype or value.shape != sensor.shape:
                raise ObservationError(
                    f"sensor '{sensor.name}' produced dtype {value.dtype.name} shape "
                    f"{value.shape}, spec is {sensor.dtype.name} {sensor.shape}"
                )
            out[uid] = value
        return out


@dataclass
class EpisodeState:
    """Per-session episode bookkeeping."""

    tag: EpisodeStateTag = EpisodeStateTag.RUNNING
    steps: int = 0
    last_reward: float | None = None


class Task:
    """Defines an agent's operating conditions: episode lifecycle, reward,
    termination kind, and time preference. Subclasses override what they need.
    """

    def apply_settings(self, settings: dict[str, Tensor]) -> None:
        pass

    def start_episode(self, world: World, avatar: Avatar) -> None:
        raise NotImplementedError

    def on_step(self, world: World, avatar: Avatar) -> None:
        """Called once per agent step, after actions are applied and before
        any frame advances. Raises to reject the step."""

    def is_step_complete(self, world: World, avatar: Avatar) -> bool:
        """False while a step needs more frames (multi-frame settling)."""
        return True

    def reward(self) -> float:
        """Single scalar, evaluated once per step from the settled state."""
        return 0.0

    def episode_state(self) -> EpisodeStateTag:
        return EpisodeStateTag.RUNNING

    def tick_preference(self):
        from .session import TickState

        return TickState.MUST_TICK
