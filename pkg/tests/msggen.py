"""Seeded random generator of well-formed wire messages (shared by tests)."""

from __future__ import annotations

import random

import numpy as np

from lockstep import wire
from lockstep.wire import DType, EpisodeStateTag, Tensor

_FIXED_DTYPES = [DType.F32, DType.F64, DType.I32, DType.I64, DType.U8, DType.BOOL]

_WORDS = ["seed", "scene", "team", "müller", "空", "a b", "", "k1", "zzz"]


def random_tensor(rng: random.Random) -> Tensor:
    dtype = rng.choice(_FIXED_DTYPES + [DType.STRING])
    rank = rng.randint(0, 3)
    shape = tuple(rng.randint(0, 4) for _ in range(rank))
    count = 1
    for extent in shape:
        count *= extent
    if dtype == DType.STRING:
        return Tensor.from_strings([rng.choice(_WORDS) for _ in range(count)], shape)
    np_rng = np.random.RandomState(rng.randrange(2**31))
    if dtype == DType.BOOL:
        arr = np_rng.randint(0, 2, size=shape).astype(bool)
    elif dtype in (DType.I32, DType.I64):
        arr = np_rng.randint(-1000, 1000, size=shape).astype(
            "<i4" if dtype == DType.I32 else "<i8")
    elif dtype == DType.U8:
        arr = np_rng.randint(0, 256, size=shape).astype("u1")
    else:
        arr = np_rng.standard_normal(size=shape).astype(
            "<f4" if dtype == DType.F32 else "<f8")
    return Tensor.from_numpy(arr)


def random_settings(rng: random.Random) -> dict[str, Tensor]:
    keys = rng.sample(_WORDS, rng.randint(0, 4))
    return {key: random_tensor(rng) for key in keys}


def random_uid_map(rng: random.Random) -> dict[int, Tensor]:
    uids = rng.sample(range(1, 40), rng.randint(0, 5))
    return {uid: random_tensor(rng) for uid in uids}


def random_specset(rng: random.Random) -> wire.SpecSet:
    actuators = []
    for uid in range(1, rng.randint(1, 5)):
        bounded = rng.random() < 0.5
        lo = rng.uniform(-5, 0)
        actuators.append(wire.ActuatorSpec(
            uid, f"ACT_{uid}", rng.choice(_FIXED_DTYPES),
            tuple(rng.randint(1, 4) for _ in range(rng.randint(0, 2))),
            (lo, lo + rng.uniform(0, 5)) if bounded else None))
    sensors = [
        wire.SensorSpec(uid, f"SEN_{uid}", rng.choice(_FIXED_DTYPES),
                        tuple(rng.randint(1, 5) for _ in range(rng.randint(0, 3))))
        for uid in range(1, rng.randint(1, 5))
    ]
    return wire.SpecSet(tuple(actuators), tuple(sensors))


def random_message(rng: random.Random) -> wire.Message:
    sequence = rng.randrange(2**64)
    body = rng.choice([
        lambda: wire.CreateWorldRequest(random_settings(rng)),
        lambda: wire.CreateWorldResponse(rng.choice(_WORDS)),
        lambda: wire.JoinWorldRequest(rng.choice(_WORDS), random_settings(rng)),
        lambda: wire.JoinWorldResponse(random_specset(rng)),
        lambda: wire.StepRequest(
            random_uid_map(rng),
            tuple(rng.randrange(1, 50) for _ in range(rng.randint(0, 5)))),
        lambda: wire.StepResponse(
            EpisodeStateTag(rng.randint(1, 3)), random_uid_map(rng)),
        lambda: wire.ResetRequest(random_settings(rng)),
        lambda: wire.ResetResponse(random_specset(rng)),
        lambda: wire.ResetWorldRequest(),
        lambda: wire.ResetWorldResponse(),
        lambda: wire.LeaveWorldRequest(),
        lambda: wire.LeaveWorldResponse(),
        lambda: wire.DestroyWorldRequest(rng.choice(_WORDS)),
        lambda: wire.DestroyWorldResponse(),
        lambda: wire.ErrorResponse(rng.choice([3, 5, 9, 13]), rng.choice(_WORDS)),
    ])()
    return wire.Message(sequence, body)
