"""The full loop: serve a world over TCP and drive an episode remotely.

Run:  python3 demos/04_serve_and_step.py
"""

import random

from lockstep import client, wire
from lockstep.server import ServerConfig, serve
from lockstep.wire import DType, Tensor

with serve(ServerConfig(address="127.0.0.1:0")) as server:
    print(f"server listening on {server.address}")

    with client.connect(server.address) as ch:
        # The canonical flow: create a world, join it, reset, then step.
        world = ch.create_world({"scene": "seek_avoid", "seed": 7})
        specs = ch.join_world(world)
        print(f"joined '{world}'")
        print("  actuators:", ", ".join(
            f"{a.name}{a.bounds or ''}" for a in specs.actuators))
        print("  sensors:  ", ", ".join(
            f"{s.name}{list(s.shape)}" for s in specs.sensors))

        ch.reset()
        move = specs.actuator_by_name("MOVE_BACK_FORWARD").uid
        look = specs.actuator_by_name("LOOK_LEFT_RIGHT").uid
        score = specs.sensor_by_name("SCORE").uid
        pixels = specs.sensor_by_name("PIXELS").uid

        rng = random.Random(0)
        response = None
        for step in range(120):
            response = ch.step({
                move: Tensor.from_scalar(1.0, DType.F32),
                look: Tensor.from_scalar(rng.uniform(-1, 1), DType.F32),
            }, (score, pixels))
        print(f"\nafter 120 steps: state={response.state.name}, "
              f"score={response.observations[score].item()}, "
              f"pixels={len(response.observations[pixels].data)} bytes")

        # Observation-only steps are read-only: no actions, no frame advance.
        peek = ch.step({}, (score,))
        print(f"observation-only peek: score={peek.observations[score].item()}")

        # Errors come back as coded responses, and the session survives them.
        try:
            ch.step({99: Tensor.from_scalar(1.0, DType.F32)}, ())
        except client.ServerError as e:
            print(f"bad action answered with: {e}")

        ch.leave_world()
        print("left world; server still running")
