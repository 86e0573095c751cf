"""Transport: flow conformance, ordering, isolation, lifecycle over real TCP."""

import socket
import struct
import time

import pytest

from lockstep import client, wire
from lockstep.client import ServerError
from lockstep.server import ServerConfig, serve
from lockstep.wire import DType, EpisodeStateTag, Tensor


@pytest.fixture
def server():
    with serve(ServerConfig(address="127.0.0.1:0")) as srv:
        yield srv


@pytest.fixture
def channel(server):
    with client.connect(server.address) as ch:
        yield ch


def seek_avoid_world(ch, seed=7):
    name = ch.create_world({"scene": "seek_avoid", "seed": seed})
    specs = ch.join_world(name)
    ch.reset()
    return name, specs


class TestFlow:
    def test_create_join_step_reset_leave(self, channel):
        name, specs = seek_avoid_world(channel)
        move = specs.actuator_by_name("MOVE_BACK_FORWARD").uid
        score = specs.sensor_by_name("SCORE").uid
        response = channel.step({move: Tensor.from_scalar(1.0, DType.F32)}, (score,))
        assert response.state == EpisodeStateTag.RUNNING
        assert response.observations[score].item() == 0.0
        channel.reset()
        channel.leave_world()

    def test_step_before_join_fails(self, channel):
        with pytest.raises(ServerError) as err:
            channel.step({}, ())
        assert err.value.code == wire.FAILED_PRECONDITION

    def test_join_unknown_world_not_found_connection_usable(self, channel):
        with pytest.raises(ServerError) as err:
            channel.join_world("nowhere")
        assert err.value.code == wire.NOT_FOUND
        assert channel.create_world({"scene": "seek_avoid"})  # still works

    def test_unknown_scene_invalid_argument(self, channel):
        with pytest.raises(ServerError) as err:
            channel.create_world({"scene": "no_such_scene"})
        assert err.value.code == wire.INVALID_ARGUMENT

    def test_reset_before_join_fails(self, channel):
        with pytest.raises(ServerError) as err:
            channel.reset()
        assert err.value.code == wire.FAILED_PRECONDITION

    def test_join_twice_fails(self, channel):
        name = channel.create_world({"scene": "seek_avoid"})
        channel.join_world(name)
        with pytest.raises(ServerError) as err:
            channel.join_world(name)
        assert err.value.code == wire.FAILED_PRECONDITION

    def test_rejoin_after_leave(self, channel):
        name = channel.create_world({"scene": "seek_avoid"})
        channel.join_world(name)
        channel.leave_world()
        assert channel.join_world(name)

    def test_error_does_not_corrupt_session(self, channel):
        _, specs = seek_avoid_world(channel)
        with pytest.raises(ServerError):
            channel.step({99: Tensor.from_scalar(1.0, DType.F32)}, ())
        move = specs.actuator_by_name("MOVE_BACK_FORWARD").uid
        response = channel.step({move: Tensor.from_scalar(0.5, DType.F32)}, ())
        assert response.state == EpisodeStateTag.RUNNING


class TestWorldRegistry:
    def test_create_is_idempotent_for_identical_settings(self, channel):
        settings = {"scene": "seek_avoid", "seed": 3, "world_name": "alpha"}
        assert channel.create_world(settings) == "alpha"
        assert channel.create_world(settings) == "alpha"

    def test_create_name_collision_different_settings(self, channel):
        channel.create_world({"scene": "seek_avoid", "world_name": "beta"})
        with pytest.raises(ServerError) as err:
            channel.create_world({"scene": "seek_avoid", "seed": 9,
                                  "world_name": "beta"})
        assert err.value.code == wire.INVALID_ARGUMENT

    def test_destroy_requires_no_joined_agents(self, channel):
        name = channel.create_world({"scene": "seek_avoid"})
        channel.join_world(name)
        with pytest.raises(ServerError) as err:
            channel.destroy_world(name)
        assert err.value.code == wire.FAILED_PRECONDITION
        channel.leave_world()
        channel.destroy_world(name)
        with pytest.raises(ServerError) as err:
            channel.join_world(name)
        assert err.value.code == wire.NOT_FOUND

    def test_destroy_unknown_world(self, channel):
        with pytest.raises(ServerError) as err:
            channel.destroy_world("ghost")
        assert err.value.code == wire.NOT_FOUND

    def test_multiple_worlds_coexist(self, server):
        with client.connect(server.address) as a, client.connect(server.address) as b:
            name_a = a.create_world({"scene": "seek_avoid", "seed": 1})
            name_b = b.create_world({"scene": "block_settle", "seed": 2})
            assert name_a != name_b
            a.join_world(name_a)
            b.join_world(name_b)

    def test_default_scene_applies_to_empty_settings(self, channel):
        name = channel.create_world({})
        specs = channel.join_world(name)
        assert specs.sensor_by_name("PIXELS").shape == (72, 96, 3)

    def test_world_creation_can_be_disabled(self):
        config = ServerConfig(address="127.0.0.1:0", allow_world_creation=False)
        with serve(config) as srv, client.connect(srv.address) as ch:
            with pytest.raises(ServerError) as err:
                ch.create_world({})
            assert err.value.code == wire.FAILED_PRECONDITION


class TestBindAndLimits:
    def test_bind_conflict_raises(self, server):
        with pytest.raises(OSError):
            serve(ServerConfig(address=server.address))

    def test_ipv6_any_address(self):
        with serve(ServerConfig(address="[::]:0")) as srv:
            port = int(srv.address.rpartition(":")[2])
            with client.connect(f"[::1]:{port}") as ch:
                assert ch.create_world({"scene": "seek_avoid"})

    def test_connection_limit(self):
        with serve(ServerConfig(address="127.0.0.1:0", max_connections=1)) as srv:
            keeper = client.connect(srv.address)
            keeper.create_world({"scene": "seek_avoid"})
            rejected = client.connect(srv.address)
            msg = rejected.next_response()
            assert isinstance(msg.body, wire.ErrorResponse)
            assert msg.body.code == wire.FAILED_PRECONDITION
            keeper.close()
            rejected.close()


class TestOrderingAndSequences:
    def test_responses_in_request_order(self, channel):
        _, specs = seek_avoid_world(channel)
        score = specs.sensor_by_name("SCORE").uid
        sequences = [channel.post(wire.StepRequest({}, (score,))) for _ in range(25)]
        got = [channel.next_response() for _ in range(25)]
        assert [m.sequence for m in got] == sequences
        assert all(isinstance(m.body, wire.StepResponse) for m in got)

    def test_pipelined_mixed_kinds_keep_order(self, channel):
        name, specs = seek_avoid_world(channel)
        move = specs.actuator_by_name("MOVE_BACK_FORWARD").uid
        kinds = []
        sequences = []
        for i in range(30):
            if i % 3 == 0:
                sequences.append(channel.post(wire.StepRequest(
                    {move: Tensor.from_scalar(0.5, DType.F32)}, ())))
            elif i % 3 == 1:
                sequences.append(channel.post(wire.StepRequest({}, ())))
            else:
                sequences.append(channel.post(wire.StepRequest({99: Tensor.from_scalar(
                    0.5, DType.F32)}, ())))  # invalid uid: error response
        for seq in sequences:
            msg = channel.next_response()
            assert msg.sequence == seq
            kinds.append(type(msg.body))
        assert wire.ErrorResponse in kinds and wire.StepResponse in kinds

    def test_backpressure_errors_preserve_order(self, server):
        config_server = serve(ServerConfig(address="127.0.0.1:0", queue_depth=4))
        try:
            with client.connect(config_server.address) as ch:
                name = ch.create_world({"scene": "seek_avoid"})
                ch.join_world(name)
                ch.reset()
                sequences = [ch.post(wire.StepRequest({}, ())) for _ in range(40)]
                responses = [ch.next_response() for _ in range(40)]
                assert [m.sequence for m in responses] == sequences
        finally:
            config_server.close()


class TestMultiAgentLockstep:
    def test_four_agents_share_frames(self, server):
        channels = [client.connect(server.address) for _ in range(4)]
        try:
            name = channels[0].create_world({"scene": "seek_avoid", "seed": 1})
            specs = None
            for ch in channels:
                specs = ch.join_world(name)
                ch.reset()
            move = specs.actuator_by_name("MOVE_BACK_FORWARD").uid
            host = server.lookup_world(name)
            start = host.world.clock.frame_index
            rounds = 5
            for _ in range(rounds):
                sequences = [ch.post(wire.StepRequest(
                    {move: Tensor.from_scalar(1.0, DType.F32)}, ())) for ch in channels]
                for ch, seq in zip(channels, sequences):
                    msg = ch.next_response()
                    assert msg.sequence == seq
                    assert isinstance(msg.body, wire.StepResponse)
            # Demand-driven frames: each fully-drained round advances at least
            # one frame (a step answers only after its frame) and at most one
            # per agent, depending on how arrivals coalesce into cycles.
            advanced = host.world.clock.frame_index - start
            assert rounds <= advanced <= rounds * len(channels)
            for ch in channels:
                ch.leave_world()
        finally:
            for ch in channels:
                ch.close()


class TestViolationsAndDisconnects:
    def test_garbage_frame_answers_error_then_closes(self, server):
        sock = socket.create_connection(client.parse_address(server.address))
        sock.sendall(struct.pack("<I", 5) + b"\xee" + b"\x00" * 4)
        frame = b""
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            frame += chunk
        msg = wire.decode_message(frame)
        assert isinstance(msg.body, wire.ErrorResponse)
        assert msg.body.code == wire.INVALID_ARGUMENT
        sock.close()

    def test_violation_does_not_affect_other_channel(self, server):
        with client.connect(server.address) as good:
            seek_avoid_world(good)
            bad = socket.create_connection(client.parse_address(server.address))
            bad.sendall(b"\xff" * 12)
            time.sleep(0.1)
            bad.close()
            response = good.step({}, ())
            assert isinstance(response, wire.StepResponse)

    def test_disconnect_auto_leaves(self, server):
        ch = client.connect(server.address)
        name, _ = seek_avoid_world(ch)
        host = server.lookup_world(name)
        assert host.joined_count() == 1
        ch.close()
        deadline = time.time() + 5
        while host.joined_count() > 0 and time.time() < deadline:
            time.sleep(0.01)
        assert host.joined_count() == 0


class TestCliSurface:
    def test_main_help_mentions_listing_flags(self, capsys):
        with pytest.raises(SystemExit):
            from lockstep.server import main
            main(["--help"])
        out = capsys.readouterr().out
        for flag in ("--uri_address", "--scene", "--seed", "--max_connections",
                     "--logfile"):
            assert flag in out
