"""Interface layer: registration, action application, observation reads."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lockstep import kernel
from lockstep.avatars import (
    ActionError,
    Avatar,
    ObservationError,
    RegistrationError,
    clamp_tensor,
    default_tensor,
)
from lockstep.wire import DType, Tensor


class Rig:
    """A bare avatar with a writable record, no task machinery."""

    def __init__(self):
        self.world = kernel.World("w", "seek_avoid", 0)
        self.avatar = Avatar(self.world)
        self.values = {}

    def store(self, name):
        def hook(tensor: Tensor):
            self.values[name] = tensor.item()
        return hook


@pytest.fixture
def rig():
    return Rig()


class TestRegistration:
    def test_uids_dense_from_one(self, rig):
        uid1 = rig.avatar.register_actuator("MOVE_BACK_FORWARD", DType.F32, (),
                                            (-1.0, 1.0), rig.store("move"))
        uid2 = rig.avatar.register_actuator("JUMP", DType.BOOL, (), None,
                                            rig.store("jump"))
        assert (uid1, uid2) == (1, 2)

    def test_duplicate_actuator_name_rejected(self, rig):
        rig.avatar.register_actuator("JUMP", DType.BOOL)
        with pytest.raises(RegistrationError, match="duplicate"):
            rig.avatar.register_actuator("JUMP", DType.BOOL)

    def test_sensor_uids_separate_namespace(self, rig):
        rig.avatar.register_actuator("MOVE", DType.F32)
        uid = rig.avatar.register_sensor("SCORE", DType.F32, (),
                                         lambda: Tensor.from_scalar(0.0, DType.F32))
        assert uid == 1

    def test_transform_sensor_advertises_12_elements(self, rig):
        rig.avatar.register_sensor("TRANSFORM", DType.F64, (3, 4),
                                   lambda: Tensor.from_numpy(np.eye(3, 4)))
        spec = rig.avatar.spec_set().sensor_by_name("TRANSFORM")
        assert spec.shape == (3, 4)
        assert np.prod(spec.shape) == 12

    def test_spec_set_reflects_registration_order(self, rig):
        for name in ("MOVE_BACK_FORWARD", "STRAFE_LEFT_RIGHT", "LOOK_LEFT_RIGHT"):
            rig.avatar.register_actuator(name, DType.F32, (), (-1.0, 1.0))
        specs = rig.avatar.spec_set()
        assert [a.name for a in specs.actuators] == [
            "MOVE_BACK_FORWARD", "STRAFE_LEFT_RIGHT", "LOOK_LEFT_RIGHT"]
        assert [a.uid for a in specs.actuators] == [1, 2, 3]

    def test_invalid_bounds_rejected(self, rig):
        with pytest.raises(RegistrationError):
            rig.avatar.register_actuator("X", DType.F32, (), (1.0, -1.0))


class TestApplyActions:
    @pytest.fixture
    def move_jump(self, rig):
        rig.avatar.register_actuator("MOVE", DType.F32, (), (-1.0, 1.0), rig.store("move"))
        rig.avatar.register_actuator("JUMP", DType.BOOL, (), None, rig.store("jump"))
        return rig

    def test_sparse_defaults(self, move_jump):
        move_jump.avatar.apply_actions({1: Tensor.from_scalar(0.5, DType.F32)})
        assert move_jump.values == {"move": 0.5, "jump": False}

    def test_out_of_range_clamped(self, move_jump):
        move_jump.avatar.apply_actions({1: Tensor.from_scalar(7.0, DType.F32)})
        assert move_jump.values["move"] == 1.0

    def test_unknown_uid_atomic(self, move_jump):
        move_jump.avatar.apply_actions({1: Tensor.from_scalar(0.5, DType.F32)})
        with pytest.raises(ActionError, match="unknown actuator uid 99"):
            move_jump.avatar.apply_actions({
                1: Tensor.from_scalar(-0.5, DType.F32),
                99: Tensor.from_scalar(0.0, DType.F32),
            })
        assert move_jump.values["move"] == 0.5  # nothing was applied

    def test_dtype_mismatch_rejected(self, move_jump):
        with pytest.raises(ActionError, match="dtype"):
            move_jump.avatar.apply_actions({1: Tensor.from_scalar(1, DType.I64)})

    def test_shape_mismatch_rejected(self, move_jump):
        with pytest.raises(ActionError, match="shape"):
            move_jump.avatar.apply_actions(
                {1: Tensor.from_numpy(np.zeros(2, dtype="<f4"))})

    def test_strict_mode_rejects_out_of_range(self, move_jump):
        move_jump.avatar.strict_bounds = True
        with pytest.raises(ActionError, match="outside bounds"):
            move_jump.avatar.apply_actions({1: Tensor.from_scalar(2.0, DType.F32)})

    def test_defaults_rewritten_each_step(self, move_jump):
        move_jump.avatar.apply_actions({2: Tensor.from_scalar(True, DType.BOOL)})
        assert move_jump.values == {"move": 0.0, "jump": True}
        move_jump.avatar.apply_actions({1: Tensor.from_scalar(0.1, DType.F32)})
        assert move_jump.values["jump"] is False

    @settings(max_examples=100, deadline=None)
    @given(st.floats(allow_nan=False, allow_infinity=False, width=32))
    def test_clamp_idempotent(self, value):
        bounds = (-1.0, 1.0)
        once = clamp_tensor(Tensor.from_scalar(value, DType.F32), bounds)
        twice = clamp_tensor(once, bounds)
        assert once == twice
        assert -1.0 <= once.item() <= 1.0


class TestDefaults:
    @pytest.mark.parametrize("dtype,expected", [
        (DType.F32, 0.0),
        (DType.I64, 0),
        (DType.BOOL, False),
        (DType.STRING, ""),
    ])
    def test_scalar_defaults(self, dtype, expected):
        assert default_tensor(dtype, ()).item() == expected

    def test_vector_default_is_zeros(self):
        assert (default_tensor(DType.F32, (3,)).to_numpy() == 0).all()


class TestReadObservations:
    @pytest.fixture
    def sensed(self, rig):
        state = {"score": 2.5}
        rig.state = state
        rig.avatar.register_sensor("SCORE", DType.F32, (),
                                   lambda: Tensor.from_scalar(state["score"], DType.F32))
        rig.avatar.register_sensor("ACCELERATION", DType.F32, (3,),
                                   lambda: Tensor.from_numpy(np.zeros(3, dtype="<f4")))
        return rig

    def test_requested_subset(self, sensed):
        out = sensed.avatar.read_observations((1,))
        assert set(out) == {1}
        assert out[1].item() == 2.5

    def test_empty_request_empty_map(self, sensed):
        assert sensed.avatar.read_observations(()) == {}

    def test_unknown_uid_rejected(self, sensed):
        with pytest.raises(ObservationError, match="unknown sensor uid"):
            sensed.avatar.read_observations((1, 99))

    def test_reads_are_pure(self, sensed):
        first = sensed.avatar.read_observations((1, 2))
        second = sensed.avatar.read_observations((1, 2))
        assert first == second

    def test_spec_fidelity_enforced(self, rig):
        rig.avatar.register_sensor("BAD", DType.F32, (2,),
                                   lambda: Tensor.from_scalar(0.0, DType.F32))
        with pytest.raises(ObservationError, match="spec"):
            rig.avatar.read_observations((1,))
