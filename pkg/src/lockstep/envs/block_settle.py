"""Block Settle: a multi-frame settling task exercising step continuations.

The board is a row of columns with integer heights. Each agent step
places one block on a chosen column, then a ball enters at column 0 and
rolls right one column per frame while the next column is no taller than
the current one, coming to rest otherwise or at the last column. The
response is sent only once the ball has settled, so a single step spans
(ball moves + 1) simulation frames. Reaching the last column pays +1 and
terminates the episode; 20 actions without success interrupts it.
"""

from __future__ import annotations

import struct

import numpy as np

from .. import kernel, wire
from ..avatars import Avatar, Task
from ..kernel import Entity, World
from ..session import RequestError
from ..wire import DType, EpisodeStateTag, Tensor

DEFAULT_COLUMNS = 8
MAX_ACTIONS = 20


class Board(Entity):
    def __init__(self, columns: int):
        super().__init__()
        self.heights = [0] * columns

    def state_bytes(self) -> bytes:
        return struct.pack(f"<I{len(self.heights)}i", len(self.heights), *self.heights)


class Ball(Entity):
    """Rolls one column right per frame while the path is level or downhill.

    Declaring rest takes its own frame, so a roll of N moves settles after
    N+1 frames, the placement frame included.
    """

    def __init__(self, board: Board):
        super().__init__()
        self.board = board
        self.column = 0
        self.rolling = False

    def update(self, world: World) -> None:
        if not self.rolling:
            return
        h = self.board.heights
        if self.column == len(h) - 1:
            self.rolling = False
        elif h[self.column + 1] <= h[self.column]:
            self.column += 1
        else:
            self.rolling = False

    def state_bytes(self) -> bytes:
        return struct.pack("<IB", self.column, self.rolling)


def build_scene(world: World, settings: dict) -> None:
    from . import setting_value

    columns = int(setting_value(settings, "columns", DEFAULT_COLUMNS))
    if columns < 2:
        raise kernel.InvalidWorldSettings(
            f"invalid world settings: need at least 2 columns, got {columns}")
    board = world.add_entity(Board(columns))
    world.add_entity(Ball(board))


class BlockSettleTask(Task):
    def __init__(self, board: Board, ball: Ball):
        self._board = board
        self._ball = ball
        self._actions = 0
        self._succeeded = False
        self._pending_column = 0
        self._started = False

    def start_episode(self, world: World, avatar: Avatar) -> None:
        # Re-resolve entities: a world reset replaces the board and ball.
        self._board = world.entities_of(Board)[0]
        self._ball = world.entities_of(Ball)[0]
        self._board.heights = [0] * len(self._board.heights)
        self._ball.column = 0
        self._ball.rolling = False
        self._actions = 0
        self._succeeded = False
        self._started = True

    def on_step(self, world: World, avatar: Avatar) -> None:
        column = self._pending_column
        width = len(self._board.heights)
        if not 0 <= column < width:
            raise RequestError(
                wire.INVALID_ARGUMENT,
                f"column {column} out of range [0, {width})",
            )
        self._board.heights[column] += 1
        self._ball.column = 0
        self._ball.rolling = True
        self._actions += 1

    def is_step_complete(self, world: World, avatar: Avatar) -> bool:
        return not self._ball.rolling

    def reward(self) -> float:
        if self._ball.column == len(self._board.heights) - 1 and not self._ball.rolling:
            self._succeeded = True
            return 1.0
        return 0.0

    def episode_state(self) -> EpisodeStateTag:
        if not self._started:
            return EpisodeStateTag.RUNNING
        if self._succeeded:
            return EpisodeStateTag.TERMINATED
        if self._actions >= MAX_ACTIONS:
            return EpisodeStateTag.INTERRUPTED
        return EpisodeStateTag.RUNNING


def make_session(world: World, agent_id: int, join_settings: dict):
    board = world.entities_of(Board)[0]
    ball = world.entities_of(Ball)[0]
    task = BlockSettleTask(board, ball)
    avatar = Avatar(world)  # abstract avatar: acts on the board, owns no entity

    def place(value: Tensor):
        task._pending_column = int(value.item())

    # Sensors read through the task so they track entity replacement on reset.
    avatar.register_actuator("PLACE_COLUMN", DType.I32, (), None, place)
    avatar.register_sensor(
        "HEIGHTS", DType.I32, (len(board.heights),),
        lambda: Tensor.from_numpy(np.array(task._board.heights, dtype="<i4")),
    )
    avatar.register_sensor(
        "BALL_COLUMN", DType.I32, (),
        lambda: Tensor.from_scalar(task._ball.column, DType.I32),
    )
    return task, avatar


kernel.register_scene(kernel.SceneDef("block_settle", build_scene, make_session))
