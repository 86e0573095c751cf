"""lockstep: a deterministic lockstep simulation server for remote RL agents.

A small, engine-free agent-environment platform: a fixed-timestep
simulation kernel exposed to remote learning agents over a bit-exact
binary protocol, scheduled by a world time manager that keeps multiple
agents' steps aligned to frame boundaries, with headless CPU rendering,
two reference tasks, and a throughput benchmark harness.
"""

from . import envs  # noqa: F401  (registers the reference scenes)
from .wire import (  # noqa: F401
    DType,
    EpisodeStateTag,
    Message,
    SpecSet,
    Tensor,
    decode_message,
    encode_message,
)

__version__ = "0.1.0"
