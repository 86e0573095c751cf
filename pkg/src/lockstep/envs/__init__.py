"""Reference environments; importing this package registers their scenes."""

from . import block_settle, seek_avoid  # noqa: F401  (self-registering)
from ..wire import Tensor


def setting_value(settings: dict, key: str, default):
    """Read a scalar setting that may arrive as a wire Tensor or a plain value."""
    value = settings.get(key, default)
    if isinstance(value, Tensor):
        return value.item()
    return value
