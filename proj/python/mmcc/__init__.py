"""Monotone backward-sweep policy trainer: Python bindings for the C++ core."""

from ._core import (
    ConfigError,
    __version__,
    dsice_rollout,
    fbsde_oracle,
    heston_oracle,
    lq_value,
    oracle,
    resume,
    run,
    train,
    validate,
)

__all__ = [
    "ConfigError",
    "__version__",
    "dsice_rollout",
    "fbsde_oracle",
    "heston_oracle",
    "lq_value",
    "oracle",
    "resume",
    "run",
    "train",
    "validate",
]
