"""Brownian-bridge CBCT-to-CT translation with teacher/student self-training."""

from ._bbkd import *  # noqa: F401,F403
from ._bbkd import BbkdError, BridgeSchedule

__all__ = [name for name in dir() if not name.startswith("_")]
