"""Masked one-hidden-layer ReLU learning and pruning."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
