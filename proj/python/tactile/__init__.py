"""Synthetic tactile finger, SVAE wrench estimation and force control."""

from ._tactile import *  # noqa: F401,F403
from ._tactile import __version__  # noqa: F401
