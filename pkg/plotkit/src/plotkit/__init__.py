"""Offline rendering of exported racing-game runs into comparison figures."""

from .readers import (
    SchemaError,
    Trajectory,
    check_same_schema,
    expected_header,
    load_metadata,
    load_trajectory,
    meta_path_for,
)
from .render import KINDS, PlotSpec, render

__version__ = "0.1.0"
