"""Python bindings of the kinplan C++ core."""

from ._core import (
    Config,
    ConfigError,
    Error,
    FormatError,
    OccupancyGrid,
    PlannerParams,
    Pose2,
    Scenario,
    archetypes,
    generate,
    load_grid,
    load_params,
    max_step_curvature,
    navigate,
    plan,
    raycast,
    save_grid,
    save_params,
    track,
    train,
    wrap_angle,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "FormatError",
    "OccupancyGrid",
    "PlannerParams",
    "Pose2",
    "Scenario",
    "archetypes",
    "generate",
    "load_grid",
    "load_params",
    "max_step_curvature",
    "navigate",
    "plan",
    "raycast",
    "save_grid",
    "save_params",
    "track",
    "train",
    "wrap_angle",
]
