from .render import (
    FigureSpec,
    SchemaError,
    build_headway_figure,
    build_velocity_figure,
    discover_vehicles,
    read_profile_constants,
    read_series,
    render,
)

__version__ = "0.1.0"
