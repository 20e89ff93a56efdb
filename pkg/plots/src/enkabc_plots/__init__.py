"""Figure rendering for experiment CSV output."""
from .figures import (
    FIGURE_KINDS,
    FigureSpec,
    MissingColumnsError,
    gaussian_kde,
    normal_reference_bandwidth,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "MissingColumnsError",
    "gaussian_kde",
    "normal_reference_bandwidth",
    "render",
]

__version__ = "1.0.0"
