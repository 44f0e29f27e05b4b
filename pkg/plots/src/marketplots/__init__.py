"""Figure rendering for trial-offer market simulation outputs."""

from .figures import (
    POLICY_COLORS,
    POLICY_LABELS,
    FigureInputError,
    FigureSpec,
    plot_efficiency,
    plot_profile,
    render,
)

__version__ = "0.1.0"
