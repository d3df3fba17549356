"""
Cordes Styles - Plot palette and series styles.

This module defines the look of the convergence and mesh figures: the
color palette, one line style per record column and the reference
slopes drawn in every convergence plot.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from matplotlib.colors import to_rgb

# =============================================================================
# COLOR PALETTE
# =============================================================================


class Colors(Enum):
    """Plot palette."""

    # Series
    PRIMARY = "1F4E79"  # Deep blue - H2 error
    SECONDARY = "C55A11"  # Burnt orange - estimator
    TERTIARY = "548235"  # Green - gradient error
    QUATERNARY = "7030A0"  # Purple - L2 error

    # Mesh
    MESH_EDGE = "2F3640"
    MESH_FACE = "F5F6FA"
    HANGING = "C0392B"

    # Neutral colors
    WHITE = "FFFFFF"
    GRAY_300 = "DEE2E6"
    GRAY_600 = "6C757D"

    @property
    def hex(self) -> str:
        """Matplotlib color string."""
        return f"#{self.value}"


# =============================================================================
# SERIES STYLES
# =============================================================================


@dataclass(frozen=True)
class SeriesStyle:
    """Line style of one record column."""

    label: str
    color: Colors
    marker: str = "o"
    linestyle: str = "-"


SERIES: dict[str, SeriesStyle] = {
    "err_h2": SeriesStyle(label="H2 error", color=Colors.PRIMARY, marker="o"),
    "eta": SeriesStyle(label="estimator", color=Colors.SECONDARY, marker="s", linestyle="--"),
    "err_grad": SeriesStyle(label="H1 error", color=Colors.TERTIARY, marker="^"),
    "err_l2": SeriesStyle(label="L2 error", color=Colors.QUATERNARY, marker="v"),
}

# Reference rates in terms of ndof
REFERENCE_SLOPES = (-1.0, -1.5, -2.0)

FIGURE_SIZE = (6.4, 4.8)
MESH_FIGURE_SIZE = (5.0, 5.0)
MESH_LINE_WIDTH = 0.4


def blend(color: Colors, amount: float) -> tuple[float, float, float]:
    """Mix a palette color toward white; ``amount`` in [0, 1]."""
    rgb = np.array(to_rgb(color.hex))
    white = np.array(to_rgb(Colors.WHITE.hex))
    return tuple(float(c) for c in rgb + (white - rgb) * amount)


REFERENCE_COLOR = blend(Colors.GRAY_600, 0.35)
