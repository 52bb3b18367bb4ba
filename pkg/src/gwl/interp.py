"""Piecewise-linear interpolation of a binned entropy estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .histogram import DosHistogram


class DegenerateViewError(ValueError):
    pass


@dataclass(frozen=True)
class InterpView:
    centers: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.centers) != len(self.values):
            raise ValueError("centers and values differ in length")
        if len(self.centers) < 2:
            raise DegenerateViewError("interpolation needs at least 2 bins")
        if np.any(np.diff(self.centers) <= 0):
            raise ValueError("centers must be strictly ascending")

    @classmethod
    def from_histogram(cls, hist: DosHistogram, visited_only: bool = True) -> "InterpView":
        """Knots at the visited bins, or at every bin (unvisited ones with s = 0).

        Spanning unvisited bins puts a slope of size ``s`` between the edge of
        the explored range and an empty neighbour; a gradient proposal then
        keeps pushing towards outputs that may not exist.
        """
        if visited_only:
            keep = hist.visited
            return cls(hist.spec.centers()[keep], hist.s[keep])
        return cls(hist.spec.centers(), hist.s)


def entropy_slope(hist: DosHistogram, z: float) -> float:
    """Slope of the visited-bin interpolation at ``z``; 0 with fewer than two visited bins."""
    idx = np.flatnonzero(hist.visited)
    if len(idx) < 2:
        return 0.0
    spec = hist.spec
    # knot k sits at lo + idx[k] * width
    k = int(np.searchsorted(idx, (z - spec.lo) / spec.width, side="right")) - 1
    k = min(max(k, 0), len(idx) - 2)
    i0, i1 = idx[k], idx[k + 1]
    return float(hist.s[i1] - hist.s[i0]) / ((i1 - i0) * spec.width)


def interp_entropy(view: InterpView, z: float) -> tuple[float, float]:
    """Interpolated entropy and its slope at ``z``.

    Outside the centers the first/last segment is extended.  At an interior
    knot the slope of the segment to the right is returned.
    """
    c, v = view.centers, view.values
    k = int(np.searchsorted(c, z, side="right")) - 1
    k = min(max(k, 0), len(c) - 2)
    slope = (v[k + 1] - v[k]) / (c[k + 1] - c[k])
    if z == c[k + 1]:  # only reachable at the last center
        return float(v[k + 1]), float(slope)
    return float(v[k] + slope * (z - c[k])), float(slope)
