"""Frontier scoring and waypoint selection.

The frontier field applies a Roberts cross (2x2 diagonal differences) to a
scalar rendering of the cell classification (free 0, unknown 0.5, occupied 1)
and keeps the response only where a window mixes free and unknown cells with
no occupied ones. The preference potential then weighs each frontier cell by
proximity to the agent (saturated at a cutoff radius) and by squared distance
from every known neighbor, and the waypoint is the best free cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mapping import CellState, OccupancyGrid, Thresholds
from .world import Pose


class NonpositiveCutoff(ValueError):
    """Cutoff radius must be positive."""


_CLASS_LEVELS = np.array([0.0, 0.5, 1.0])  # FREE, UNKNOWN, OCCUPIED


@dataclass
class FrontierField:
    """Nonnegative edge response per cell; zero away from free/unknown seams."""

    values: np.ndarray


@dataclass
class PotentialField:
    """Waypoint preference score per cell, >= 0 everywhere."""

    values: np.ndarray
    cutoff: float


def frontier_field(grid: OccupancyGrid, thresholds: Thresholds = Thresholds(),
                   classes: np.ndarray | None = None) -> FrontierField:
    cls = grid.classification(thresholds) if classes is None else classes
    c = _CLASS_LEVELS[cls]
    c1 = c[:-1, :-1]
    c2 = c[:-1, 1:]
    c3 = c[1:, :-1]
    c4 = c[1:, 1:]
    g = np.hypot(c1 - c4, c2 - c3)

    free = cls == CellState.FREE
    unk = cls == CellState.UNKNOWN
    occ = cls == CellState.OCCUPIED
    win_free = free[:-1, :-1] | free[:-1, 1:] | free[1:, :-1] | free[1:, 1:]
    win_unk = unk[:-1, :-1] | unk[:-1, 1:] | unk[1:, :-1] | unk[1:, 1:]
    win_occ = occ[:-1, :-1] | occ[:-1, 1:] | occ[1:, :-1] | occ[1:, 1:]

    vf = np.zeros(grid.shape, dtype=np.float64)
    vf[:-1, :-1] = np.where(win_free & win_unk & ~win_occ, g, 0.0)
    return FrontierField(values=vf)


def preference_potential(vf: FrontierField, grid: OccupancyGrid, self_pose: Pose,
                         neighbor_positions, cutoff: float) -> PotentialField:
    """Score every cell center r as

        vf(r) * 1 / min(max(|r - self|, resolution/2), cutoff)
              * prod_j |r - neighbor_j|^2

    An empty neighbor list contributes a factor of 1. Neighbor factors are
    multiplied in list order.
    """
    if cutoff <= 0:
        raise NonpositiveCutoff(f"cutoff must be positive, got {cutoff}")
    X, Y = grid.cell_center_arrays()
    d_self = np.hypot(X - self_pose.x, Y - self_pose.y)
    eps = grid.resolution / 2.0
    denom = np.minimum(np.maximum(d_self, eps), cutoff)
    v = vf.values / denom
    for nx, ny in neighbor_positions:
        v = v * ((X - nx) ** 2 + (Y - ny) ** 2)
    return PotentialField(values=v, cutoff=cutoff)


def select_waypoint(field: PotentialField, grid: OccupancyGrid,
                    thresholds: Thresholds = Thresholds(),
                    classes: np.ndarray | None = None) -> tuple[float, float] | None:
    """Center of the free cell with the highest potential.

    Ties go to the smallest (row, col) index. Returns None when no free cell
    scores above zero, which signals local exploration completion.
    """
    cls = grid.classification(thresholds) if classes is None else classes
    free = cls == CellState.FREE
    masked = np.where(free, field.values, -1.0)
    flat = int(np.argmax(masked))
    if masked.flat[flat] <= 0.0:
        return None
    row, col = np.unravel_index(flat, grid.shape)
    return grid.cell_center(int(row), int(col))
