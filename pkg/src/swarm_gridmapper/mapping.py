"""Per-agent Bayesian occupancy grids in log-odds form.

Every cell starts at log-odds 0 (prior probability 0.5). Integrating a scan
adds a negative increment to each cell a beam traverses and a positive
increment to a hit beam's endpoint cell, then clamps. ``touched`` records
which cells were ever updated and is the basis of the explored-cell count.

Grid indexing convention used across the package: ``(row, col)`` with
``row = floor(y / resolution)`` and ``col = floor(x / resolution)``, so row 0
is the bottom of the world. PGM export flips rows (image row 0 = max y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .world import Scan, WorldModel

CELL_SIZE = 1.0 / 15.0


class OriginOutOfGrid(ValueError):
    """Scan origin falls outside the grid."""


class IndexOutOfRange(IndexError):
    """Cell index outside grid dims."""


class CellState(IntEnum):
    FREE = 0
    UNKNOWN = 1
    OCCUPIED = 2


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class SensorModel:
    """Inverse sensor model: log-odds increments and the saturation clamp."""

    l_hit: float = logit(0.8)
    l_miss: float = logit(0.35)
    l_max: float = 10.0

    def __post_init__(self):
        if not self.l_hit > 0:
            raise ValueError("l_hit must be positive")
        if not self.l_miss < 0:
            raise ValueError("l_miss must be negative")
        if not self.l_max > max(abs(self.l_hit), abs(self.l_miss)):
            raise ValueError("l_max must exceed both increments")


@dataclass(frozen=True)
class Thresholds:
    """Probability cutoffs for the occupied/free/unknown classification."""

    p_occupied: float = 0.65
    p_free: float = 0.35

    def __post_init__(self):
        if not (0.0 < self.p_free < 0.5 < self.p_occupied < 1.0):
            raise ValueError("need 0 < p_free < 0.5 < p_occupied < 1")

    @property
    def lo_occupied(self) -> float:
        return logit(self.p_occupied)

    @property
    def lo_free(self) -> float:
        return logit(self.p_free)


@dataclass(frozen=True)
class ScanCells:
    """Grid cells a scan updates: traversed (free evidence) and hit endpoints.

    Traversed indices may repeat across beams; each occurrence is one
    increment.
    """

    free_rows: np.ndarray
    free_cols: np.ndarray
    hit_rows: np.ndarray
    hit_cols: np.ndarray


def _gridline_crossings(a0: float, a1: float, res: float) -> np.ndarray:
    """Parameters t in (0, 1) where a0 + t*(a1-a0) crosses multiples of res."""
    lo, hi = (a0, a1) if a0 <= a1 else (a1, a0)
    k0 = math.floor(lo / res) + 1
    k1 = math.ceil(hi / res) - 1
    if k1 < k0:
        return np.empty(0)
    ks = np.arange(k0, k1 + 1, dtype=float) * res
    t = (ks - a0) / (a1 - a0)
    return t[(t > 0.0) & (t < 1.0)]


def _beam_cells(x0: float, y0: float, x1: float, y1: float, res: float) -> np.ndarray:
    """Supercover traversal: every cell whose interior the segment crosses,
    in order from origin to endpoint, as an (N, 2) array of (row, col)."""
    ts = [np.array([0.0, 1.0])]
    if x1 != x0:
        ts.append(_gridline_crossings(x0, x1, res))
    if y1 != y0:
        ts.append(_gridline_crossings(y0, y1, res))
    t = np.unique(np.concatenate(ts))
    mid = (t[:-1] + t[1:]) / 2.0
    keep = (t[1:] - t[:-1]) > 1e-12
    mid = mid[keep]
    mx = x0 + mid * (x1 - x0)
    my = y0 + mid * (y1 - y0)
    rows = np.floor(my / res).astype(np.int64)
    cols = np.floor(mx / res).astype(np.int64)
    cells = np.stack([rows, cols], axis=1)
    if len(cells) > 1:
        dedup = np.ones(len(cells), dtype=bool)
        dedup[1:] = np.any(cells[1:] != cells[:-1], axis=1)
        cells = cells[dedup]
    return cells


class OccupancyGrid:
    """Log-odds grid covering a rectangular extent at fixed resolution."""

    def __init__(self, extent: tuple[float, float], resolution: float = CELL_SIZE, owner: str = ""):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.extent = (float(extent[0]), float(extent[1]))
        self.rows = int(math.ceil(self.extent[1] / self.resolution - 1e-9))
        self.cols = int(math.ceil(self.extent[0] / self.resolution - 1e-9))
        self.owner = owner
        self.log_odds = np.zeros((self.rows, self.cols), dtype=np.float64)
        self.touched = np.zeros((self.rows, self.cols), dtype=bool)
        self._centers: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.extent, self.resolution, self.owner)
        g.log_odds = self.log_odds.copy()
        g.touched = self.touched.copy()
        return g

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution)))

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.resolution, (row + 0.5) * self.resolution)

    def cell_center_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of cell-center coordinates, cached."""
        if self._centers is None:
            xs = (np.arange(self.cols) + 0.5) * self.resolution
            ys = (np.arange(self.rows) + 0.5) * self.resolution
            X, Y = np.meshgrid(xs, ys)
            self._centers = (X, Y)
        return self._centers

    # -- updates ---------------------------------------------------------

    def scan_cells(self, scan: Scan) -> ScanCells:
        """Resolve a scan to the cells it updates on this grid geometry.

        Cached on the scan so many receivers of the same broadcast share one
        traversal. Cells outside the grid are dropped.
        """
        key = (self.rows, self.cols, self.resolution)
        cached = scan._cell_cache.get(key)
        if cached is not None:
            return cached
        ox, oy = scan.origin.x, scan.origin.y
        orow, ocol = self.cell_index(ox, oy)
        free_r: list[np.ndarray] = []
        free_c: list[np.ndarray] = []
        hit_r: list[int] = []
        hit_c: list[int] = []
        cos = np.cos(scan.bearings)
        sin = np.sin(scan.bearings)
        for k in range(scan.beam_count()):
            r = float(scan.ranges[k])
            ex = ox + r * cos[k]
            ey = oy + r * sin[k]
            erow, ecol = self.cell_index(ex, ey)
            cells = _beam_cells(ox, oy, ex, ey, self.resolution)
            between = cells[
                ~(((cells[:, 0] == orow) & (cells[:, 1] == ocol))
                  | ((cells[:, 0] == erow) & (cells[:, 1] == ecol)))
            ]
            inb = ((between[:, 0] >= 0) & (between[:, 0] < self.rows)
                   & (between[:, 1] >= 0) & (between[:, 1] < self.cols))
            between = between[inb]
            free_r.append(between[:, 0])
            free_c.append(between[:, 1])
            if scan.hits[k] and self.in_bounds(erow, ecol):
                hit_r.append(erow)
                hit_c.append(ecol)
        cells = ScanCells(
            free_rows=np.concatenate(free_r) if free_r else np.empty(0, dtype=np.int64),
            free_cols=np.concatenate(free_c) if free_c else np.empty(0, dtype=np.int64),
            hit_rows=np.asarray(hit_r, dtype=np.int64),
            hit_cols=np.asarray(hit_c, dtype=np.int64),
        )
        scan._cell_cache[key] = cells
        return cells

    def integrate_scan(self, scan: Scan, model: SensorModel) -> None:
        """Apply one scan: traversed cells get l_miss, hit endpoints l_hit,
        then clamp to +-l_max. Raises OriginOutOfGrid if the origin is off-grid."""
        orow, ocol = self.cell_index(scan.origin.x, scan.origin.y)
        if not self.in_bounds(orow, ocol):
            raise OriginOutOfGrid(f"scan origin ({scan.origin.x}, {scan.origin.y}) outside grid")
        cells = self.scan_cells(scan)
        np.add.at(self.log_odds, (cells.free_rows, cells.free_cols), model.l_miss)
        np.add.at(self.log_odds, (cells.hit_rows, cells.hit_cols), model.l_hit)
        np.clip(self.log_odds, -model.l_max, model.l_max, out=self.log_odds)
        self.touched[cells.free_rows, cells.free_cols] = True
        self.touched[cells.hit_rows, cells.hit_cols] = True

    def fuse_scans(self, scans, model: SensorModel) -> list[OriginOutOfGrid]:
        """Fold scans into the grid; a scan whose origin is off-grid is
        skipped and reported, the rest are applied."""
        errors: list[OriginOutOfGrid] = []
        for scan in scans:
            try:
                self.integrate_scan(scan, model)
            except OriginOutOfGrid as err:
                errors.append(err)
        return errors

    # -- queries ---------------------------------------------------------

    def probability(self, row: int, col: int) -> float:
        if not self.in_bounds(row, col):
            raise IndexOutOfRange(f"cell ({row}, {col}) outside {self.shape}")
        return 1.0 / (1.0 + math.exp(-self.log_odds[row, col]))

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def classify_cell(self, row: int, col: int, thresholds: Thresholds = Thresholds()) -> CellState:
        if not self.in_bounds(row, col):
            raise IndexOutOfRange(f"cell ({row}, {col}) outside {self.shape}")
        lo = self.log_odds[row, col]
        if lo >= thresholds.lo_occupied:
            return CellState.OCCUPIED
        if lo <= thresholds.lo_free:
            return CellState.FREE
        return CellState.UNKNOWN

    def classification(self, thresholds: Thresholds = Thresholds()) -> np.ndarray:
        """Whole-grid CellState codes (int8), same comparisons as classify_cell."""
        out = np.full(self.shape, CellState.UNKNOWN, dtype=np.int8)
        out[self.log_odds >= thresholds.lo_occupied] = CellState.OCCUPIED
        out[self.log_odds <= thresholds.lo_free] = CellState.FREE
        return out

    def count_explored(self) -> int:
        return int(self.touched.sum())


def grid_for_world(world: WorldModel, resolution: float = CELL_SIZE, owner: str = "") -> OccupancyGrid:
    return OccupancyGrid(world.extent, resolution, owner)


def to_pgm_bytes(grid: OccupancyGrid) -> bytes:
    """Binary P5 image of the occupancy posterior, pixel = round(255*(1-p)),
    image row 0 = top of the world (max y)."""
    p = grid.probabilities()
    img = np.rint(255.0 * (1.0 - p)).astype(np.uint8)[::-1]
    header = f"P5\n{grid.cols} {grid.rows}\n255\n".encode("ascii")
    return header + img.tobytes()
