"""Ground-truth 2D environments: geometry queries, ray casting, wall removal.

A world is a closed rectangular pen containing convex polygonal obstacles and
thin removable walls. Walls are segments dilated by half their thickness
(capsules), so both the point-occupancy test and the exact ray caster see the
same solid. The boundary of the pen is solid: everything outside the extent
counts as occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Slack for boundary-inclusive polygon containment and parallel-ray rejection.
_GEOM_EPS = 1e-12


class OriginOccupied(ValueError):
    """Ray origin lies inside solid geometry."""


class UnknownWallId(ValueError):
    """Topology event references a wall id that does not exist."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Pose:
    """Planar pose in the shared global frame (meters, radians)."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.heading})")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, eq=False)
class Scan:
    """One range-sensor sweep: world-frame beam bearings with measured ranges.

    ``hits[k]`` is False exactly when beam k reached ``max_range`` without
    touching geometry, in which case ``ranges[k]`` equals that max range.
    """

    source_agent: str
    tick: int
    origin: Pose
    bearings: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    floor_id: int = 0
    # per-grid-geometry traversal cache, filled lazily by the mapping layer
    _cell_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (len(self.bearings) == len(self.ranges) == len(self.hits)):
            raise ValueError("beam arrays must have equal length")

    @property
    def key(self) -> tuple[str, int]:
        return (self.source_agent, self.tick)

    def beam_count(self) -> int:
        return len(self.bearings)


@dataclass
class Wall:
    """Removable thin wall: a segment dilated by thickness/2."""

    id: str
    p1: tuple[float, float]
    p2: tuple[float, float]
    thickness: float
    present: bool = True


def _as_ccw_convex(vertices) -> np.ndarray:
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("obstacle needs at least 3 (x, y) vertices")
    # shoelace; flip to counter-clockwise so the inside is left of every edge
    x, y = pts[:, 0], pts[:, 1]
    area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if abs(area2) < 1e-12:
        raise ValueError("degenerate obstacle polygon (zero area)")
    if area2 < 0:
        pts = pts[::-1].copy()
    edges = np.roll(pts, -1, axis=0) - pts
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    if np.any(cross < -1e-9):
        raise ValueError("obstacle polygon is not convex")
    return pts


class WorldModel:
    """Immutable floor geometry; ``remove_wall`` returns a new instance."""

    def __init__(self, extent: tuple[float, float], obstacles=(), walls=(), floor_id: int = 0):
        w, h = float(extent[0]), float(extent[1])
        if not (w > 0 and h > 0):
            raise ValueError(f"extent must be strictly positive, got {extent}")
        self.extent = (w, h)
        self.floor_id = int(floor_id)
        self.obstacles: list[np.ndarray] = [_as_ccw_convex(o) for o in obstacles]
        self.walls: list[Wall] = [
            Wall(str(wl.id), (float(wl.p1[0]), float(wl.p1[1])), (float(wl.p2[0]), float(wl.p2[1])),
                 float(wl.thickness), bool(wl.present))
            for wl in walls
        ]
        seen = set()
        for wl in self.walls:
            if wl.id in seen:
                raise ValueError(f"duplicate wall id {wl.id!r}")
            seen.add(wl.id)
            if wl.thickness <= 0:
                raise ValueError(f"wall {wl.id!r} thickness must be positive")
        self._check_within_extent()
        self._build_primitives()

    def _check_within_extent(self):
        w, h = self.extent
        for poly in self.obstacles:
            if np.any(poly[:, 0] < 0) or np.any(poly[:, 0] > w) or np.any(poly[:, 1] < 0) or np.any(poly[:, 1] > h):
                raise ValueError("obstacle vertex outside world extent")
        for wl in self.walls:
            for px, py in (wl.p1, wl.p2):
                if not (0 <= px <= w and 0 <= py <= h):
                    raise ValueError(f"wall {wl.id!r} endpoint outside world extent")

    def _build_primitives(self):
        """Flatten solid geometry into segment and circle arrays for casting,
        plus plain-float edge lists for the scalar occupancy fast path."""
        w, h = self.extent
        segs = [
            (0.0, 0.0, w, 0.0),
            (w, 0.0, w, h),
            (w, h, 0.0, h),
            (0.0, h, 0.0, 0.0),
        ]
        self._poly_edges = []
        for poly in self.obstacles:
            nxt = np.roll(poly, -1, axis=0)
            segs.extend((p[0], p[1], q[0], q[1]) for p, q in zip(poly, nxt))
            self._poly_edges.append(
                [(float(p[0]), float(p[1]), float(q[0] - p[0]), float(q[1] - p[1]))
                 for p, q in zip(poly, nxt)])
        circles = []
        self._wall_solids = []
        for wl in self.walls:
            if not wl.present:
                continue
            p1 = np.array(wl.p1)
            p2 = np.array(wl.p2)
            d = p2 - p1
            length = math.hypot(*d)
            r = wl.thickness / 2.0
            if length > 1e-12:
                n = np.array([-d[1], d[0]]) / length
                for s in (+1.0, -1.0):
                    a = p1 + s * r * n
                    b = p2 + s * r * n
                    segs.append((a[0], a[1], b[0], b[1]))
            circles.append((p1[0], p1[1], r))
            circles.append((p2[0], p2[1], r))
            self._wall_solids.append((float(p1[0]), float(p1[1]), float(d[0]), float(d[1]),
                                      float(length * length), r))
        self._segs = np.asarray(segs, dtype=float)
        self._circles = np.asarray(circles, dtype=float).reshape(-1, 3)

    # -- occupancy -------------------------------------------------------

    def contains_points(self, points: np.ndarray, include_walls: bool = True) -> np.ndarray:
        """Vectorized solid test for an (N, 2) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w, h = self.extent
        occ = (pts[:, 0] < 0) | (pts[:, 0] > w) | (pts[:, 1] < 0) | (pts[:, 1] > h)
        for poly in self.obstacles:
            nxt = np.roll(poly, -1, axis=0)
            e = nxt - poly
            rel = pts[:, None, :] - poly[None, :, :]
            cross = e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]
            occ |= np.all(cross >= -_GEOM_EPS, axis=1)
        if include_walls:
            for wl in self.walls:
                if not wl.present:
                    continue
                occ |= _segment_distance(pts, wl.p1, wl.p2) <= wl.thickness / 2.0 + _GEOM_EPS
        return occ

    def is_occupied(self, x: float, y: float) -> bool:
        """Scalar solid test; same geometry as contains_points without the
        array machinery (this sits on the per-tick motion path)."""
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("point must be finite")
        w, h = self.extent
        if x < 0.0 or x > w or y < 0.0 or y > h:
            return True
        for edges in self._poly_edges:
            inside = True
            for px, py, ex, ey in edges:
                if ex * (y - py) - ey * (x - px) < -_GEOM_EPS:
                    inside = False
                    break
            if inside:
                return True
        for px, py, dx, dy, len2, r in self._wall_solids:
            rx, ry = x - px, y - py
            t = (rx * dx + ry * dy) / len2 if len2 > 1e-24 else 0.0
            t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
            qx, qy = rx - t * dx, ry - t * dy
            if qx * qx + qy * qy <= (r + _GEOM_EPS) * (r + _GEOM_EPS):
                return True
        return False

    # -- ray casting -----------------------------------------------------

    def _beam_distances(self, ox: float, oy: float, dirs: np.ndarray) -> np.ndarray:
        """Exact distance from (ox, oy) along each unit direction to the
        nearest solid surface (inf when nothing is ahead)."""
        t_best = np.full(len(dirs), np.inf)
        segs = self._segs
        if len(segs):
            p = segs[:, 0:2]
            e = segs[:, 2:4] - p
            rel = p - np.array([ox, oy])
            denom = dirs[:, 0:1] * e[None, :, 1] - dirs[:, 1:2] * e[None, :, 0]
            rel_cross_e = rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = rel_cross_e[None, :] / denom
                s = (rel[None, :, 0] * dirs[:, 1:2] - rel[None, :, 1] * dirs[:, 0:1]) / denom
            ok = (np.abs(denom) > _GEOM_EPS) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
            t = np.where(ok, t, np.inf)
            t_best = np.minimum(t_best, t.min(axis=1))
        circ = self._circles
        if len(circ):
            m = circ[None, :, 0:2] - np.array([ox, oy])
            b = dirs[:, 0:1] * m[:, :, 0] + dirs[:, 1:2] * m[:, :, 1]
            c0 = m[:, :, 0] ** 2 + m[:, :, 1] ** 2 - circ[None, :, 2] ** 2
            disc = b * b - c0
            sq = np.sqrt(np.maximum(disc, 0.0))
            near = b - sq
            far = b + sq
            t = np.where(near >= 0.0, near, np.where(far >= 0.0, far, np.inf))
            t = np.where(disc >= 0.0, t, np.inf)
            t_best = np.minimum(t_best, t.min(axis=1))
        return t_best

    def cast_ray(self, origin: tuple[float, float], bearing: float, max_range: float) -> tuple[float, bool]:
        """Exact range to the nearest surface along ``bearing``.

        Returns ``(max_range, False)`` when nothing lies strictly closer than
        ``max_range``, so a miss always reports the max range exactly.
        """
        ox, oy = float(origin[0]), float(origin[1])
        if max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.is_occupied(ox, oy):
            raise OriginOccupied(f"ray origin ({ox}, {oy}) is inside geometry")
        d = self._beam_distances(ox, oy, np.array([[math.cos(bearing), math.sin(bearing)]]))[0]
        if d < max_range:
            return (float(d), True)
        return (float(max_range), False)

    def cast_scan(self, pose: Pose, beam_count: int, max_range: float,
                  source: str = "", tick: int = 0) -> Scan:
        """Sweep ``beam_count`` evenly spaced beams starting at the heading."""
        if beam_count < 1:
            raise ValueError("beam_count must be >= 1")
        if max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.is_occupied(pose.x, pose.y):
            raise OriginOccupied(f"scan origin ({pose.x}, {pose.y}) is inside geometry")
        bearings = pose.heading + TWO_PI * np.arange(beam_count) / beam_count
        dirs = np.stack([np.cos(bearings), np.sin(bearings)], axis=1)
        dist = self._beam_distances(pose.x, pose.y, dirs)
        hits = dist < max_range
        ranges = np.where(hits, dist, max_range)
        return Scan(source_agent=source, tick=tick, origin=pose,
                    bearings=bearings, ranges=ranges, hits=hits, floor_id=self.floor_id)

    # -- topology --------------------------------------------------------

    def has_wall(self, wall_id: str) -> bool:
        return any(wl.id == wall_id for wl in self.walls)

    def remove_wall(self, wall_id: str) -> "WorldModel":
        """New world with the named wall absent; removing twice is a no-op."""
        if not self.has_wall(wall_id):
            raise UnknownWallId(f"no wall with id {wall_id!r}")
        walls = [Wall(w.id, w.p1, w.p2, w.thickness, w.present and w.id != wall_id) for w in self.walls]
        return WorldModel(self.extent, self.obstacles, walls, self.floor_id)


def _segment_distance(pts: np.ndarray, a, b) -> np.ndarray:
    """Distance from each point to segment a-b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    rel = pts - a
    if denom < 1e-24:
        return np.hypot(rel[:, 0], rel[:, 1])
    t = np.clip((rel @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = pts - proj
    return np.hypot(d[:, 0], d[:, 1])
