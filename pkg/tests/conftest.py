import math

import numpy as np
import pytest
from hypothesis import settings

from swarm_gridmapper.world import Pose, Scan, WorldModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def make_scan(origin, bearings, ranges, hits, source="s", tick=0, floor_id=0):
    return Scan(
        source_agent=source,
        tick=tick,
        origin=origin if isinstance(origin, Pose) else Pose(*origin),
        bearings=np.asarray(bearings, dtype=float),
        ranges=np.asarray(ranges, dtype=float),
        hits=np.asarray(hits, dtype=bool),
        floor_id=floor_id,
    )


def march_ray(world: WorldModel, origin, bearing, max_range, step=1e-3):
    """Brute-force ray caster: walk the ray in small steps until a point
    tests occupied."""
    ox, oy = origin
    c, s = math.cos(bearing), math.sin(bearing)
    n = int(max_range / step)
    ts = step * np.arange(1, n + 1)
    pts = np.stack([ox + ts * c, oy + ts * s], axis=1)
    occ = world.contains_points(pts)
    idx = np.nonzero(occ)[0]
    if len(idx) == 0:
        return (max_range, False)
    return (float(ts[idx[0]]), True)


def expected_sensed_keys(trace, agent_id):
    """Reconstruct the scan set each agent must hold under lossless delivery:
    the union over ticks of scans from every connected agent (self included)."""
    expected = set()
    for rec in trace.records:
        snap = rec.snapshot
        if agent_id not in snap.node_ids:
            continue
        agents = snap.agent_ids()
        i = snap.index(agent_id)
        for j in agents:
            if snap.adjacency[i, snap.index(j)]:
                expected.add((j, rec.tick))
    return expected


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
