import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarm_gridmapper.mapping import (CELL_SIZE, CellState, IndexOutOfRange,
                                      OccupancyGrid, OriginOutOfGrid,
                                      SensorModel, Thresholds, logit,
                                      to_pgm_bytes)
from swarm_gridmapper.world import Pose, WorldModel

from conftest import make_scan

MODEL = SensorModel()
NO_CLAMP = SensorModel(l_max=1e9)


def fresh_grid(extent=(4.0, 4.0)):
    return OccupancyGrid(extent, CELL_SIZE)


def sample_cells_along(x0, y0, x1, y1, res, n=20000):
    """Independent traversal: dense sampling of the segment, collecting every
    crossed cell."""
    ts = np.linspace(0.0, 1.0, n)
    xs = x0 + ts * (x1 - x0)
    ys = y0 + ts * (y1 - y0)
    cells = {(int(math.floor(y / res)), int(math.floor(x / res))) for x, y in zip(xs, ys)}
    return cells


def test_grid_dims_cover_extent():
    g = OccupancyGrid((10.0, 6.0), CELL_SIZE)
    assert g.shape == (90, 150)
    assert OccupancyGrid((60.0 / 6.0, 6.0), CELL_SIZE).shape == (90, 150)


def test_empty_scan_leaves_grid_unchanged():
    g = fresh_grid()
    g.integrate_scan(make_scan((2.0, 2.0), [], [], []), MODEL)
    assert g.count_explored() == 0
    assert np.all(g.log_odds == 0.0)


def test_single_hit_beam_posteriors():
    g = fresh_grid()
    origin = (0.51, 2.03)
    scan = make_scan(origin, [0.0], [1.0], [True])
    g.integrate_scan(scan, MODEL)
    endpoint = g.cell_index(origin[0] + 1.0, origin[1])
    assert g.probability(*endpoint) == pytest.approx(0.8, abs=1e-12)
    traversed = np.argwhere(g.touched)
    p_miss = 1.0 / (1.0 + math.exp(-MODEL.l_miss))
    assert p_miss == pytest.approx(0.35, abs=1e-12)
    for row, col in traversed:
        if (row, col) == endpoint:
            continue
        assert g.probability(row, col) == pytest.approx(p_miss, abs=1e-12)
    # untouched stays at the prior
    assert g.probability(0, 0) == pytest.approx(0.5)
    # origin cell itself is not traversed
    assert not g.touched[g.cell_index(*origin)]


def test_repeated_scan_doubles_endpoint_log_odds():
    g = fresh_grid()
    scan = make_scan((0.51, 2.03), [0.0], [1.0], [True])
    g.integrate_scan(scan, MODEL)
    g.integrate_scan(scan, MODEL)
    endpoint = g.cell_index(1.51, 2.03)
    assert g.log_odds[endpoint] == pytest.approx(2 * MODEL.l_hit)


def test_non_hit_beam_marks_no_endpoint():
    g = fresh_grid()
    origin = (0.51, 2.03)
    g.integrate_scan(make_scan(origin, [0.0], [1.5], [False]), MODEL)
    endpoint = g.cell_index(origin[0] + 1.5, origin[1])
    assert not g.touched[endpoint]
    assert np.all(g.log_odds[g.touched] == MODEL.l_miss)
    # nothing past the miss range
    beyond = g.cell_index(origin[0] + 1.8, origin[1])
    assert not g.touched[beyond]


def test_origin_out_of_grid_raises():
    g = fresh_grid()
    with pytest.raises(OriginOutOfGrid):
        g.integrate_scan(make_scan((5.0, 1.0), [0.0], [1.0], [True]), MODEL)


def test_fuse_scans_skip_and_report():
    g = fresh_grid()
    good = make_scan((1.0, 1.0), [0.0], [1.0], [True], source="g", tick=1)
    bad = make_scan((9.0, 9.0), [0.0], [1.0], [True], source="b", tick=1)
    errors = g.fuse_scans([good, bad], MODEL)
    assert len(errors) == 1
    assert g.count_explored() > 0


def test_fuse_empty_noop():
    g = fresh_grid()
    assert g.fuse_scans([], MODEL) == []
    assert g.count_explored() == 0


def test_fuse_disjoint_scans_order_independent():
    a = make_scan((0.5, 0.5), [0.0], [1.0], [True], source="a", tick=1)
    b = make_scan((3.5, 3.5), [math.pi], [1.0], [True], source="b", tick=1)
    g1, g2 = fresh_grid(), fresh_grid()
    g1.fuse_scans([a, b], MODEL)
    g2.fuse_scans([b, a], MODEL)
    assert np.array_equal(g1.log_odds, g2.log_odds)
    assert np.array_equal(g1.touched, g2.touched)


@given(st.integers(0, 2**32 - 1))
def test_scan_permutation_invariance_without_clamp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    scans = []
    for k in range(n):
        beams = int(rng.integers(1, 6))
        scans.append(make_scan(
            (rng.uniform(0.2, 3.8), rng.uniform(0.2, 3.8)),
            rng.uniform(-math.pi, math.pi, beams),
            rng.uniform(0.05, 2.0, beams),
            rng.random(beams) < 0.7,
            source=f"s{k}", tick=k,
        ))
    perm = list(rng.permutation(n))
    g1, g2 = fresh_grid(), fresh_grid()
    g1.fuse_scans(scans, NO_CLAMP)
    g2.fuse_scans([scans[i] for i in perm], NO_CLAMP)
    assert np.array_equal(g1.log_odds, g2.log_odds)
    assert np.array_equal(g1.touched, g2.touched)


@given(st.integers(0, 2**32 - 1))
def test_clamp_bounds_always_hold(seed):
    rng = np.random.default_rng(seed)
    g = fresh_grid()
    model = SensorModel(l_max=3.0)
    for k in range(20):
        g.integrate_scan(make_scan(
            (rng.uniform(0.2, 3.8), rng.uniform(0.2, 3.8)),
            rng.uniform(-math.pi, math.pi, 4),
            rng.uniform(0.05, 2.0, 4),
            rng.random(4) < 0.7,
            tick=k,
        ), model)
    assert np.all(np.abs(g.log_odds) <= model.l_max)
    p = g.probabilities()
    assert np.all((p > 0.0) & (p < 1.0))


def test_touched_monotone_and_untouched_zero():
    rng = np.random.default_rng(3)
    g = fresh_grid()
    prev = g.touched.copy()
    for k in range(15):
        g.integrate_scan(make_scan(
            (rng.uniform(0.2, 3.8), rng.uniform(0.2, 3.8)),
            rng.uniform(-math.pi, math.pi, 4),
            rng.uniform(0.05, 2.0, 4),
            rng.random(4) < 0.7,
            tick=k,
        ), MODEL)
        assert np.all(prev <= g.touched)
        prev = g.touched.copy()
    assert np.all(g.log_odds[~g.touched] == 0.0)


def test_count_explored_full_sixty_sqm():
    g = OccupancyGrid((10.0, 6.0), CELL_SIZE)
    assert g.rows * g.cols == 13500
    g.touched[:] = True
    assert g.count_explored() == 13500


def test_count_explored_matches_sampling_oracle():
    g = fresh_grid()
    world = WorldModel((4.0, 4.0))
    pose = Pose(1.37, 2.11, 0.43)
    scan = world.cast_scan(pose, 8, 2.0, source="a", tick=1)
    g.integrate_scan(scan, MODEL)

    expected = set()
    orow, ocol = g.cell_index(pose.x, pose.y)
    for k in range(scan.beam_count()):
        ex = pose.x + scan.ranges[k] * math.cos(scan.bearings[k])
        ey = pose.y + scan.ranges[k] * math.sin(scan.bearings[k])
        cells = sample_cells_along(pose.x, pose.y, ex, ey, g.resolution)
        cells.discard((orow, ocol))
        erow, ecol = g.cell_index(ex, ey)
        cells.discard((erow, ecol))
        if scan.hits[k]:
            cells.add((erow, ecol))
        expected |= {(r, c) for r, c in cells if g.in_bounds(r, c)}
    assert {tuple(rc) for rc in np.argwhere(g.touched)} == expected


def test_classify_cell_states():
    g = fresh_grid()
    assert g.classify_cell(0, 0) is CellState.UNKNOWN
    g.log_odds[1, 1] = MODEL.l_max
    assert g.classify_cell(1, 1) is CellState.OCCUPIED
    g.log_odds[2, 2] = logit(0.25)
    assert g.classify_cell(2, 2, Thresholds(p_free=0.35)) is CellState.FREE
    with pytest.raises(IndexOutOfRange):
        g.classify_cell(1000, 0)


def test_classification_array_matches_per_cell():
    rng = np.random.default_rng(5)
    g = fresh_grid((1.0, 1.0))
    g.log_odds[:] = rng.uniform(-3, 3, g.shape)
    cls = g.classification()
    for row in range(g.rows):
        for col in range(g.cols):
            assert cls[row, col] == g.classify_cell(row, col)


def test_pgm_format():
    g = OccupancyGrid((1.0, 2.0), 0.5)  # 4 rows x 2 cols
    g.log_odds[0, 0] = 100.0   # p ~ 1 -> pixel 0, bottom row -> last image row
    g.log_odds[3, 1] = -100.0  # p ~ 0 -> pixel 255, top row -> first image row
    data = to_pgm_bytes(g)
    header, rest = data.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    assert dims == b"2 4"
    maxval, pixels = rest.split(b"\n", 1)
    assert maxval == b"255"
    img = np.frombuffer(pixels, dtype=np.uint8).reshape(4, 2)
    assert img[3, 0] == 0
    assert img[0, 1] == 255
    assert img[1, 0] == 128  # round(255 * 0.5) = 128 under round-half-even
    # byte-stable
    assert to_pgm_bytes(g) == data


def test_sensor_model_validation():
    with pytest.raises(ValueError):
        SensorModel(l_hit=-1.0)
    with pytest.raises(ValueError):
        SensorModel(l_miss=0.5)
    with pytest.raises(ValueError):
        SensorModel(l_max=0.5)
