import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarm_gridmapper.network import (MULTI_HOP, SINGLE_HOP, ConnectivitySnapshot,
                                      NodeInfo, SensedLog, StateBroadcast,
                                      UnknownSender, append_sensed_log,
                                      compute_connectivity, deliver_broadcasts)
from swarm_gridmapper.world import Pose

from conftest import make_scan


def agent_node(nid, x, y, floor=0):
    return NodeInfo(nid, x, y, floor)


def bcast(sender, tick, x=0.0, y=0.0, floor=0):
    return StateBroadcast(sender=sender, tick=tick, pose=Pose(x, y),
                          scan=make_scan((x, y), [0.0], [1.0], [False],
                                         source=sender, tick=tick, floor_id=floor),
                          waypoint=None, floor_id=floor)


def closure_oracle(link: np.ndarray) -> np.ndarray:
    """Independent transitive closure by repeated boolean matrix products."""
    n = len(link)
    reach = link | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return reach


def test_single_agent_snapshot_is_reflexive():
    snap = compute_connectivity([agent_node("a", 1.0, 1.0)], 3.0, MULTI_HOP)
    assert snap.node_ids == ("a",)
    assert snap.adjacency.shape == (1, 1)
    assert snap.adjacency[0, 0]


def test_two_agents_within_range_linked():
    snap = compute_connectivity(
        [agent_node("a", 0.0, 0.0), agent_node("b", 1.0, 0.0)], 3.0, SINGLE_HOP)
    assert snap.connected("a", "b")


def test_chain_multihop_vs_singlehop():
    nodes = [agent_node("a", 0.0, 0.0), agent_node("b", 2.0, 0.0), agent_node("c", 4.0, 0.0)]
    multi = compute_connectivity(nodes, 3.0, MULTI_HOP)
    single = compute_connectivity(nodes, 3.0, SINGLE_HOP)
    assert multi.connected("a", "c")
    assert not single.connected("a", "c")
    assert single.connected("a", "b") and single.connected("b", "c")


def test_different_floor_needs_bridge():
    nodes = [agent_node("a", 1.0, 1.0, floor=1), agent_node("b", 1.0, 1.0, floor=2)]
    snap = compute_connectivity(nodes, 3.0, MULTI_HOP)
    assert not snap.connected("a", "b")

    nodes += [NodeInfo("r1", 1.0, 2.0, 1, is_relay=True),
              NodeInfo("r2", 1.0, 2.0, 2, is_relay=True)]
    snap2 = compute_connectivity(nodes, 3.0, MULTI_HOP, bridges=[("r1", "r2")])
    assert snap2.connected("a", "b")
    assert snap2.relay_ids == {"r1", "r2"}
    single = compute_connectivity(nodes, 3.0, SINGLE_HOP, bridges=[("r1", "r2")])
    assert single.connected("r1", "r2")
    assert not single.connected("a", "b")


@given(st.integers(0, 2**32 - 1))
def test_adjacency_symmetric_reflexive_and_closure(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    nodes = [agent_node(f"n{k}", rng.uniform(0, 6), rng.uniform(0, 6)) for k in range(n)]
    single = compute_connectivity(nodes, 2.0, SINGLE_HOP)
    multi = compute_connectivity(nodes, 2.0, MULTI_HOP)
    for snap in (single, multi):
        assert np.array_equal(snap.adjacency, snap.adjacency.T)
        assert np.all(np.diag(snap.adjacency))
    link = single.adjacency.copy()
    np.fill_diagonal(link, False)
    assert np.array_equal(multi.adjacency, closure_oracle(link))


def test_lossless_delivery_fully_connected(rng):
    nodes = [agent_node(n, 0.0, 0.0) for n in ("a", "b", "c")]
    snap = compute_connectivity(nodes, 3.0, MULTI_HOP)
    outbox = [bcast(n, 1) for n in ("a", "b", "c")]
    inboxes = deliver_broadcasts(snap, outbox, 0.0, rng)
    assert {k: len(v) for k, v in inboxes.items()} == {"a": 2, "b": 2, "c": 2}
    assert all(sb.sender != aid for aid, box in inboxes.items() for sb in box)


def test_near_certain_loss_reproducible(rng):
    nodes = [agent_node(n, 0.0, 0.0) for n in ("a", "b", "c")]
    snap = compute_connectivity(nodes, 3.0, MULTI_HOP)
    outbox = [bcast(n, 1) for n in ("a", "b", "c")]
    loss = 1.0 - 1e-9
    first = deliver_broadcasts(snap, outbox, loss, np.random.default_rng(77))
    again = deliver_broadcasts(snap, outbox, loss, np.random.default_rng(77))
    assert sum(len(v) for v in first.values()) == 0
    assert {k: [sb.sender for sb in v] for k, v in first.items()} == \
           {k: [sb.sender for sb in v] for k, v in again.items()}


def test_disconnected_pair_never_delivers(rng):
    nodes = [agent_node("a", 0.0, 0.0), agent_node("b", 9.0, 9.0)]
    snap = compute_connectivity(nodes, 2.0, MULTI_HOP)
    inboxes = deliver_broadcasts(snap, [bcast("a", 1), bcast("b", 1)], 0.0, rng)
    assert inboxes == {"a": [], "b": []}


def test_relays_never_receive(rng):
    nodes = [agent_node("a", 0.0, 0.0), NodeInfo("r", 0.5, 0.0, 0, is_relay=True)]
    snap = compute_connectivity(nodes, 2.0, MULTI_HOP)
    inboxes = deliver_broadcasts(snap, [bcast("a", 1)], 0.0, rng)
    assert set(inboxes) == {"a"}


def test_unknown_sender_rejected(rng):
    snap = compute_connectivity([agent_node("a", 0.0, 0.0)], 2.0, MULTI_HOP)
    with pytest.raises(UnknownSender):
        deliver_broadcasts(snap, [bcast("ghost", 1)], 0.0, rng)


def test_sensed_log_isolated_agent():
    log = SensedLog()
    for t in range(1, 6):
        append_sensed_log(log, [], make_scan((1, 1), [0.0], [1.0], [False], source="a", tick=t))
    assert log.keys() == {("a", t) for t in range(1, 6)}


def test_sensed_log_single_contact_tick():
    log_a, log_b = SensedLog(), SensedLog()
    for t in range(1, 6):
        inbox_a = [bcast("b", t)] if t == 3 else []
        inbox_b = [bcast("a", t)] if t == 3 else []
        append_sensed_log(log_a, inbox_a, make_scan((0, 0), [0.0], [1.0], [False], source="a", tick=t))
        append_sensed_log(log_b, inbox_b, make_scan((0, 0), [0.0], [1.0], [False], source="b", tick=t))
    assert {k for k in log_a.keys() if k[0] != "a"} == {("b", 3)}
    assert {k for k in log_b.keys() if k[0] != "b"} == {("a", 3)}


def test_sensed_log_duplicate_delivery_noop():
    log = SensedLog()
    sb = bcast("b", 4)
    append_sensed_log(log, [sb, sb], None)
    append_sensed_log(log, [sb], None)
    assert len(log) == 1
    assert ("b", 4) in log


def test_invalid_inputs():
    with pytest.raises(ValueError):
        compute_connectivity([], 0.0, MULTI_HOP)
    with pytest.raises(ValueError):
        compute_connectivity([], 1.0, "warp")
    snap = compute_connectivity([agent_node("a", 0, 0)], 1.0, MULTI_HOP)
    with pytest.raises(ValueError):
        deliver_broadcasts(snap, [], 1.0, np.random.default_rng(0))
