"""Simulated range-limited mesh: adjacency snapshots and broadcast delivery.

Nodes are mapping agents plus communication-only relay nodes. Two nodes link
when they share a floor and sit within comm range; a declared relay pair also
links across floors. Multi-hop mode closes the link graph transitively, so
connectivity equals same-connected-component. Relays extend connectivity but
never appear in an inbox and never originate scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import Pose, Scan

SINGLE_HOP = "single_hop"
MULTI_HOP = "multi_hop"


class UnknownSender(ValueError):
    """Broadcast sender is not a node of the snapshot."""


@dataclass(frozen=True, eq=False)
class StateBroadcast:
    """Per-tick state message: pose estimate, latest scan, current waypoint."""

    sender: str
    tick: int
    pose: Pose
    scan: Scan
    waypoint: tuple[float, float] | None
    floor_id: int = 0


@dataclass(frozen=True)
class NodeInfo:
    id: str
    x: float
    y: float
    floor_id: int
    is_relay: bool = False


@dataclass
class ConnectivitySnapshot:
    """Symmetric, reflexive adjacency over the nodes present at one tick."""

    tick: int
    node_ids: tuple[str, ...]
    adjacency: np.ndarray
    relay_ids: frozenset[str]

    def index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)

    def connected(self, a: str, b: str) -> bool:
        return bool(self.adjacency[self.index(a), self.index(b)])

    def agent_ids(self) -> list[str]:
        return [n for n in self.node_ids if n not in self.relay_ids]


def compute_connectivity(nodes, comm_range: float, mode: str = MULTI_HOP,
                         bridges=(), tick: int = 0) -> ConnectivitySnapshot:
    """Adjacency over ``nodes`` (NodeInfo list).

    ``bridges`` is a collection of (node_id, node_id) pairs that are linked
    regardless of range or floor (the cross-floor relay pairs). Single-hop
    adjacency is direct links plus the diagonal; multi-hop is reachability.
    """
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    if mode not in (SINGLE_HOP, MULTI_HOP):
        raise ValueError(f"unknown mode {mode!r}")
    ordered = sorted(nodes, key=lambda n: n.id)
    ids = tuple(n.id for n in ordered)
    n = len(ordered)
    link = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = ordered[i], ordered[j]
            if a.floor_id == b.floor_id and math.hypot(a.x - b.x, a.y - b.y) <= comm_range:
                link[i, j] = link[j, i] = True
    present = {nid: k for k, nid in enumerate(ids)}
    for u, v in bridges:
        if u in present and v in present:
            link[present[u], present[v]] = link[present[v], present[u]] = True

    if mode == SINGLE_HOP:
        adj = link.copy()
        np.fill_diagonal(adj, True)
    else:
        adj = _reachability(link)
    relay_ids = frozenset(node.id for node in ordered if node.is_relay)
    return ConnectivitySnapshot(tick=tick, node_ids=ids, adjacency=adj, relay_ids=relay_ids)


def _reachability(link: np.ndarray) -> np.ndarray:
    """Connected components of the undirected link graph by BFS."""
    n = len(link)
    comp = np.full(n, -1, dtype=np.int64)
    cur = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = cur
        while stack:
            u = stack.pop()
            for v in np.nonzero(link[u])[0]:
                if comp[v] < 0:
                    comp[v] = cur
                    stack.append(int(v))
        cur += 1
    return comp[:, None] == comp[None, :]


def deliver_broadcasts(snapshot: ConnectivitySnapshot, outbox, loss_prob: float,
                       rng: np.random.Generator) -> dict[str, list[StateBroadcast]]:
    """Fan broadcasts out to connected agents, dropping each copy with
    probability ``loss_prob``.

    One uniform draw is consumed per connected (sender, receiver) agent pair,
    in (sender id, receiver id) sorted order, so delivery is reproducible for
    a given rng state. Relays never receive.
    """
    if not 0.0 <= loss_prob < 1.0:
        raise ValueError("loss_prob must be in [0, 1)")
    receivers = snapshot.agent_ids()
    inboxes: dict[str, list[StateBroadcast]] = {r: [] for r in receivers}
    for sb in sorted(outbox, key=lambda b: b.sender):
        if sb.sender not in snapshot.node_ids:
            raise UnknownSender(f"sender {sb.sender!r} not in snapshot")
        si = snapshot.index(sb.sender)
        for r in receivers:
            if r == sb.sender or not snapshot.adjacency[si, snapshot.index(r)]:
                continue
            if rng.random() >= loss_prob:
                inboxes[r].append(sb)
    return inboxes


class SensedLog:
    """The growing collection of scans an agent has ever held, keyed by
    (source agent, tick); re-delivery of a known scan is a no-op."""

    def __init__(self):
        self.entries: dict[tuple[str, int], Scan] = {}

    def add(self, scan: Scan) -> None:
        self.entries.setdefault(scan.key, scan)

    def keys(self) -> set[tuple[str, int]]:
        return set(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: tuple[str, int]) -> bool:
        return key in self.entries


def append_sensed_log(log: SensedLog, inbox, own_scan: Scan | None) -> SensedLog:
    """Union this tick's own scan and every delivered scan into the log."""
    if own_scan is not None:
        log.add(own_scan)
    for sb in inbox:
        log.add(sb.scan)
    return log
