"""Agent control loop and the deterministic simulation pipeline.

Each tick runs fixed phases: (a) scripted events, (b) sensing, (c) one
synchronous broadcast exchange over the current connectivity, (d) per-agent
map update and waypoint selection, (e) motion with exact geometric blocking,
(f) trace recording. Agents only ever read the immutable world, their own
state, and the inbox materialized in (c), so iteration order within a phase
cannot change the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exploration import frontier_field, preference_potential, select_waypoint
from .mapping import OccupancyGrid, OriginOutOfGrid, SensorModel, Thresholds
from .network import (ConnectivitySnapshot, NodeInfo, SensedLog, StateBroadcast,
                      append_sensed_log, compute_connectivity, deliver_broadcasts)
from .scenario import (AgentSpec, Event, InjectAgent, KillAgent, RemoveWall,
                       ScenarioScript, SimParams)
from .world import Pose, Scan, WorldModel, wrap_angle

NAV_GOTO = "go_to_goal"
NAV_AVOID = "avoid_contour"
NAV_IDLE = "idle"

# heading controller and contour-following gains
OMEGA_MAX = 2.5          # rad/s
K_HEADING = 4.0
K_FOLLOW = 6.0
CORNER_TURN = 1.5        # rad/s curvature toward a lost contour
FORWARD_HALF_ANGLE = math.pi / 4.0
# contact standoff so a blocked step never lands exactly on a surface
CONTACT_EPS = 1e-6


class ScriptViolation(ValueError):
    """Scenario event invalid at application time."""


@dataclass
class AgentState:
    id: str
    floor_id: int
    true_pose: Pose
    estimated_pose: Pose
    grid: OccupancyGrid
    sensed_log: SensedLog = field(default_factory=SensedLog)
    waypoint: tuple[float, float] | None = None
    nav_mode: str = NAV_IDLE
    alive: bool = True
    speed_limit: float = 0.3
    last_scan: Scan | None = None
    # latest same-floor broadcast per neighbor: sender -> (tick, x, y)
    neighbor_table: dict[str, tuple[int, float, float]] = field(default_factory=dict)
    avoid_side: int = 0
    avoid_entry_dist: float = math.inf


def _forward_min(scan: Scan, heading: float) -> tuple[float, float]:
    """(min hit range, relative bearing of that hit) in the +-45 deg sector."""
    best = math.inf
    best_rel = 0.0
    for k in range(scan.beam_count()):
        if not scan.hits[k]:
            continue
        rel = wrap_angle(float(scan.bearings[k]) - heading)
        if abs(rel) <= FORWARD_HALF_ANGLE + 1e-9 and scan.ranges[k] < best:
            best = float(scan.ranges[k])
            best_rel = rel
    return best, best_rel


def _side_min(scan: Scan, heading: float, side: int) -> float:
    """Closest hit in the lateral sector on the given side (+1 left, -1 right)."""
    best = math.inf
    for k in range(scan.beam_count()):
        if not scan.hits[k]:
            continue
        rel = wrap_angle(float(scan.bearings[k]) - heading) * side
        if math.radians(15.0) < rel < math.radians(150.0):
            best = min(best, float(scan.ranges[k]))
    return best


def _goto_command(agent: AgentState, params: SimParams) -> tuple[float, float]:
    pose = agent.estimated_pose
    wx, wy = agent.waypoint
    dist = math.hypot(wx - pose.x, wy - pose.y)
    err = wrap_angle(math.atan2(wy - pose.y, wx - pose.x) - pose.heading)
    w = max(-OMEGA_MAX, min(OMEGA_MAX, K_HEADING * err))
    v = min(agent.speed_limit, dist / params.tick_s) * max(0.0, math.cos(err))
    return (v, w)


def navigate(agent: AgentState, scan: Scan, params: SimParams) -> tuple[float, float]:
    """Motion command toward the waypoint with reactive contour avoidance.

    Go-to-goal steers proportionally at the heading error; a forward-sector
    hit closer than d_safe switches to contour following away from the
    blocked side. Contour mode ends once the forward sector is clear (with
    hysteresis) and the agent is nearer the waypoint than at contour entry.
    """
    if not agent.alive or agent.nav_mode == NAV_IDLE or agent.waypoint is None:
        raise ValueError("navigate requires a live agent with a waypoint")
    pose = agent.estimated_pose
    d_safe = params.d_safe
    fwd_min, fwd_rel = _forward_min(scan, pose.heading)

    if agent.nav_mode == NAV_GOTO:
        if fwd_min < d_safe:
            agent.nav_mode = NAV_AVOID
            agent.avoid_side = 1 if fwd_rel > 0 else -1
            wx, wy = agent.waypoint
            agent.avoid_entry_dist = math.hypot(wx - pose.x, wy - pose.y)
        else:
            return _goto_command(agent, params)

    side = agent.avoid_side
    wx, wy = agent.waypoint
    dist = math.hypot(wx - pose.x, wy - pose.y)
    if fwd_min >= 2.0 * d_safe and dist < agent.avoid_entry_dist:
        agent.nav_mode = NAV_GOTO
        agent.avoid_side = 0
        agent.avoid_entry_dist = math.inf
        return _goto_command(agent, params)

    if fwd_min < 2.0 * d_safe:
        return (0.0, -side * OMEGA_MAX)
    lateral = _side_min(scan, pose.heading, side)
    if math.isinf(lateral):
        w = side * CORNER_TURN
    else:
        w = max(-OMEGA_MAX, min(OMEGA_MAX, side * K_FOLLOW * (lateral - 2.0 * d_safe)))
    return (agent.speed_limit, w)


def collective_mapping_step(agent: AgentState, inbox, model: SensorModel,
                            thresholds: Thresholds, r0: float,
                            stale_ticks: int, tick: int) -> list[OriginOutOfGrid]:
    """One mapping round: integrate own scan, fuse delivered scans from the
    same floor, extend the sensed log with everything held, refresh the
    neighbor table, and re-select the waypoint."""
    errors: list[OriginOutOfGrid] = []
    if agent.last_scan is not None:
        errors += agent.grid.fuse_scans([agent.last_scan], model)
    same_floor = [sb for sb in inbox if sb.scan.floor_id == agent.floor_id]
    errors += agent.grid.fuse_scans([sb.scan for sb in same_floor], model)
    append_sensed_log(agent.sensed_log, inbox, agent.last_scan)

    for sb in same_floor:
        agent.neighbor_table[sb.sender] = (sb.tick, sb.pose.x, sb.pose.y)
    for nid in [n for n, (t, _, _) in agent.neighbor_table.items() if tick - t > stale_ticks]:
        del agent.neighbor_table[nid]

    vf = frontier_field(agent.grid, thresholds)
    neighbors = [(x, y) for _, (_, x, y) in sorted(agent.neighbor_table.items())]
    pf = preference_potential(vf, agent.grid, agent.estimated_pose, neighbors, r0)
    wp = select_waypoint(pf, agent.grid, thresholds)
    prev = agent.waypoint
    agent.waypoint = wp
    if wp is None:
        agent.nav_mode = NAV_IDLE
        agent.avoid_side = 0
        agent.avoid_entry_dist = math.inf
    elif agent.nav_mode == NAV_IDLE:
        agent.nav_mode = NAV_GOTO
    elif agent.nav_mode == NAV_AVOID and wp != prev:
        # contour progress is judged against the waypoint current at entry;
        # re-anchor when the waypoint moves
        agent.avoid_entry_dist = math.hypot(wp[0] - agent.estimated_pose.x,
                                            wp[1] - agent.estimated_pose.y)
    return errors


@dataclass
class TickRecord:
    tick: int
    t_s: float
    events: tuple[Event, ...]
    poses: dict[str, tuple[float, float, float]]
    waypoints: dict[str, tuple[float, float] | None]
    alive: dict[str, bool]
    per_agent_ce: dict[str, int]
    new_cells: dict[str, tuple[np.ndarray, np.ndarray]]
    floors: dict[str, int]
    snapshot: ConnectivitySnapshot
    alive_count: int


@dataclass
class SimulationTrace:
    agent_ids: tuple[str, ...]
    grid_shapes: dict[int, tuple[int, int]]
    params: SimParams
    records: list[TickRecord] = field(default_factory=list)


class Simulator:
    """Executes one scenario script tick by tick, fully deterministically."""

    def __init__(self, script: ScenarioScript, agent_order=None):
        self.script = script
        self.params = script.params
        self.worlds: dict[int, WorldModel] = {w.floor_id: w for w in script.worlds}
        self.bridges = script.bridge_pairs()
        self.agents: dict[str, AgentState] = {}
        for spec in script.agents:
            self._spawn(spec)
        self._event_i = 0
        self.tick = 0
        self._order_fn = agent_order
        ss = np.random.SeedSequence(self.params.seed)
        loss_ss, noise_ss = ss.spawn(2)
        self._loss_rng = np.random.default_rng(loss_ss)
        self._noise_rng = np.random.default_rng(noise_ss)
        shapes = {}
        for fid, w in self.worlds.items():
            g = OccupancyGrid(w.extent, self.params.resolution)
            shapes[fid] = g.shape
        self.trace = SimulationTrace(
            agent_ids=tuple(sorted(script.all_agent_ids())),
            grid_shapes=shapes,
            params=self.params,
        )

    def _spawn(self, spec: AgentSpec) -> AgentState:
        world = self.worlds[spec.floor_id]
        if world.is_occupied(spec.pose.x, spec.pose.y):
            raise ScriptViolation(f"agent {spec.id!r} pose inside geometry")
        agent = AgentState(
            id=spec.id,
            floor_id=spec.floor_id,
            true_pose=spec.pose,
            estimated_pose=spec.pose,
            grid=OccupancyGrid(world.extent, self.params.resolution, owner=spec.id),
            speed_limit=self.params.speed_limit,
        )
        self.agents[spec.id] = agent
        return agent

    def _order(self, ids) -> list[str]:
        ids = sorted(ids)
        if self._order_fn is not None:
            ids = list(self._order_fn(ids))
        return ids

    def _alive_ids(self) -> list[str]:
        return [a.id for a in self.agents.values() if a.alive]

    def _active_relays(self, t_now: float):
        return [r for r in self.script.relays if r.appears_at <= t_now + 1e-9]

    # -- phases ----------------------------------------------------------

    def _apply_event(self, event: Event) -> None:
        if isinstance(event, KillAgent):
            agent = self.agents.get(event.agent_id)
            if agent is None or not agent.alive:
                raise ScriptViolation(f"kill of missing or dead agent {event.agent_id!r}")
            agent.alive = False
        elif isinstance(event, InjectAgent):
            if event.agent_id in self.agents:
                raise ScriptViolation(f"inject of existing agent {event.agent_id!r}")
            self._spawn(AgentSpec(event.agent_id, event.floor_id, event.pose))
        elif isinstance(event, RemoveWall):
            for fid, world in self.worlds.items():
                if world.has_wall(event.wall_id):
                    self.worlds[fid] = world.remove_wall(event.wall_id)
                    return
            raise ScriptViolation(f"remove_wall of unknown wall {event.wall_id!r}")
        else:
            raise ScriptViolation(f"unknown event {event!r}")

    def _sense(self, agent: AgentState) -> None:
        world = self.worlds[agent.floor_id]
        scan = world.cast_scan(agent.true_pose, self.params.beam_count,
                               self.params.max_range, source=agent.id, tick=self.tick)
        if agent.estimated_pose is not agent.true_pose and agent.estimated_pose != agent.true_pose:
            # report the sweep in the agent's own (drifted) frame
            shift = agent.estimated_pose.heading - agent.true_pose.heading
            scan = Scan(source_agent=scan.source_agent, tick=scan.tick,
                        origin=agent.estimated_pose, bearings=scan.bearings + shift,
                        ranges=scan.ranges, hits=scan.hits, floor_id=scan.floor_id)
        agent.last_scan = scan

    def _move(self, agent: AgentState, v: float, w: float,
              noise: tuple[float, float] | None) -> None:
        dt = self.params.tick_s
        world = self.worlds[agent.floor_id]
        pose = agent.true_pose
        step_len = v * dt
        nx, ny = pose.x, pose.y
        if step_len > 0.0:
            d, hit = world.cast_ray((pose.x, pose.y), pose.heading, step_len)
            if hit:
                step_len = max(0.0, d - CONTACT_EPS)
            cx = pose.x + step_len * math.cos(pose.heading)
            cy = pose.y + step_len * math.sin(pose.heading)
            if not world.is_occupied(cx, cy):
                nx, ny = cx, cy
        agent.true_pose = Pose(nx, ny, wrap_angle(pose.heading + w * dt))
        if noise is None:
            agent.estimated_pose = agent.true_pose
        else:
            est = agent.estimated_pose
            ev, ew = noise
            ex = est.x + (v + ev) * dt * math.cos(est.heading)
            ey = est.y + (v + ev) * dt * math.sin(est.heading)
            agent.estimated_pose = Pose(ex, ey, wrap_angle(est.heading + (w + ew) * dt))

    def step(self) -> TickRecord:
        p = self.params
        self.tick += 1
        t_now = self.tick * p.tick_s

        # (a) scripted events falling in (previous tick, this tick]
        applied: list[Event] = []
        events = self.script.events
        while self._event_i < len(events) and events[self._event_i].time_s <= t_now + 1e-9:
            event = events[self._event_i]
            self._event_i += 1
            self._apply_event(event)
            applied.append(event)

        alive_ids = self._alive_ids()
        order = self._order(alive_ids)

        # (b) sensing
        for aid in order:
            self._sense(self.agents[aid])

        # (c) connectivity + synchronous broadcast exchange
        nodes = [NodeInfo(a.id, a.true_pose.x, a.true_pose.y, a.floor_id)
                 for a in (self.agents[i] for i in sorted(alive_ids))]
        nodes += [NodeInfo(r.id, r.position[0], r.position[1], r.floor_id, is_relay=True)
                  for r in self._active_relays(t_now)]
        snapshot = compute_connectivity(nodes, p.comm_range, p.comm_mode,
                                        bridges=self.bridges, tick=self.tick)
        outbox = [StateBroadcast(sender=a.id, tick=self.tick, pose=a.estimated_pose,
                                 scan=a.last_scan, waypoint=a.waypoint, floor_id=a.floor_id)
                  for a in (self.agents[i] for i in sorted(alive_ids))]
        inboxes = deliver_broadcasts(snapshot, outbox, p.loss_prob, self._loss_rng)

        # (d) mapping + waypoint selection
        model = p.sensor_model()
        thresholds = p.thresholds()
        new_cells: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for aid in order:
            agent = self.agents[aid]
            before = agent.grid.touched.copy()
            collective_mapping_step(agent, inboxes.get(aid, []), model, thresholds,
                                    p.r0, p.stale_ticks, self.tick)
            rows, cols = np.nonzero(agent.grid.touched & ~before)
            new_cells[aid] = (rows.astype(np.int32), cols.astype(np.int32))

        # (e) motion
        noise = {}
        if p.odom_noise_v > 0.0 or p.odom_noise_w > 0.0:
            for aid in sorted(alive_ids):
                noise[aid] = (float(self._noise_rng.normal(0.0, p.odom_noise_v)),
                              float(self._noise_rng.normal(0.0, p.odom_noise_w)))
        for aid in order:
            agent = self.agents[aid]
            if agent.nav_mode == NAV_IDLE or agent.waypoint is None:
                continue
            v, w = navigate(agent, agent.last_scan, p)
            self._move(agent, v, w, noise.get(aid))

        # (f) trace
        rec = TickRecord(
            tick=self.tick,
            t_s=t_now,
            events=tuple(applied),
            poses={aid: (a.true_pose.x, a.true_pose.y, a.true_pose.heading)
                   for aid, a in sorted(self.agents.items())},
            waypoints={aid: a.waypoint for aid, a in sorted(self.agents.items())},
            alive={aid: a.alive for aid, a in sorted(self.agents.items())},
            per_agent_ce={aid: a.grid.count_explored() for aid, a in sorted(self.agents.items())},
            new_cells=new_cells,
            floors={aid: a.floor_id for aid, a in sorted(self.agents.items())},
            snapshot=snapshot,
            alive_count=len(alive_ids),
        )
        self.trace.records.append(rec)
        return rec

    def run(self) -> SimulationTrace:
        for _ in range(self.params.n_ticks):
            self.step()
        return self.trace


def run_scenario(script: ScenarioScript, agent_order=None) -> SimulationTrace:
    """Execute the script end to end; identical script and seed give a
    bit-identical trace."""
    return Simulator(script, agent_order=agent_order).run()


def traces_equal(a: SimulationTrace, b: SimulationTrace) -> bool:
    if a.agent_ids != b.agent_ids or len(a.records) != len(b.records):
        return False
    for ra, rb in zip(a.records, b.records):
        if (ra.tick != rb.tick or ra.t_s != rb.t_s or ra.poses != rb.poses
                or ra.waypoints != rb.waypoints or ra.alive != rb.alive
                or ra.per_agent_ce != rb.per_agent_ce or ra.alive_count != rb.alive_count
                or ra.snapshot.node_ids != rb.snapshot.node_ids
                or not np.array_equal(ra.snapshot.adjacency, rb.snapshot.adjacency)):
            return False
        if sorted(ra.new_cells) != sorted(rb.new_cells):
            return False
        for aid in ra.new_cells:
            if (not np.array_equal(ra.new_cells[aid][0], rb.new_cells[aid][0])
                    or not np.array_equal(ra.new_cells[aid][1], rb.new_cells[aid][1])):
                return False
    return True
