"""Scenario scripts: worlds, initial agents, relays, timed events, parameters.

Scenario files are YAML (key-value + arrays). The loader is strict: unknown
keys are rejected with the line number they appear on, as are type errors and
referential problems (events naming missing agents or walls, duplicate ids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from .mapping import CELL_SIZE, SensorModel, Thresholds, logit
from .network import MULTI_HOP, SINGLE_HOP
from .world import Pose, Wall, WorldModel


class ScenarioError(ValueError):
    """Malformed scenario file; message carries the offending line."""


@dataclass(frozen=True)
class SimParams:
    duration_s: float = 60.0
    seed: int = 0
    tick_s: float = 0.2
    comm_range: float = 3.0
    comm_mode: str = MULTI_HOP
    loss_prob: float = 0.0
    r0: float = 1.0
    beam_count: int = 8
    max_range: float = 2.0
    resolution: float = CELL_SIZE
    l_hit: float = logit(0.8)
    l_miss: float = logit(0.35)
    l_max: float = 10.0
    p_occ_threshold: float = 0.65
    p_free_threshold: float = 0.35
    speed_limit: float = 0.3
    d_safe: float = 0.15
    neighbor_stale_s: float = 2.0
    odom_noise_v: float = 0.0
    odom_noise_w: float = 0.0

    def __post_init__(self):
        if self.tick_s <= 0 or self.duration_s <= 0:
            raise ValueError("tick_s and duration_s must be positive")
        if self.comm_mode not in (SINGLE_HOP, MULTI_HOP):
            raise ValueError(f"unknown comm_mode {self.comm_mode!r}")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ValueError("loss_prob must be in [0, 1)")

    def sensor_model(self) -> SensorModel:
        return SensorModel(l_hit=self.l_hit, l_miss=self.l_miss, l_max=self.l_max)

    def thresholds(self) -> Thresholds:
        return Thresholds(p_occupied=self.p_occ_threshold, p_free=self.p_free_threshold)

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s / self.tick_s))

    @property
    def stale_ticks(self) -> int:
        return int(round(self.neighbor_stale_s / self.tick_s))


@dataclass(frozen=True)
class AgentSpec:
    id: str
    floor_id: int
    pose: Pose


@dataclass(frozen=True)
class RelaySpec:
    id: str
    floor_id: int
    position: tuple[float, float]
    appears_at: float = 0.0
    bridges_to: str | None = None


@dataclass(frozen=True)
class KillAgent:
    time_s: float
    agent_id: str


@dataclass(frozen=True)
class InjectAgent:
    time_s: float
    agent_id: str
    floor_id: int
    pose: Pose


@dataclass(frozen=True)
class RemoveWall:
    time_s: float
    wall_id: str


Event = KillAgent | InjectAgent | RemoveWall


@dataclass
class ScenarioScript:
    worlds: list[WorldModel]
    agents: list[AgentSpec]
    relays: list[RelaySpec] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    params: SimParams = field(default_factory=SimParams)

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: e.time_s)
        self.validate()

    def with_seed(self, seed: int) -> "ScenarioScript":
        return ScenarioScript(self.worlds, self.agents, self.relays, self.events,
                              replace(self.params, seed=seed))

    def world_for(self, floor_id: int) -> WorldModel:
        for w in self.worlds:
            if w.floor_id == floor_id:
                return w
        raise ScenarioError(f"no world for floor {floor_id}")

    def bridge_pairs(self) -> list[tuple[str, str]]:
        pairs = set()
        by_id = {r.id: r for r in self.relays}
        for r in self.relays:
            if r.bridges_to is not None:
                pairs.add(tuple(sorted((r.id, r.bridges_to))))
        return sorted((a, b) for a, b in pairs if a in by_id and b in by_id)

    def all_agent_ids(self) -> list[str]:
        ids = [a.id for a in self.agents]
        ids += [e.agent_id for e in self.events if isinstance(e, InjectAgent)]
        return ids

    def validate(self) -> None:
        floors = [w.floor_id for w in self.worlds]
        if len(set(floors)) != len(floors):
            raise ScenarioError("duplicate floor ids among worlds")
        if not self.worlds:
            raise ScenarioError("scenario needs at least one world")

        wall_ids: set[str] = set()
        for w in self.worlds:
            for wl in w.walls:
                if wl.id in wall_ids:
                    raise ScenarioError(f"wall id {wl.id!r} reused across floors")
                wall_ids.add(wl.id)

        ids = self.all_agent_ids()
        if len(set(ids)) != len(ids):
            raise ScenarioError("agent ids (initial + injected) must be unique")
        relay_ids = [r.id for r in self.relays]
        if len(set(relay_ids)) != len(relay_ids) or set(relay_ids) & set(ids):
            raise ScenarioError("relay ids must be unique and distinct from agents")

        floor_set = set(floors)
        for a in self.agents:
            if a.floor_id not in floor_set:
                raise ScenarioError(f"agent {a.id!r} on unknown floor {a.floor_id}")
        for r in self.relays:
            if r.floor_id not in floor_set:
                raise ScenarioError(f"relay {r.id!r} on unknown floor {r.floor_id}")
            if r.bridges_to is not None:
                if r.bridges_to not in relay_ids:
                    raise ScenarioError(f"relay {r.id!r} bridges to unknown relay {r.bridges_to!r}")

        known = set(a.id for a in self.agents)
        for e in self.events:
            if not 0.0 <= e.time_s <= self.params.duration_s:
                raise ScenarioError(f"event time {e.time_s} outside [0, duration]")
            if isinstance(e, InjectAgent):
                if e.floor_id not in floor_set:
                    raise ScenarioError(f"injected agent {e.agent_id!r} on unknown floor")
                known.add(e.agent_id)
            elif isinstance(e, KillAgent):
                if e.agent_id not in known:
                    raise ScenarioError(f"kill targets unknown agent {e.agent_id!r}")
            elif isinstance(e, RemoveWall):
                if e.wall_id not in wall_ids:
                    raise ScenarioError(f"remove_wall targets unknown wall {e.wall_id!r}")

        for a in self.agents:
            if self.world_for(a.floor_id).is_occupied(a.pose.x, a.pose.y):
                raise ScenarioError(f"agent {a.id!r} starts inside geometry")


# --------------------------------------------------------------------------
# YAML loading with line-numbered strictness
# --------------------------------------------------------------------------

_PARAM_KEYS = {
    "duration_s": ("duration_s", float),
    "seed": ("seed", int),
    "tick_s": ("tick_s", float),
    "comm_range": ("comm_range", float),
    "comm_mode": ("comm_mode", str),
    "loss_prob": ("loss_prob", float),
    "R_0": ("r0", float),
    "beam_count": ("beam_count", int),
    "max_range": ("max_range", float),
    "resolution": ("resolution", float),
    "l_hit": ("l_hit", float),
    "l_miss": ("l_miss", float),
    "L_max": ("l_max", float),
    "p_occ_threshold": ("p_occ_threshold", float),
    "p_free_threshold": ("p_free_threshold", float),
    "speed_limit": ("speed_limit", float),
    "d_safe": ("d_safe", float),
    "neighbor_stale_s": ("neighbor_stale_s", float),
    "odom_noise_v": ("odom_noise_v", float),
    "odom_noise_w": ("odom_noise_w", float),
}


def _line(node) -> int:
    return node.start_mark.line + 1


def _fail(node, msg: str):
    raise ScenarioError(f"line {_line(node)}: {msg}")


def _mapping_items(node, what: str):
    if not isinstance(node, yaml.MappingNode):
        _fail(node, f"{what} must be a mapping")
    return [(k, v) for k, v in node.value]


def _sequence_items(node, what: str):
    if not isinstance(node, yaml.SequenceNode):
        _fail(node, f"{what} must be a list")
    return node.value


def _scalar(node, cast, what: str):
    if not isinstance(node, yaml.ScalarNode):
        _fail(node, f"{what} must be a scalar")
    raw = node.value
    try:
        if cast is bool:
            if raw.lower() in ("true", "yes"):
                return True
            if raw.lower() in ("false", "no"):
                return False
            raise ValueError(raw)
        if cast is int:
            return int(raw)
        if cast is float:
            return float(raw)
        return str(raw)
    except ValueError:
        _fail(node, f"{what}: expected {cast.__name__}, got {raw!r}")


def _point(node, what: str) -> tuple[float, float]:
    items = _sequence_items(node, what)
    if len(items) != 2:
        _fail(node, f"{what} must be [x, y]")
    return (_scalar(items[0], float, what), _scalar(items[1], float, what))


def _pose(node, what: str) -> Pose:
    items = _sequence_items(node, what)
    if len(items) not in (2, 3):
        _fail(node, f"{what} must be [x, y] or [x, y, heading]")
    vals = [_scalar(n, float, what) for n in items]
    return Pose(vals[0], vals[1], vals[2] if len(vals) == 3 else 0.0)


def _strict_map(node, allowed: set[str], what: str) -> dict:
    out = {}
    for k, v in _mapping_items(node, what):
        key = _scalar(k, str, f"{what} key")
        if key in out:
            _fail(k, f"duplicate key {key!r}")
        if key not in allowed:
            _fail(k, f"unknown key {key!r} in {what} (allowed: {', '.join(sorted(allowed))})")
        out[key] = v
    return out


def _load_world(node) -> WorldModel:
    m = _strict_map(node, {"floor", "extent", "obstacles", "walls"}, "world")
    if "extent" not in m:
        _fail(node, "world missing 'extent'")
    floor = _scalar(m["floor"], int, "floor") if "floor" in m else 0
    extent = _point(m["extent"], "extent")
    obstacles = []
    if "obstacles" in m:
        for onode in _sequence_items(m["obstacles"], "obstacles"):
            obstacles.append([_point(vn, "obstacle vertex") for vn in _sequence_items(onode, "obstacle")])
    walls = []
    if "walls" in m:
        for wnode in _sequence_items(m["walls"], "walls"):
            wm = _strict_map(wnode, {"id", "segment", "thickness"}, "wall")
            for req in ("id", "segment", "thickness"):
                if req not in wm:
                    _fail(wnode, f"wall missing {req!r}")
            seg = _sequence_items(wm["segment"], "wall segment")
            if len(seg) != 2:
                _fail(wm["segment"], "wall segment must be [[x, y], [x, y]]")
            walls.append(Wall(
                id=_scalar(wm["id"], str, "wall id"),
                p1=_point(seg[0], "wall endpoint"),
                p2=_point(seg[1], "wall endpoint"),
                thickness=_scalar(wm["thickness"], float, "wall thickness"),
            ))
    try:
        return WorldModel(extent, obstacles, walls, floor)
    except ValueError as err:
        _fail(node, str(err))


def _load_event(node) -> Event:
    m = _strict_map(node, {"time", "kill", "inject", "remove_wall"}, "event")
    if "time" not in m:
        _fail(node, "event missing 'time'")
    time_s = _scalar(m["time"], float, "event time")
    kinds = [k for k in ("kill", "inject", "remove_wall") if k in m]
    if len(kinds) != 1:
        _fail(node, "event must have exactly one of kill/inject/remove_wall")
    kind = kinds[0]
    if kind == "kill":
        return KillAgent(time_s, _scalar(m["kill"], str, "kill agent id"))
    if kind == "remove_wall":
        return RemoveWall(time_s, _scalar(m["remove_wall"], str, "wall id"))
    im = _strict_map(m["inject"], {"id", "floor", "pose"}, "inject")
    for req in ("id", "pose"):
        if req not in im:
            _fail(m["inject"], f"inject missing {req!r}")
    floor = _scalar(im["floor"], int, "floor") if "floor" in im else 0
    return InjectAgent(time_s, _scalar(im["id"], str, "agent id"), floor, _pose(im["pose"], "pose"))


def load_scenario_text(text: str, name: str = "<scenario>") -> ScenarioScript:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as err:
        raise ScenarioError(f"{name}: invalid YAML: {err}") from err
    if root is None:
        raise ScenarioError(f"{name}: empty scenario")
    m = _strict_map(root, {"worlds", "agents", "relays", "events", "params"}, "scenario")
    for req in ("worlds", "agents"):
        if req not in m:
            raise ScenarioError(f"{name}: missing top-level {req!r}")

    worlds = [_load_world(n) for n in _sequence_items(m["worlds"], "worlds")]

    agents = []
    for anode in _sequence_items(m["agents"], "agents"):
        am = _strict_map(anode, {"id", "floor", "pose"}, "agent")
        for req in ("id", "pose"):
            if req not in am:
                _fail(anode, f"agent missing {req!r}")
        floor = _scalar(am["floor"], int, "floor") if "floor" in am else 0
        agents.append(AgentSpec(_scalar(am["id"], str, "agent id"), floor, _pose(am["pose"], "pose")))

    relays = []
    if "relays" in m:
        for rnode in _sequence_items(m["relays"], "relays"):
            rm = _strict_map(rnode, {"id", "floor", "position", "appears_at", "bridges_to"}, "relay")
            for req in ("id", "position"):
                if req not in rm:
                    _fail(rnode, f"relay missing {req!r}")
            relays.append(RelaySpec(
                id=_scalar(rm["id"], str, "relay id"),
                floor_id=_scalar(rm["floor"], int, "floor") if "floor" in rm else 0,
                position=_point(rm["position"], "relay position"),
                appears_at=_scalar(rm["appears_at"], float, "appears_at") if "appears_at" in rm else 0.0,
                bridges_to=_scalar(rm["bridges_to"], str, "bridges_to") if "bridges_to" in rm else None,
            ))

    events = []
    if "events" in m:
        events = [_load_event(n) for n in _sequence_items(m["events"], "events")]

    kwargs = {}
    if "params" in m:
        pm = _strict_map(m["params"], set(_PARAM_KEYS), "params")
        for key, node in pm.items():
            attr, cast = _PARAM_KEYS[key]
            kwargs[attr] = _scalar(node, cast, f"param {key}")
    try:
        params = SimParams(**kwargs)
        return ScenarioScript(worlds=worlds, agents=agents, relays=relays, events=events, params=params)
    except (ValueError, ScenarioError) as err:
        raise ScenarioError(f"{name}: {err}") from err


def load_scenario(path) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario_text(fh.read(), name=str(path))
