"""Experiment presets: fixed worlds and scenario generators.

Four named presets mirror the evaluation protocols: swarm-size sweeps in a
60 m^2 obstacle pen, a kill/re-inject timeline, a walled arena that opens
mid-run, and a two-floor deployment bridged by relay nodes. Layouts are fixed
so runs are comparable across seeds and machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .harness import world_capacity
from .mapping import CELL_SIZE
from .scenario import (AgentSpec, InjectAgent, KillAgent, RelaySpec, RemoveWall,
                       ScenarioScript, SimParams)
from .world import Pose, Wall, WorldModel

DEFAULT_SEEDS = [11, 23, 37, 51, 68]
# lossy links make repeated seeds genuinely different runs
DEFAULT_LOSS = 0.05


@dataclass
class ExperimentPreset:
    name: str
    scripts: list[tuple[str, ScenarioScript]]
    repeats: int
    seeds: list[int]
    ce_inf: int
    method2_threshold: int


# --------------------------------------------------------------------------
# worlds
# --------------------------------------------------------------------------

def scalability_world() -> WorldModel:
    """10 m x 6 m pen (60 m^2) with five irregular convex obstacles covering
    roughly 8% of the floor."""
    obstacles = [
        [(1.7, 1.2), (2.7, 0.9), (3.1, 1.7), (2.3, 2.3), (1.8, 2.0)],
        [(4.6, 3.6), (5.6, 3.4), (5.9, 4.3), (5.0, 4.8)],
        [(7.4, 1.0), (8.4, 1.3), (8.2, 2.2), (7.2, 1.9)],
        [(2.2, 4.2), (3.2, 4.0), (3.4, 4.9), (2.4, 5.1)],
        [(6.2, 0.6), (6.9, 0.4), (7.1, 1.1), (6.3, 1.3), (6.0, 0.9)],
    ]
    return WorldModel(extent=(10.0, 6.0), obstacles=obstacles, floor_id=0)


def flexibility_world() -> WorldModel:
    """9 m x 3 m strip split into three 9 m^2 squares by two removable walls."""
    walls = [
        Wall(id="wall_left", p1=(3.0, 0.0), p2=(3.0, 3.0), thickness=0.1),
        Wall(id="wall_right", p1=(6.0, 0.0), p2=(6.0, 3.0), thickness=0.1),
    ]
    return WorldModel(extent=(9.0, 3.0), walls=walls, floor_id=0)


def multifloor_worlds() -> list[WorldModel]:
    """Two disjoint floors of modest size with a couple of obstacles each."""
    f1 = WorldModel(
        extent=(8.0, 5.0),
        obstacles=[
            [(2.0, 1.6), (3.0, 1.4), (3.2, 2.3), (2.2, 2.5)],
            [(5.4, 3.0), (6.4, 3.2), (6.2, 4.0), (5.2, 3.8)],
        ],
        floor_id=1,
    )
    f2 = WorldModel(
        extent=(8.0, 5.0),
        obstacles=[
            [(4.0, 1.0), (5.0, 1.2), (4.8, 2.0), (3.8, 1.8)],
        ],
        floor_id=2,
    )
    return [f1, f2]


def _line_of_agents(n: int, floor_id: int, x0: float, y0: float, dy: float,
                    prefix: str = "a") -> list[AgentSpec]:
    return [AgentSpec(f"{prefix}{k}", floor_id, Pose(x0, y0 + k * dy, 0.0)) for k in range(n)]


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def scalability_preset(sizes=(1, 2, 4, 6, 8), repeats: int = 5, seeds=None,
                       duration_s: float = 240.0, loss_prob: float = DEFAULT_LOSS) -> ExperimentPreset:
    """Identical initial conditions per swarm size N; five seeded repeats."""
    world = scalability_world()
    params = SimParams(duration_s=duration_s, loss_prob=loss_prob)
    capacity = world_capacity(world, params.resolution)
    scripts = []
    for n in sizes:
        agents = _line_of_agents(n, 0, x0=0.4, y0=0.5, dy=0.65)
        scripts.append((f"N{n}", ScenarioScript(worlds=[world], agents=agents, params=params)))
    return ExperimentPreset(
        name="scalability", scripts=scripts, repeats=repeats,
        seeds=list(seeds) if seeds is not None else list(DEFAULT_SEEDS),
        ce_inf=capacity, method2_threshold=int(math.ceil(0.6 * capacity)),
    )


def robustness_preset(repeats: int = 5, seeds=None, duration_s: float = 200.0,
                      loss_prob: float = DEFAULT_LOSS) -> ExperimentPreset:
    """Four agents; two are switched off at t=20 s and two new ones injected
    at t=120 s."""
    world = scalability_world()
    params = SimParams(duration_s=duration_s, loss_prob=loss_prob)
    capacity = world_capacity(world, params.resolution)
    agents = _line_of_agents(4, 0, x0=0.4, y0=0.5, dy=0.65)
    events = [
        KillAgent(20.0, "a2"),
        KillAgent(20.0, "a3"),
        InjectAgent(120.0, "b0", 0, Pose(0.4, 3.2, 0.0)),
        InjectAgent(120.0, "b1", 0, Pose(0.4, 3.85, 0.0)),
    ]
    script = ScenarioScript(worlds=[world], agents=agents, events=events, params=params)
    return ExperimentPreset(
        name="robustness", scripts=[("N4_kill2_inject2", script)], repeats=repeats,
        seeds=list(seeds) if seeds is not None else list(DEFAULT_SEEDS),
        ce_inf=capacity, method2_threshold=int(math.ceil(0.6 * capacity)),
    )


def flexibility_preset(repeats: int = 5, seeds=None, duration_s: float = 90.0,
                       loss_prob: float = DEFAULT_LOSS) -> ExperimentPreset:
    """Two agents per end area; both dividing walls removed at t=30 s."""
    world = flexibility_world()
    params = SimParams(duration_s=duration_s, loss_prob=loss_prob)
    capacity = world_capacity(world, params.resolution)
    agents = [
        AgentSpec("a0", 0, Pose(0.5, 1.0, 0.0)),
        AgentSpec("a1", 0, Pose(0.5, 2.0, 0.0)),
        AgentSpec("a2", 0, Pose(8.5, 1.0, math.pi)),
        AgentSpec("a3", 0, Pose(8.5, 2.0, math.pi)),
    ]
    events = [RemoveWall(30.0, "wall_left"), RemoveWall(30.0, "wall_right")]
    script = ScenarioScript(worlds=[world], agents=agents, events=events, params=params)
    return ExperimentPreset(
        name="flexibility", scripts=[("walls_removed_30s", script)], repeats=repeats,
        seeds=list(seeds) if seeds is not None else list(DEFAULT_SEEDS),
        ce_inf=capacity, method2_threshold=int(math.ceil(0.6 * capacity)),
    )


def multifloor_preset(repeats: int = 5, seeds=None, duration_s: float = 120.0,
                      loss_prob: float = DEFAULT_LOSS, with_relays: bool = True,
                      relay_appear_s: float = 2.0) -> ExperimentPreset:
    """Eight mapping agents on floor 1, four on floor 2, two relay nodes
    forming the only cross-floor link once they appear."""
    worlds = multifloor_worlds()
    params = SimParams(duration_s=duration_s, loss_prob=loss_prob)
    capacity = sum(world_capacity(w, params.resolution) for w in worlds)
    agents = (_line_of_agents(8, 1, x0=0.4, y0=0.5, dy=0.55, prefix="f1_")
              + _line_of_agents(4, 2, x0=0.4, y0=0.5, dy=0.55, prefix="f2_"))
    relays = []
    if with_relays:
        relays = [
            RelaySpec("climb0", 1, (7.6, 4.6), appears_at=relay_appear_s, bridges_to="climb1"),
            RelaySpec("climb1", 2, (7.6, 4.6), appears_at=relay_appear_s, bridges_to="climb0"),
        ]
    script = ScenarioScript(worlds=worlds, agents=agents, relays=relays, params=params)
    label = "two_floors_relays" if with_relays else "two_floors_norelays"
    return ExperimentPreset(
        name="multifloor", scripts=[(label, script)], repeats=repeats,
        seeds=list(seeds) if seeds is not None else list(DEFAULT_SEEDS),
        ce_inf=capacity, method2_threshold=int(math.ceil(0.6 * capacity)),
    )


PRESET_BUILDERS = {
    "scalability": scalability_preset,
    "robustness": robustness_preset,
    "flexibility": flexibility_preset,
    "multifloor": multifloor_preset,
}


def get_preset(name: str, repeats: int | None = None) -> ExperimentPreset:
    if name not in PRESET_BUILDERS:
        raise ValueError(f"unknown preset {name!r} (have: {', '.join(sorted(PRESET_BUILDERS))})")
    preset = PRESET_BUILDERS[name]()
    if repeats is not None:
        preset = replace(preset, repeats=repeats)
    return preset
