import math
import textwrap

import pytest

from swarm_gridmapper.scenario import (InjectAgent, KillAgent, RemoveWall,
                                       ScenarioError, SimParams,
                                       load_scenario, load_scenario_text)

VALID = textwrap.dedent("""\
    params:
      duration_s: 10.0
      seed: 7
      tick_s: 0.2
      comm_range: 3.0
      loss_prob: 0.0
      R_0: 1.0
      beam_count: 8
      max_range: 2.0
    worlds:
      - floor: 0
        extent: [6.0, 4.0]
        obstacles:
          - [[2.0, 1.0], [3.0, 1.2], [2.8, 2.0], [2.1, 1.9]]
        walls:
          - id: gate
            segment: [[4.0, 0.0], [4.0, 2.0]]
            thickness: 0.1
    agents:
      - id: a0
        floor: 0
        pose: [0.5, 0.5, 0.0]
      - id: a1
        floor: 0
        pose: [0.5, 1.5, 1.57]
    relays:
      - id: r0
        floor: 0
        position: [5.5, 3.5]
        appears_at: 2.0
    events:
      - time: 3.0
        remove_wall: gate
      - time: 5.0
        kill: a1
      - time: 8.0
        inject:
          id: a2
          floor: 0
          pose: [1.0, 3.0, 0.0]
""")


def test_valid_scenario_roundtrip(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(VALID)
    script = load_scenario(path)
    assert script.params.seed == 7
    assert script.params.r0 == 1.0
    assert [a.id for a in script.agents] == ["a0", "a1"]
    assert script.worlds[0].extent == (6.0, 4.0)
    assert len(script.worlds[0].obstacles) == 1
    kinds = [type(e) for e in script.events]
    assert kinds == [RemoveWall, KillAgent, InjectAgent]
    assert script.all_agent_ids() == ["a0", "a1", "a2"]


def test_unknown_top_key_has_line_number():
    bad = VALID + "extra_section: 1\n"
    with pytest.raises(ScenarioError, match=r"line \d+: unknown key 'extra_section'"):
        load_scenario_text(bad)


def test_unknown_param_key_reported():
    bad = VALID.replace("  seed: 7", "  seed: 7\n  warp_speed: 9")
    with pytest.raises(ScenarioError, match=r"line \d+: unknown key 'warp_speed'"):
        load_scenario_text(bad)


def test_type_error_reported_with_line():
    bad = VALID.replace("beam_count: 8", "beam_count: eight")
    with pytest.raises(ScenarioError, match=r"line \d+: param beam_count"):
        load_scenario_text(bad)


def test_event_must_have_exactly_one_kind():
    bad = VALID.replace("    kill: a1", "    kill: a1\n    remove_wall: gate")
    assert bad != VALID
    with pytest.raises(ScenarioError, match="exactly one"):
        load_scenario_text(bad)


def test_kill_unknown_agent_rejected():
    bad = VALID.replace("kill: a1", "kill: a9")
    with pytest.raises(ScenarioError, match="unknown agent"):
        load_scenario_text(bad)


def test_remove_unknown_wall_rejected():
    bad = VALID.replace("remove_wall: gate", "remove_wall: missing_wall")
    with pytest.raises(ScenarioError, match="unknown wall"):
        load_scenario_text(bad)


def test_duplicate_agent_id_rejected():
    bad = VALID.replace("id: a2", "id: a0")
    with pytest.raises(ScenarioError, match="unique"):
        load_scenario_text(bad)


def test_agent_inside_geometry_rejected():
    bad = VALID.replace("pose: [0.5, 0.5, 0.0]", "pose: [2.5, 1.5, 0.0]")
    with pytest.raises(ScenarioError, match="inside geometry"):
        load_scenario_text(bad)


def test_event_time_outside_duration_rejected():
    bad = VALID.replace("time: 5.0", "time: 50.0")
    with pytest.raises(ScenarioError, match="outside"):
        load_scenario_text(bad)


def test_missing_required_sections():
    with pytest.raises(ScenarioError, match="missing top-level"):
        load_scenario_text("worlds:\n  - extent: [2.0, 2.0]\n")
    with pytest.raises(ScenarioError, match="empty"):
        load_scenario_text("")


def test_params_defaults_and_validation():
    p = SimParams()
    assert p.n_ticks == 300
    assert p.stale_ticks == 10
    assert p.tick_s == 0.2
    assert math.isclose(p.resolution, 1.0 / 15.0)
    with pytest.raises(ValueError):
        SimParams(loss_prob=1.0)
    with pytest.raises(ValueError):
        SimParams(comm_mode="carrier_pigeon")


def test_with_seed_reuses_everything_else():
    script = load_scenario_text(VALID)
    seeded = script.with_seed(99)
    assert seeded.params.seed == 99
    assert seeded.params.duration_s == script.params.duration_s
    assert seeded.worlds is not None and len(seeded.agents) == 2


def test_wall_ids_unique_across_floors():
    two_floors = VALID.replace(
        "worlds:",
        textwrap.dedent("""\
        worlds:
          - floor: 1
            extent: [3.0, 3.0]
            walls:
              - id: gate
                segment: [[1.0, 0.0], [1.0, 2.0]]
                thickness: 0.1
        """).rstrip() + "\n",
    )
    with pytest.raises(ScenarioError, match="reused across floors"):
        load_scenario_text(two_floors)
