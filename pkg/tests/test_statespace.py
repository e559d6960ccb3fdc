import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from migsched.errors import InvalidAllocation
from migsched.statespace import (
    DEFAULT_POWER_CAPS,
    HardwareState,
    MemoryOption,
    PartitionState,
    SliceAllocation,
    StateSpace,
    default_state_space,
    load_state_space,
    private_memory_modules,
    solo_state,
    validate,
)


def test_default_states_match_menu():
    states = default_state_space()
    assert [(s.state_id, s.gpcs, s.option) for s in states] == [
        ("S1", (4, 3), MemoryOption.SHARED),
        ("S2", (3, 4), MemoryOption.SHARED),
        ("S3", (4, 3), MemoryOption.PRIVATE),
        ("S4", (3, 4), MemoryOption.PRIVATE),
    ]
    assert sum(states[2].gpcs) == 7


def test_candidate_count():
    assert len(StateSpace().candidates()) == 24
    assert DEFAULT_POWER_CAPS == (150, 170, 190, 210, 230, 250)


@pytest.mark.parametrize("g,m", [(1, 1), (2, 2), (3, 4), (4, 4), (7, 8)])
def test_private_modules(g, m):
    assert private_memory_modules(g) == m


@pytest.mark.parametrize("g", [0, 5, 6, 8, -1])
def test_private_modules_rejects(g):
    with pytest.raises(InvalidAllocation):
        private_memory_modules(g)


def test_private_modules_monotone():
    vals = [private_memory_modules(g) for g in (1, 2, 3, 4, 7)]
    assert vals == sorted(vals)


def test_validate_accepts_default_candidates():
    for hw in StateSpace().candidates():
        validate(hw, 2)


def test_validate_rejections():
    s1 = default_state_space()[0]
    with pytest.raises(InvalidAllocation, match="7 usable"):
        validate(HardwareState(PartitionState.uniform("x", (4, 4), "shared"), 250), 2)
    with pytest.raises(InvalidAllocation, match="160"):
        validate(HardwareState(s1, 160), 2)
    with pytest.raises(InvalidAllocation, match="slices"):
        validate(HardwareState(s1, 250), 3)
    with pytest.raises(InvalidAllocation, match="allowed"):
        validate(HardwareState(PartitionState.uniform("x", (5, 1), "shared"), 250), 2)
    mixed = PartitionState("m", (SliceAllocation(4, MemoryOption.SHARED), SliceAllocation(3, MemoryOption.PRIVATE)),
                           MemoryOption.SHARED)
    with pytest.raises(InvalidAllocation, match="mixes"):
        validate(HardwareState(mixed, 250), 2)


@given(st.lists(st.sampled_from([1, 2, 3, 4, 7]), min_size=1, max_size=4))
def test_validate_gpc_budget(gpcs):
    hw = HardwareState(PartitionState.uniform("x", gpcs, "private"), 250)
    if sum(gpcs) > 7:
        with pytest.raises(InvalidAllocation):
            validate(hw, len(gpcs))
    else:
        validate(hw, len(gpcs))


def test_solo_states_resolve():
    space = StateSpace()
    assert space.resolve("solo-3g-private") == solo_state(3, "private")
    assert space.resolve("S2").gpcs == (3, 4)
    with pytest.raises(InvalidAllocation):
        space.resolve("S9")


def test_state_space_file(tmp_path):
    path = tmp_path / "space.json"
    path.write_text(json.dumps({
        "states": [{"id": "A", "gpcs": [2, 2, 3], "option": "private"}],
        "power_caps_w": [200, 150],
    }))
    space = load_state_space(path)
    assert space.power_caps_w == (150, 200)
    assert space.states[0].gpcs == (2, 2, 3)
    assert len(space.candidates()) == 2
    assert StateSpace.from_dict(space.to_dict()) == space
    assert load_state_space(None) == StateSpace()
