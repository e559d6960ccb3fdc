"""
Partition layouts, power caps and the searchable (state, power) space.

With partitioning enabled one of the eight GPCs is fused off, so slices are
carved out of 7 usable GPCs, and a slice may only hold 1, 2, 3, 4 or 7 GPCs.
Under the private memory option a slice also owns a fixed number of the 8
LLC/HBM modules; under the shared option all slices draw on one pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

from .errors import InvalidAllocation

USABLE_GPCS = 7
TOTAL_GPCS = 8
TOTAL_MEMORY_MODULES = 8
ALLOWED_SLICE_GPCS = (1, 2, 3, 4, 7)
DEFAULT_POWER_CAPS = (150, 170, 190, 210, 230, 250)

_PRIVATE_MODULES = {1: 1, 2: 2, 3: 4, 4: 4, 7: 8}


class MemoryOption(str, Enum):
    SHARED = "shared"
    PRIVATE = "private"


@dataclass(frozen=True)
class SliceAllocation:
    gpcs: int
    option: MemoryOption


@dataclass(frozen=True)
class PartitionState:
    """One partition layout; ``slices[i]`` belongs to the i-th application."""

    state_id: str
    slices: tuple
    option: MemoryOption

    @classmethod
    def uniform(cls, state_id: str, gpcs, option) -> "PartitionState":
        option = MemoryOption(option)
        return cls(state_id, tuple(SliceAllocation(int(g), option) for g in gpcs), option)

    @property
    def gpcs(self) -> tuple:
        return tuple(s.gpcs for s in self.slices)

    def swapped(self, state_id: str) -> "PartitionState":
        return PartitionState(state_id, tuple(reversed(self.slices)), self.option)


@dataclass(frozen=True)
class HardwareState:
    partition: PartitionState
    power_w: int


def solo_state(gpcs: int, option) -> PartitionState:
    """Single-slice state used for exclusive scaling runs."""
    option = MemoryOption(option)
    return PartitionState.uniform(f"solo-{gpcs}g-{option.value}", (gpcs,), option)


@dataclass(frozen=True)
class StateSpace:
    states: tuple = ()
    power_caps_w: tuple = DEFAULT_POWER_CAPS
    solo_gpcs: tuple = ALLOWED_SLICE_GPCS
    _by_id: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.states:
            object.__setattr__(self, "states", tuple(default_state_space()))
        ids = [s.state_id for s in self.states]
        if len(set(ids)) != len(ids):
            raise InvalidAllocation(f"duplicate state ids in {ids}")
        by_id = {s.state_id: s for s in self.states}
        for g, opt in product(self.solo_gpcs, MemoryOption):
            st = solo_state(g, opt)
            by_id.setdefault(st.state_id, st)
        object.__setattr__(self, "_by_id", by_id)

    def resolve(self, state_id: str) -> PartitionState:
        try:
            return self._by_id[state_id]
        except KeyError:
            raise InvalidAllocation(f"unknown state id {state_id!r}") from None

    def candidates(self):
        """All (partition, power) pairs, state order first then ascending power."""
        return [HardwareState(s, p) for s in self.states for p in self.power_caps_w]

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpace":
        kwargs = {}
        if "states" in data:
            kwargs["states"] = tuple(
                PartitionState.uniform(s["id"], s["gpcs"], s["option"]) for s in data["states"]
            )
        if "power_caps_w" in data:
            kwargs["power_caps_w"] = tuple(sorted(int(p) for p in data["power_caps_w"]))
        if "solo_gpcs" in data:
            kwargs["solo_gpcs"] = tuple(int(g) for g in data["solo_gpcs"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "states": [
                {"id": s.state_id, "gpcs": list(s.gpcs), "option": s.option.value} for s in self.states
            ],
            "power_caps_w": list(self.power_caps_w),
            "solo_gpcs": list(self.solo_gpcs),
        }


def load_state_space(path=None) -> StateSpace:
    if path is None:
        return StateSpace()
    with open(path) as fh:
        return StateSpace.from_dict(json.load(fh))


def default_state_space() -> list:
    return [
        PartitionState.uniform("S1", (4, 3), MemoryOption.SHARED),
        PartitionState.uniform("S2", (3, 4), MemoryOption.SHARED),
        PartitionState.uniform("S3", (4, 3), MemoryOption.PRIVATE),
        PartitionState.uniform("S4", (3, 4), MemoryOption.PRIVATE),
    ]


def private_memory_modules(gpcs: int) -> int:
    """LLC/HBM modules (out of 8) owned by a private slice of ``gpcs`` GPCs."""
    try:
        return _PRIVATE_MODULES[gpcs]
    except (KeyError, TypeError):
        raise InvalidAllocation(
            f"{gpcs} GPCs is not an allocatable slice size (allowed {ALLOWED_SLICE_GPCS})"
        ) from None


def validate(state: HardwareState, n_apps: int, power_caps_w=DEFAULT_POWER_CAPS) -> None:
    """Raise InvalidAllocation unless ``state`` can host ``n_apps`` applications.

    ``power_caps_w=None`` skips the power-menu check.
    """
    part = state.partition
    if len(part.slices) != n_apps:
        raise InvalidAllocation(f"{part.state_id}: {len(part.slices)} slices for {n_apps} apps")
    for i, sl in enumerate(part.slices):
        if sl.gpcs not in ALLOWED_SLICE_GPCS:
            raise InvalidAllocation(f"{part.state_id}: slice {i} has {sl.gpcs} GPCs (allowed {ALLOWED_SLICE_GPCS})")
        if sl.option != part.option:
            raise InvalidAllocation(f"{part.state_id}: slice {i} mixes memory options")
    total = sum(part.gpcs)
    if total > USABLE_GPCS:
        raise InvalidAllocation(f"{part.state_id}: {total} GPCs allocated, only {USABLE_GPCS} usable")
    if power_caps_w is not None and state.power_w not in power_caps_w:
        raise InvalidAllocation(f"power cap {state.power_w} W not in menu {list(power_caps_w)}")
