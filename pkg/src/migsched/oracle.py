"""
Synthetic GPU used as ground truth in place of hardware measurements.

Each synthetic application is described by four numbers: compute demand
``c`` and bandwidth demand ``b`` (fractions of the whole chip), the tensor
share ``t`` of its compute and an L2 hit proxy ``l2``. Its performance on a
slice is the tightest of three limits (full speed, compute supply over
demand, bandwidth supply over demand), normalised to the same quantity on
the unpartitioned chip at the baseline power cap.

Power: an app on g GPCs draws ``w_base + w_gpc * g * c * (1 + kappa * t)``;
when that exceeds the cap its compute is throttled by
``(cap - w_base) / (draw - w_base)``, floored at ``f_min``. Bandwidth is never
throttled. By default each app is throttled on its own draw, so private
slices are fully isolated; ``chip_power_coupling=True`` sums the draw over
all co-runners and throttles every slice by the shared factor.

Memory: a private slice owns its LLC/HBM modules outright; shared slices
split one pool in proportion to demand once it is oversubscribed.
"""

from __future__ import annotations

import errno
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidAllocation
from .model import TrainingSample, dump_training
from .profiles import EPS_F1, ApplicationProfile, WorkloadClass, dump_profiles
from .statespace import (
    HardwareState,
    MemoryOption,
    StateSpace,
    private_memory_modules,
    solo_state,
    validate,
)

MIN_RPERF = 1e-6


@dataclass(frozen=True)
class SyntheticApp:
    app_id: str
    c: float
    b: float
    t: float = 0.0
    l2: float = 0.5

    def __post_init__(self):
        if not (EPS_F1 / 100 < self.c <= 1):
            raise ValueError(f"{self.app_id}: compute demand c={self.c} outside ({EPS_F1 / 100}, 1]")
        for name in ("b", "t", "l2"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{self.app_id}: {name}={v} outside [0, 1]")


@dataclass(frozen=True)
class OracleConfig:
    w_base: float = 50.0
    w_gpc: float = 25.0
    kappa: float = 0.6
    f_min: float = 0.1
    total_gpcs_nomig: int = 8
    usable_gpcs_mig: int = 7
    baseline_power_w: int = 250
    memory_modules: int = 8
    seed: int = 0
    noise_sigma: float = 0.0
    # False: each app is throttled on its own draw, so co-runners never
    # interact through power. True: one chip-wide draw throttles every slice.
    chip_power_coupling: bool = False

    def __post_init__(self):
        if not 0 < self.f_min < 1:
            raise ValueError(f"f_min must be in (0, 1), got {self.f_min}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def check_power_menu(self, powers) -> None:
        if self.w_base >= min(powers):
            raise ValueError(f"w_base {self.w_base} W must be below the lowest cap {min(powers)} W")

    @classmethod
    def from_dict(cls, data: dict) -> "OracleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown oracle config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path=None) -> "OracleConfig":
        if path is None:
            return cls()
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def _throttle(apps, gpcs, power_w, config: OracleConfig) -> float:
    draw = config.w_base + config.w_gpc * sum(
        g * a.c * (1 + config.kappa * a.t) for a, g in zip(apps, gpcs)
    )
    if draw <= power_w:
        return 1.0
    return min(1.0, max(config.f_min, (power_w - config.w_base) / (draw - config.w_base)))


def _raw_perf(app: SyntheticApp, compute_supply: float, mem_supply: float) -> float:
    perf = min(1.0, compute_supply / app.c)
    if app.b > 0:
        perf = min(perf, mem_supply / app.b)
    return perf


def baseline_perf(app: SyntheticApp, config: OracleConfig = OracleConfig()) -> float:
    """Unnormalised performance alone on the full chip at the baseline cap."""
    g = config.total_gpcs_nomig
    thr = _throttle([app], [g], config.baseline_power_w, config)
    return _raw_perf(app, thr, 1.0)


def true_rperf(apps: Sequence[SyntheticApp], state: HardwareState, slot: int,
               config: OracleConfig = OracleConfig()) -> float:
    validate(state, len(apps), power_caps_w=None)
    if not 0 <= slot < len(apps):
        raise InvalidAllocation(f"slot {slot} out of range for {len(apps)} apps")
    part = state.partition
    gpcs = part.gpcs
    app = apps[slot]
    if config.chip_power_coupling:
        thr = _throttle(apps, gpcs, state.power_w, config)
    else:
        thr = _throttle([app], [gpcs[slot]], state.power_w, config)
    compute = gpcs[slot] / config.total_gpcs_nomig * thr
    if part.option is MemoryOption.PRIVATE:
        mem = private_memory_modules(gpcs[slot]) / config.memory_modules
    else:
        demand = sum(a.b for a in apps)
        mem = app.b if demand <= 1 else app.b / demand
    return _raw_perf(app, compute, mem) / baseline_perf(app, config)


def true_rperfs(apps: Sequence[SyntheticApp], state: HardwareState,
                config: OracleConfig = OracleConfig()) -> list:
    return [true_rperf(apps, state, i, config) for i in range(len(apps))]


def synthesize_profile(app: SyntheticApp) -> ApplicationProfile:
    c, b = app.c, app.b
    f = (
        100 * c,
        min(100.0, 100 * max(b, 0.25 * c)),
        100 * b,
        100 * app.l2,
        100 * min(1.0, c + b),
        100 * c * app.t,
        0.0,
        0.0,
    )
    return ApplicationProfile(app.app_id, f)


# (app_id, c, b, t, l2, expected class)
DEFAULT_SUITE = (
    ("ti-hgemm", 1.00, 0.10, 1.00, 0.50, WorkloadClass.TI),
    ("ti-igemm", 0.85, 0.20, 0.80, 0.65, WorkloadClass.TI),
    ("ti-tf32", 0.90, 0.30, 0.60, 0.40, WorkloadClass.TI),
    ("ci-sgemm", 0.95, 0.25, 0.00, 0.70, WorkloadClass.CI),
    ("ci-hotspot", 0.75, 0.35, 0.00, 0.45, WorkloadClass.CI),
    ("ci-lavamd", 0.60, 0.15, 0.00, 0.80, WorkloadClass.CI),
    ("mi-stream", 0.30, 0.90, 0.00, 0.10, WorkloadClass.MI),
    ("mi-gauss", 0.40, 0.70, 0.00, 0.30, WorkloadClass.MI),
    ("mi-random", 0.20, 0.60, 0.00, 0.05, WorkloadClass.MI),
    ("us-kmeans", 0.10, 0.05, 0.00, 0.50, WorkloadClass.US),
    ("us-bfs", 0.08, 0.10, 0.00, 0.30, WorkloadClass.US),
    ("us-needle", 0.05, 0.08, 0.00, 0.65, WorkloadClass.US),
)

# Co-run pairs: same-class and cross-class mixes, two of each, no TI-CI.
DEFAULT_PAIRINGS = (
    ("TI-TI1", "ti-hgemm", "ti-igemm"),
    ("TI-TI2", "ti-tf32", "ti-hgemm"),
    ("CI-CI1", "ci-sgemm", "ci-lavamd"),
    ("CI-CI2", "ci-hotspot", "ci-sgemm"),
    ("MI-MI1", "mi-random", "mi-gauss"),
    ("MI-MI2", "mi-stream", "mi-random"),
    ("US-US1", "us-bfs", "us-needle"),
    ("US-US2", "us-kmeans", "us-needle"),
    ("TI-MI1", "ti-hgemm", "mi-gauss"),
    ("TI-MI2", "ti-igemm", "mi-stream"),
    ("CI-MI1", "ci-hotspot", "mi-gauss"),
    ("CI-MI2", "ci-sgemm", "mi-random"),
    ("TI-US1", "ti-igemm", "us-bfs"),
    ("TI-US2", "ti-tf32", "us-kmeans"),
    ("CI-US1", "ci-lavamd", "us-needle"),
    ("CI-US2", "ci-sgemm", "us-bfs"),
    ("MI-US1", "mi-gauss", "us-kmeans"),
    ("MI-US2", "mi-random", "us-needle"),
)


def default_workload_suite(config: OracleConfig = OracleConfig()) -> list:
    """Synthetic apps with the class each is built to fall into."""
    return [(SyntheticApp(name, c, b, t, l2), cls) for name, c, b, t, l2, cls in DEFAULT_SUITE]


def default_pairings(apps: Sequence[SyntheticApp]) -> list:
    """``(name, i, j)`` index pairs into ``apps`` for the default co-run workloads."""
    index = {a.app_id: k for k, a in enumerate(apps)}
    return [(name, index[x], index[y]) for name, x, y in DEFAULT_PAIRINGS]


def min_alloc_rperf(app: SyntheticApp, config: OracleConfig = OracleConfig(),
                    power_caps_w=None) -> float:
    """rperf on one private GPC at the lowest cap, the input to classify()."""
    power = min(power_caps_w or StateSpace().power_caps_w)
    return true_rperf([app], HardwareState(solo_state(1, MemoryOption.PRIVATE), power), 0, config)


def generate_dataset(apps: Sequence[SyntheticApp], space: StateSpace, pairing,
                     config: OracleConfig = OracleConfig()):
    """Oracle training data mirroring a solo-scaling then co-run campaign.

    Solo samples cover every app on every solo slice size under both memory
    options at every cap; co-run samples cover every pairing on every state
    at every cap, one sample per slot. ``pairing`` holds ``(i, j)`` or
    ``(name, i, j)`` entries. Gaussian noise of ``config.noise_sigma`` is
    drawn from ``config.seed`` in record order.
    """
    config.check_power_menu(space.power_caps_w)
    profiles = {a.app_id: synthesize_profile(a) for a in apps}
    raw = []
    for app in apps:
        for option in MemoryOption:
            for g in space.solo_gpcs:
                part = solo_state(g, option)
                for p in space.power_caps_w:
                    state = HardwareState(part, p)
                    raw.append(([app], state, 0, true_rperf([app], state, 0, config)))
    for entry in pairing:
        i, j = entry[-2:]
        pair = [apps[i], apps[j]]
        for part in space.states:
            for p in space.power_caps_w:
                state = HardwareState(part, p)
                for slot in range(2):
                    raw.append((pair, state, slot, true_rperf(pair, state, slot, config)))

    rng = np.random.default_rng(config.seed)
    samples = []
    for group, state, slot, value in raw:
        if config.noise_sigma > 0:
            value = max(MIN_RPERF, value + rng.normal(0.0, config.noise_sigma))
        subject = profiles[group[slot].app_id]
        partners = tuple(profiles[a.app_id] for k, a in enumerate(group) if k != slot)
        samples.append(TrainingSample(subject, partners, state, slot, float(value)))
    return list(profiles.values()), samples


def write_dataset(out_dir, apps, space, pairing, config: OracleConfig = OracleConfig()):
    out = Path(out_dir)
    if not out.is_dir():
        raise FileNotFoundError(errno.ENOENT, "output directory does not exist", str(out))
    profiles, samples = generate_dataset(apps, space, pairing, config)
    prof_path, train_path = out / "profiles.jsonl", out / "training.jsonl"
    dump_profiles(profiles, prof_path)
    dump_training(samples, train_path)
    return prof_path, train_path


class OracleEvaluator:
    """Ground-truth rperfs for profiles whose app ids name synthetic apps."""

    def __init__(self, apps: Sequence[SyntheticApp], config: OracleConfig = OracleConfig()):
        self.apps = {a.app_id: a for a in apps}
        self.config = config

    def __call__(self, profiles: Sequence[ApplicationProfile], state: HardwareState) -> list:
        group = [self.apps[p.app_id] for p in profiles]
        return true_rperfs(group, state, self.config)
