"""
Application counter profiles and the basis functions built on them.

A profile holds eight profiler counters, all in percent:

    f1 compute throughput    f5 occupancy
    f2 memory throughput     f6 tensor pipe (mixed precision)
    f3 DRAM throughput       f7 tensor pipe (double)
    f4 L2 hit rate           f8 tensor pipe (integer)

Counters are stored exactly as exported; the /100 scaling happens only in
the basis functions:

    H = (f1/100 - h2, (f6+f7+f8)/100, f2/f1, f4/100, f5/100, 1)
    J = (f3/100, f4/100, 1)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import DegenerateProfile, InvalidProfile

# Counters (percent) at or below this are treated as zero when used as divisors.
EPS_F1 = 0.01
# Summed tensor-pipe utilisation (percent) above which an app counts as tensor-using.
EPS_TENSOR = 0.1
# Relative-performance loss at minimum allocation below which an app is un-scalable.
US_DEGRADATION = 0.10
# f1/f2 above this is compute-bound.
COMPUTE_RATIO = 0.80

# Profile file field names, in counter order f1..f8.
COUNTER_FIELDS = (
    "compute_throughput",
    "memory_throughput",
    "dram_throughput",
    "l2_hit_rate",
    "occupancy",
    "tensor_mixed",
    "tensor_double",
    "tensor_integer",
)

@dataclass(frozen=True)
class ApplicationProfile:
    app_id: str
    f: tuple

    def __post_init__(self):
        f = tuple(float(x) for x in self.f)
        if len(f) != 8:
            raise InvalidProfile(f"{self.app_id}: expected 8 counters, got {len(f)}")
        for k, x in enumerate(f, start=1):
            if not (0.0 <= x <= 100.0):
                raise InvalidProfile(f"{self.app_id}: f{k}={x} outside [0, 100]")
        if f[5] + f[6] + f[7] > 100.0:
            raise InvalidProfile(f"{self.app_id}: tensor counters sum to {f[5] + f[6] + f[7]} > 100")
        object.__setattr__(self, "f", f)

    @property
    def tensor_total(self) -> float:
        return self.f[5] + self.f[6] + self.f[7]

    @classmethod
    def from_record(cls, record: dict) -> "ApplicationProfile":
        counters = record["counters"]
        missing = [name for name in COUNTER_FIELDS if name not in counters]
        if missing:
            raise InvalidProfile(f"{record.get('app_id')}: missing counters {missing}")
        return cls(str(record["app_id"]), tuple(counters[name] for name in COUNTER_FIELDS))

    def to_record(self) -> dict:
        return {"app_id": self.app_id, "counters": dict(zip(COUNTER_FIELDS, self.f))}


class FeatureH(NamedTuple):
    h1: float  # non-tensor compute intensity
    h2: float  # tensor compute intensity
    h3: float  # memory/compute ratio
    h4: float
    h5: float  # resource utilisation
    h6: float  # constant


class FeatureJ(NamedTuple):
    j1: float  # DRAM intensity
    j2: float  # access-pattern proxy
    j3: float  # constant


class WorkloadClass(str, Enum):
    TI = "TI"
    CI = "CI"
    MI = "MI"
    US = "US"


def compute_h(profile: ApplicationProfile) -> FeatureH:
    f = profile.f
    if f[0] <= EPS_F1:
        raise DegenerateProfile(f"{profile.app_id}: compute throughput {f[0]}% is idle; f2/f1 undefined")
    h2 = (f[5] + f[6] + f[7]) / 100.0
    return FeatureH(f[0] / 100.0 - h2, h2, f[1] / f[0], f[3] / 100.0, f[4] / 100.0, 1.0)


def compute_j(profile: ApplicationProfile) -> FeatureJ:
    f = profile.f
    return FeatureJ(f[2] / 100.0, f[3] / 100.0, 1.0)


def classify(profile: ApplicationProfile, rperf_at_min_alloc: float) -> WorkloadClass:
    """Assign one of the four workload classes.

    ``rperf_at_min_alloc`` is the app's relative performance on one GPC with
    private memory at the lowest power cap, measured or taken from the oracle.
    Apps losing less than 10% there are un-scalable; the rest split on the
    compute/memory throughput ratio and tensor-pipe usage.
    """
    if not rperf_at_min_alloc >= 0 or math.isnan(rperf_at_min_alloc):
        raise ValueError(f"rperf_at_min_alloc must be >= 0, got {rperf_at_min_alloc}")
    if 1.0 - rperf_at_min_alloc < US_DEGRADATION:
        return WorkloadClass.US
    f = profile.f
    if f[1] <= EPS_F1:
        raise DegenerateProfile(f"{profile.app_id}: memory throughput {f[1]}% is idle; f1/f2 undefined")
    if f[0] / f[1] > COMPUTE_RATIO:
        return WorkloadClass.TI if profile.tensor_total > EPS_TENSOR else WorkloadClass.CI
    return WorkloadClass.MI


def load_profiles(path) -> dict[str, ApplicationProfile]:
    """Read a line-delimited JSON profile file into an ``app_id -> profile`` map."""
    profiles = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                prof = ApplicationProfile.from_record(json.loads(line))
            except (KeyError, json.JSONDecodeError) as exc:
                raise InvalidProfile(f"{path}:{lineno}: {exc}") from exc
            if prof.app_id in profiles:
                raise InvalidProfile(f"{path}:{lineno}: duplicate app_id {prof.app_id!r}")
            profiles[prof.app_id] = prof
    return profiles


def dump_profiles(profiles: Iterable[ApplicationProfile], path) -> None:
    Path(path).write_text("".join(json.dumps(p.to_record()) + "\n" for p in profiles))

