"""
Per-slice linear regression model of relative performance.

For an application i placed on a slice with key k = (gpcs, option, power):

    rperf_i = C[k] . H(F_i) + sum_{j != i} D[k] . J(F_j)

C (6 coefficients) is fitted first from exclusive solo runs, where the
interference sum vanishes. D (3 coefficients) is then fitted on co-run
samples against the residual left by C, with partner J vectors summed per
sample. Both fits are ordinary least squares through a QR factorisation,
after an SVD rank check.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InsufficientSamples,
    InvalidAllocation,
    MissingScalabilityCoefficients,
    RankDeficient,
    UnknownKey,
)
from .profiles import ApplicationProfile, compute_h, compute_j
from .statespace import HardwareState, MemoryOption, StateSpace, validate

N_C = 6
N_D = 3
RANK_RTOL = 1e-10
FORMAT_VERSION = 1


@dataclass(frozen=True, order=True)
class SliceKey:
    gpcs: int
    option: MemoryOption
    power_w: int

    def __str__(self):
        return f"{self.gpcs}g/{self.option.value}/{self.power_w}W"


def slice_key(state: HardwareState, slot: int) -> SliceKey:
    sl = state.partition.slices[slot]
    return SliceKey(sl.gpcs, sl.option, state.power_w)


@dataclass(frozen=True)
class TrainingSample:
    subject: ApplicationProfile
    partners: tuple
    state: HardwareState
    subject_slot: int
    measured_rperf: float

    def __post_init__(self):
        object.__setattr__(self, "partners", tuple(self.partners))
        if not self.measured_rperf > 0:
            raise ValueError(f"measured_rperf must be > 0, got {self.measured_rperf}")
        n_slices = len(self.state.partition.slices)
        if len(self.partners) != n_slices - 1:
            raise ValueError(f"{len(self.partners)} partners for a {n_slices}-slice state")
        if not 0 <= self.subject_slot < n_slices:
            raise ValueError(f"slot {self.subject_slot} out of range for {n_slices} slices")

    @property
    def key(self) -> SliceKey:
        return slice_key(self.state, self.subject_slot)

    @property
    def is_solo(self) -> bool:
        return not self.partners

    def sort_key(self):
        return (
            self.subject.app_id,
            self.subject.f,
            tuple(p.app_id for p in self.partners),
            self.state.partition.state_id,
            self.subject_slot,
            self.measured_rperf,
        )


@dataclass(frozen=True)
class KeyStats:
    n_solo: int = 0
    n_corun: int = 0
    rms_solo: float = math.nan
    rms_corun: Optional[float] = None


@dataclass(frozen=True)
class CoefficientTable:
    c: dict = field(default_factory=dict)
    d: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, vec in self.c.items():
            if len(vec) != N_C:
                raise ValueError(f"{key}: C has {len(vec)} entries, expected {N_C}")
        for key, vec in self.d.items():
            if key not in self.c:
                raise MissingScalabilityCoefficients(key)
            if len(vec) != N_D:
                raise ValueError(f"{key}: D has {len(vec)} entries, expected {N_D}")

    def keys(self):
        return sorted(self.c)

    def c_for(self, key: SliceKey) -> np.ndarray:
        try:
            return self.c[key]
        except KeyError:
            raise UnknownKey(key, "scalability coefficients (C)") from None

    def d_for(self, key: SliceKey) -> np.ndarray:
        try:
            return self.d[key]
        except KeyError:
            raise UnknownKey(key, "interference coefficients (D)") from None

    def to_dict(self) -> dict:
        rows = []
        for key in self.keys():
            st = self.stats.get(key, KeyStats())
            d = self.d.get(key)
            rows.append({
                "gpcs": key.gpcs,
                "option": key.option.value,
                "power_w": key.power_w,
                "c": [float(x) for x in self.c[key]],
                "d": None if d is None else [float(x) for x in d],
                "n_solo": st.n_solo,
                "n_corun": st.n_corun,
                "rms_solo": None if math.isnan(st.rms_solo) else st.rms_solo,
                "rms_corun": st.rms_corun,
            })
        return {"version": FORMAT_VERSION, "keys": rows}

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientTable":
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported coefficient file version {data.get('version')!r}")
        c, d, stats = {}, {}, {}
        for row in data["keys"]:
            key = SliceKey(int(row["gpcs"]), MemoryOption(row["option"]), int(row["power_w"]))
            c[key] = np.array(row["c"], dtype=float)
            if row.get("d") is not None:
                d[key] = np.array(row["d"], dtype=float)
            rms_solo = row.get("rms_solo")
            stats[key] = KeyStats(
                int(row.get("n_solo", 0)),
                int(row.get("n_corun", 0)),
                math.nan if rms_solo is None else float(rms_solo),
                row.get("rms_corun"),
            )
        return cls(c, d, stats)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "CoefficientTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_interpolated_powers(self, powers) -> "CoefficientTable":
        """Fill in keys for untrained power caps.

        For every (gpcs, option) group, a missing power between two trained
        caps gets coefficients linearly interpolated in watts; outside the
        trained range the nearest trained cap is copied. Filled keys carry
        zero sample counts.
        """
        groups = defaultdict(list)
        for key in self.c:
            groups[(key.gpcs, key.option)].append(key.power_w)
        c, d, stats = dict(self.c), dict(self.d), dict(self.stats)
        for (gpcs, option), have in groups.items():
            have = sorted(have)
            for p in powers:
                key = SliceKey(gpcs, option, int(p))
                if key in c:
                    continue
                lo = max((q for q in have if q < p), default=None)
                hi = min((q for q in have if q > p), default=None)
                if lo is None or hi is None:
                    near = SliceKey(gpcs, option, lo if hi is None else hi)
                    c[key] = self.c[near]
                    if near in self.d:
                        d[key] = self.d[near]
                else:
                    klo, khi = SliceKey(gpcs, option, lo), SliceKey(gpcs, option, hi)
                    w = (p - lo) / (hi - lo)
                    c[key] = (1 - w) * self.c[klo] + w * self.c[khi]
                    if klo in self.d and khi in self.d:
                        d[key] = (1 - w) * self.d[klo] + w * self.d[khi]
                stats[key] = KeyStats()
        return CoefficientTable(c, d, stats)


def solve_least_squares(X: np.ndarray, y: np.ndarray, key=None) -> np.ndarray:
    """Full-rank least squares via QR; raises RankDeficient below RANK_RTOL."""
    n_rows, n_cols = X.shape
    if n_rows < n_cols:
        raise InsufficientSamples(key, n_rows, n_cols)
    sv = np.linalg.svd(X, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
    if rank < n_cols:
        raise RankDeficient(key, rank, n_cols)
    q, r = np.linalg.qr(X)
    return np.linalg.solve(r, q.T @ y)


def _group(samples):
    groups = defaultdict(list)
    for s in samples:
        groups[s.key].append(s)
    return {k: sorted(v, key=TrainingSample.sort_key) for k, v in sorted(groups.items())}


def _rms(residual: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residual**2)))


def solo_design(samples: Sequence[TrainingSample]):
    X = np.array([compute_h(s.subject) for s in samples], dtype=float)
    y = np.array([s.measured_rperf for s in samples], dtype=float)
    return X, y


def interference_design(samples: Sequence[TrainingSample], c: np.ndarray):
    X = np.array([np.sum([compute_j(p) for p in s.partners], axis=0) for s in samples], dtype=float)
    y = np.array([s.measured_rperf - float(c @ np.asarray(compute_h(s.subject))) for s in samples])
    return X, y


def fit_solo(samples: Sequence[TrainingSample]) -> CoefficientTable:
    c, stats = {}, {}
    for key, group in _group(samples).items():
        if any(not s.is_solo for s in group):
            raise ValueError(f"{key}: fit_solo given co-run samples")
        if len(group) < N_C:
            raise InsufficientSamples(key, len(group), N_C)
        X, y = solo_design(group)
        coef = solve_least_squares(X, y, key)
        c[key] = coef
        stats[key] = KeyStats(n_solo=len(group), rms_solo=_rms(y - X @ coef))
    return CoefficientTable(c, {}, stats)


def fit_interference(samples: Sequence[TrainingSample], c_table: CoefficientTable) -> CoefficientTable:
    d, stats = dict(c_table.d), dict(c_table.stats)
    for key, group in _group(samples).items():
        if any(s.is_solo for s in group):
            raise ValueError(f"{key}: fit_interference given solo samples")
        if key not in c_table.c:
            raise MissingScalabilityCoefficients(key)
        if len(group) < N_D:
            raise InsufficientSamples(key, len(group), N_D)
        X, y = interference_design(group, c_table.c[key])
        coef = solve_least_squares(X, y, key)
        d[key] = coef
        prev = stats.get(key, KeyStats())
        stats[key] = KeyStats(prev.n_solo, len(group), prev.rms_solo, _rms(y - X @ coef))
    return CoefficientTable(dict(c_table.c), d, stats)


def fit(samples: Sequence[TrainingSample]) -> CoefficientTable:
    """Two-stage fit: C from the solo samples, then D from the co-run samples."""
    solo = [s for s in samples if s.is_solo]
    corun = [s for s in samples if not s.is_solo]
    return fit_interference(corun, fit_solo(solo))


def predict_rperf(subject: ApplicationProfile, partners: Sequence[ApplicationProfile],
                  key: SliceKey, table: CoefficientTable) -> float:
    value = float(table.c_for(key) @ np.asarray(compute_h(subject)))
    if partners:
        d = table.d_for(key)
        for p in partners:
            value += float(d @ np.asarray(compute_j(p)))
    return max(0.0, value)


def predict_pair(apps: Sequence[ApplicationProfile], state: HardwareState,
                 table: CoefficientTable) -> list:
    """Predicted rperf for each app, ``apps[i]`` running on ``state`` slot i."""
    validate(state, len(apps), power_caps_w=None)
    out = []
    for i, app in enumerate(apps):
        partners = [a for j, a in enumerate(apps) if j != i]
        out.append(predict_rperf(app, partners, slice_key(state, i), table))
    return out


def sample_to_record(s: TrainingSample) -> dict:
    return {
        "subject": s.subject.app_id,
        "partners": [p.app_id for p in s.partners],
        "state_id": s.state.partition.state_id,
        "slot": s.subject_slot,
        "power_w": s.state.power_w,
        "rperf": s.measured_rperf,
    }


def dump_training(samples: Sequence[TrainingSample], path) -> None:
    Path(path).write_text("".join(json.dumps(sample_to_record(s)) + "\n" for s in samples))


def load_training(path, profiles: dict, space: StateSpace | None = None) -> list:
    """Read a training file, resolving app ids against ``profiles``."""
    space = space or StateSpace()
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                subject = profiles[rec["subject"]]
                partners = tuple(profiles[p] for p in rec["partners"])
            except KeyError as exc:
                raise InvalidAllocation(f"{path}:{lineno}: unknown app_id {exc.args[0]!r}") from None
            state = HardwareState(space.resolve(rec["state_id"]), int(rec["power_w"]))
            validate(state, len(partners) + 1, power_caps_w=None)
            samples.append(TrainingSample(subject, partners, state, int(rec["slot"]), float(rec["rperf"])))
    return samples
