import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from migsched.errors import InsufficientSamples, MissingScalabilityCoefficients, RankDeficient, UnknownKey
from migsched.model import (
    CoefficientTable,
    SliceKey,
    TrainingSample,
    dump_training,
    fit,
    fit_interference,
    fit_solo,
    interference_design,
    load_training,
    predict_pair,
    predict_rperf,
    slice_key,
    solo_design,
)
from migsched.profiles import ApplicationProfile, compute_h, compute_j
from migsched.statespace import HardwareState, MemoryOption, PartitionState, StateSpace, default_state_space, solo_state

S1, S2, S3, S4 = default_state_space()
SOLO_KEY = SliceKey(3, MemoryOption.PRIVATE, 190)
SOLO_STATE = HardwareState(solo_state(3, "private"), 190)
CORUN_STATE = HardwareState(S1, 210)
CORUN_KEY = SliceKey(4, MemoryOption.SHARED, 210)


def random_profiles(rng, n, prefix="p"):
    out = []
    for k in range(n):
        f1 = rng.uniform(20, 100)
        tensor = rng.uniform(0, f1) if rng.random() < 0.5 else 0.0
        f = (f1, rng.uniform(5, 100), rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(10, 100),
             tensor, 0.0, 0.0)
        out.append(ApplicationProfile(f"{prefix}{k}", f))
    return out


def random_coefs(rng, n):
    return rng.uniform(0.2, 1.0, n) * rng.choice([-1.0, 1.0], n)


def normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


def solo_samples(profs, c_true, state=SOLO_STATE, noise=0.0, rng=None):
    X = np.array([compute_h(p) for p in profs])
    y = X @ c_true
    if noise:
        y = y + rng.normal(0, noise, len(y))
    return [TrainingSample(p, (), state, 0, float(v)) for p, v in zip(profs, y)]


def positive_c(rng, profs):
    c = random_coefs(rng, 6)
    X = np.array([compute_h(p) for p in profs])
    c[5] += 0.1 - min(0.0, (X @ c).min())
    return c


def test_exact_recovery_solo():
    rng = np.random.default_rng(0)
    profs = random_profiles(rng, 10)
    c_true = positive_c(rng, profs)
    table = fit_solo(solo_samples(profs, c_true))
    c = table.c[SOLO_KEY]
    assert np.max(np.abs(c - c_true) / np.abs(c_true)) < 1e-6
    assert table.stats[SOLO_KEY].rms_solo < 1e-9
    assert table.stats[SOLO_KEY].n_solo == 10


def test_insufficient_solo_samples():
    rng = np.random.default_rng(1)
    profs = random_profiles(rng, 5)
    with pytest.raises(InsufficientSamples) as exc:
        fit_solo(solo_samples(profs, positive_c(rng, profs)))
    assert exc.value.key == SOLO_KEY


def test_noisy_recovery_against_normal_equations():
    rng = np.random.default_rng(2024)
    profs = random_profiles(rng, 50)
    c_true = positive_c(rng, profs)
    samples = solo_samples(profs, c_true, noise=0.01, rng=rng)
    c = fit_solo(samples).c[SOLO_KEY]
    X, y = solo_design(sorted(samples, key=TrainingSample.sort_key))
    assert np.allclose(c, normal_equations(X, y), rtol=0, atol=1e-9)
    assert np.max(np.abs(c - c_true)) < 0.02


def test_rank_deficient_solo():
    p = random_profiles(np.random.default_rng(3), 1)[0]
    samples = [TrainingSample(p, (), SOLO_STATE, 0, 0.5) for _ in range(8)]
    with pytest.raises(RankDeficient):
        fit_solo(samples)


def corun_samples(subjects, partners, c_true, d_true, state=CORUN_STATE):
    out = []
    for s, p in zip(subjects, partners):
        y = float(c_true @ np.asarray(compute_h(s)) + d_true @ np.asarray(compute_j(p)))
        out.append(TrainingSample(s, (p,), state, 0, y))
    return out


def test_exact_recovery_interference():
    rng = np.random.default_rng(5)
    subjects = random_profiles(rng, 12, "s")
    partners = random_profiles(rng, 12, "q")
    c_true = positive_c(rng, subjects)
    d_true = np.array([-0.3, 0.2, -0.05])
    c_solo_state = HardwareState(solo_state(4, "shared"), 210)
    c_table = fit_solo(solo_samples(subjects, c_true, state=c_solo_state))
    table = fit_interference(corun_samples(subjects, partners, c_true, d_true), c_table)
    d = table.d[CORUN_KEY]
    assert np.max(np.abs(d - d_true) / np.abs(d_true)) < 1e-6
    assert table.stats[CORUN_KEY].rms_corun < 1e-9
    assert table.stats[CORUN_KEY].n_corun == 12


def test_identical_partners_rank_deficient():
    rng = np.random.default_rng(6)
    subjects = random_profiles(rng, 10, "s")
    partner = random_profiles(rng, 1, "q")[0]
    c_true = positive_c(rng, subjects)
    c_table = CoefficientTable({CORUN_KEY: c_true})
    samples = corun_samples(subjects, [partner] * 10, c_true, np.array([-0.2, 0.1, 0.0]))
    X, _ = interference_design(samples, c_true)
    sv = np.linalg.svd(X, compute_uv=False)
    assert np.sum(sv > 1e-10 * sv[0]) == 1
    with pytest.raises(RankDeficient):
        fit_interference(samples, c_table)


def test_interference_needs_scalability_coefs():
    rng = np.random.default_rng(7)
    s = random_profiles(rng, 4)
    samples = corun_samples(s, s[::-1], np.ones(6), np.ones(3))
    with pytest.raises(MissingScalabilityCoefficients):
        fit_interference(samples, CoefficientTable())
    with pytest.raises(MissingScalabilityCoefficients):
        fit(samples)


def test_interference_insufficient():
    rng = np.random.default_rng(8)
    s = random_profiles(rng, 2)
    samples = corun_samples(s, s[::-1], np.ones(6), np.ones(3))
    with pytest.raises(InsufficientSamples):
        fit_interference(samples, CoefficientTable({CORUN_KEY: np.ones(6)}))


PROFILE = ApplicationProfile("x", (80, 40, 30, 60, 50, 10, 0, 0))


def test_predict_constant_model():
    table = CoefficientTable({SOLO_KEY: np.array([0, 0, 0, 0, 0, 0.8])})
    assert predict_rperf(PROFILE, [], SOLO_KEY, table) == pytest.approx(0.8)


def test_predict_hand_dot_product():
    table = CoefficientTable({CORUN_KEY: np.array([1.0, 0, 0, 0, 0, 0])},
                             {CORUN_KEY: np.array([-0.5, 0, 0])})
    # c.H = h1 = 0.70; d.J = -0.5 * f3/100 = -0.15
    assert predict_rperf(PROFILE, [PROFILE], CORUN_KEY, table) == pytest.approx(0.55)


def test_predict_clamps_at_zero():
    table = CoefficientTable({CORUN_KEY: np.array([0, 0, 0, 0, 0, 0.05])},
                             {CORUN_KEY: np.array([0, 0, -0.2])})
    assert predict_rperf(PROFILE, [PROFILE], CORUN_KEY, table) == 0.0


def test_predict_unknown_key():
    table = CoefficientTable({SOLO_KEY: np.ones(6)})
    with pytest.raises(UnknownKey):
        predict_rperf(PROFILE, [], CORUN_KEY, table)
    with pytest.raises(UnknownKey):
        predict_rperf(PROFILE, [PROFILE], SOLO_KEY, table)


def test_solo_prediction_ignores_d():
    c = np.array([0.3, 0.2, -0.1, 0.05, 0.4, 0.2])
    with_d = CoefficientTable({SOLO_KEY: c}, {SOLO_KEY: np.array([5.0, -5.0, 1.0])})
    without = CoefficientTable({SOLO_KEY: c})
    assert predict_rperf(PROFILE, [], SOLO_KEY, with_d) == predict_rperf(PROFILE, [], SOLO_KEY, without)


@settings(deadline=None)
@given(st.floats(-0.05, 0.05), st.integers(0, 5), st.integers(0, 2))
def test_prediction_linear_in_coefficients(alpha, ci, di):
    c = np.array([0.4, 0.3, 0.05, 0.1, 0.2, 0.3])
    d = np.array([-0.1, 0.05, 0.02])
    partner = ApplicationProfile("y", (50, 60, 55, 30, 70, 0, 0, 0))
    base = predict_rperf(PROFILE, [partner], CORUN_KEY, CoefficientTable({CORUN_KEY: c}, {CORUN_KEY: d}))
    dc = np.zeros(6)
    dc[ci] = alpha
    dd = np.zeros(3)
    dd[di] = alpha
    moved = predict_rperf(PROFILE, [partner], CORUN_KEY, CoefficientTable({CORUN_KEY: c + dc}, {CORUN_KEY: d + dd}))
    expected = alpha * (compute_h(PROFILE)[ci] + compute_j(partner)[di])
    assert moved - base == pytest.approx(expected, abs=1e-12)


def test_predict_pair_oracle_bounds(clean_table, profiles):
    rp = predict_pair([profiles["ti-hgemm"], profiles["mi-stream"]], HardwareState(S1, 250), clean_table)
    assert all(0 < r <= 1.1 for r in rp)


def test_predict_pair_single_slot(clean_table, profiles):
    hw = HardwareState(solo_state(7, "shared"), 250)
    p = profiles["ci-sgemm"]
    assert predict_pair([p], hw, clean_table) == [predict_rperf(p, [], slice_key(hw, 0), clean_table)]


def test_predict_pair_slot_symmetry(clean_table, profiles):
    a, b = profiles["ti-igemm"], profiles["us-bfs"]
    for fwd, rev in ((S1, S2), (S3, S4)):
        for p in (150, 250):
            x = predict_pair([a, b], HardwareState(fwd, p), clean_table)
            y = predict_pair([b, a], HardwareState(rev, p), clean_table)
            assert x == y[::-1]


def test_residual_orthogonality(noisy_table, apps, space, config):
    from dataclasses import replace
    from migsched.oracle import default_pairings, generate_dataset
    samples = generate_dataset(apps, space, default_pairings(apps), replace(config, noise_sigma=0.01, seed=7))[1]
    groups = {}
    for s in samples:
        groups.setdefault(s.key, []).append(s)
    for key, group in groups.items():
        solo = sorted((s for s in group if s.is_solo), key=TrainingSample.sort_key)
        corun = sorted((s for s in group if not s.is_solo), key=TrainingSample.sort_key)
        if solo:
            X, y = solo_design(solo)
            r = y - X @ noisy_table.c[key]
            assert np.max(np.abs(X.T @ r)) <= 1e-8 * np.linalg.norm(X) * np.linalg.norm(y)
        if corun:
            X, y = interference_design(corun, noisy_table.c[key])
            r = y - X @ noisy_table.d[key]
            assert np.max(np.abs(X.T @ r)) <= 1e-8 * np.linalg.norm(X) * np.linalg.norm(y)


def test_fit_is_order_independent(clean_data):
    samples = list(clean_data[1])
    ref = fit(samples)
    random.Random(3).shuffle(samples)
    shuffled = fit(samples)
    for key in ref.c:
        assert np.max(np.abs(ref.c[key] - shuffled.c[key])) <= 1e-12
    for key in ref.d:
        assert np.max(np.abs(ref.d[key] - shuffled.d[key])) <= 1e-12


def test_oracle_table_coverage(clean_table):
    assert len(clean_table.c) == 60
    assert sorted(clean_table.d) == sorted(
        SliceKey(g, o, p) for g in (3, 4) for o in MemoryOption for p in (150, 170, 190, 210, 230, 250)
    )


def test_coefficient_file_roundtrip(tmp_path, clean_table):
    path = tmp_path / "coef.json"
    clean_table.save(path)
    data = json.loads(path.read_text())
    assert data["version"] == 1
    row = data["keys"][0]
    assert set(row) == {"gpcs", "option", "power_w", "c", "d", "n_solo", "n_corun", "rms_solo", "rms_corun"}
    assert row["d"] is None and row["rms_corun"] is None and row["n_corun"] == 0
    back = CoefficientTable.load(path)
    assert back.keys() == clean_table.keys()
    for k in back.keys():
        assert np.array_equal(back.c[k], clean_table.c[k])
    back.save(tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_table_rejects_d_without_c():
    with pytest.raises(MissingScalabilityCoefficients):
        CoefficientTable({}, {SOLO_KEY: np.zeros(3)})


def test_training_file_roundtrip(tmp_path, clean_data, profiles):
    samples = clean_data[1][:5] + clean_data[1][-5:]
    path = tmp_path / "t.jsonl"
    dump_training(samples, path)
    rec = json.loads(path.read_text().splitlines()[-1])
    assert set(rec) == {"subject", "partners", "state_id", "slot", "power_w", "rperf"}
    assert load_training(path, profiles, StateSpace()) == samples


def test_interpolated_powers():
    lo, hi = SliceKey(3, MemoryOption.SHARED, 150), SliceKey(3, MemoryOption.SHARED, 190)
    table = CoefficientTable({lo: np.zeros(6), hi: np.ones(6)}, {lo: np.zeros(3), hi: np.full(3, 2.0)})
    filled = table.with_interpolated_powers([170, 250])
    mid = SliceKey(3, MemoryOption.SHARED, 170)
    assert np.allclose(filled.c[mid], 0.5) and np.allclose(filled.d[mid], 1.0)
    assert np.array_equal(filled.c[SliceKey(3, MemoryOption.SHARED, 250)], table.c[hi])
    assert filled.stats[mid].n_solo == 0


def test_sample_invariants():
    with pytest.raises(ValueError):
        TrainingSample(PROFILE, (), SOLO_STATE, 0, 0.0)
    with pytest.raises(ValueError):
        TrainingSample(PROFILE, (), CORUN_STATE, 0, 0.5)
