"""Scoring the model and its decisions against oracle ground truth."""

from __future__ import annotations

import math

import numpy as np

from .errors import Infeasible
from .model import predict_pair
from .oracle import OracleEvaluator, default_pairings, default_workload_suite, synthesize_profile
from .policy import PolicyProblem, compare_worst_best, fairness, throughput
from .statespace import HardwareState


def geomean(xs) -> float:
    return math.exp(math.fsum(math.log(x) for x in xs) / len(xs)) if len(xs) else math.nan


def _suite(cfg):
    apps = [a for a, _ in default_workload_suite(cfg)]
    profiles = {a.app_id: synthesize_profile(a) for a in apps}
    return apps, profiles


def evaluate_suite(table, space, cfg, kind, alpha, power_w=None) -> dict:
    """Worst/proposal/best under oracle truth for every default pairing.

    Pairings where either the truth or the model admits no feasible
    candidate are listed under ``infeasible`` and left out of the geomeans.
    """
    apps, profiles = _suite(cfg)
    truth = OracleEvaluator(apps, cfg)
    pairs, skipped = [], []
    for name, i, j in default_pairings(apps):
        pair = (profiles[apps[i].app_id], profiles[apps[j].app_id])
        problem = PolicyProblem(kind, pair, alpha, power_w)
        try:
            cmp = compare_worst_best(problem, space.states, space.power_caps_w, truth, table)
        except Infeasible as exc:
            skipped.append({"pair": name, "reason": str(exc)})
            continue
        pairs.append({"pair": name, "apps": [p.app_id for p in pair], **cmp.to_dict()})
    geo = {k: geomean([p[k]["objective"] for p in pairs]) for k in ("worst", "proposal", "best")}
    violations = sum(p["fairness_violation"] for p in pairs)
    return {
        "alpha": alpha,
        "pairs": pairs,
        "infeasible": skipped,
        "geomean": geo,
        "ratio": geo["proposal"] / geo["best"] if pairs else math.nan,
        "fairness_violations": violations,
        "no_fairness_violation": violations == 0,
    }


def model_error(table, space, cfg, powers) -> dict:
    """Mean absolute percentage error of predicted throughput and fairness.

    Covers every default pairing on every partition state at ``powers``.
    """
    apps, profiles = _suite(cfg)
    truth = OracleEvaluator(apps, cfg)
    err_thr, err_fair = [], []
    for _, i, j in default_pairings(apps):
        pair = (profiles[apps[i].app_id], profiles[apps[j].app_id])
        for state in space.states:
            for p in powers:
                hw = HardwareState(state, p)
                pred, true = predict_pair(pair, hw, table), truth(pair, hw)
                err_thr.append(abs(throughput(pred) - throughput(true)) / throughput(true))
                err_fair.append(abs(fairness(pred) - fairness(true)) / fairness(true))
    return {"throughput": float(np.mean(err_thr)), "fairness": float(np.mean(err_fair)), "n": len(err_thr)}
