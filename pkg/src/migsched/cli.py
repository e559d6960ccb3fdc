"""
Command-line front end.

    migsched synth    --out-dir DIR [--seed N] [--noise SIGMA]
    migsched train    --profiles P --training T --out COEF
    migsched predict  --coefficients COEF --profiles P --apps a,b --state S1 --power-w 250
    migsched solve    --coefficients COEF --profiles P --apps a,b --problem p1 --power-w 230 --alpha 0.2
    migsched eval     --coefficients COEF --problem p2 --alpha 0.2,0.42
    migsched classify --profiles P (--training T | --oracle)

Config paths default from MIGSCHED_STATES and MIGSCHED_ORACLE_CONFIG.
Exit status: 0 on success, 2 when a policy problem is infeasible, 1 on any
other error (reported as one JSON object on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .errors import Infeasible, InvalidAllocation, MigSchedError
from .evaluation import evaluate_suite
from .model import CoefficientTable, fit_interference, fit_solo, load_training, predict_pair
from .oracle import (
    OracleConfig,
    default_pairings,
    default_workload_suite,
    min_alloc_rperf,
    write_dataset,
)
from .policy import PolicyProblem, evaluate_candidates, hill_climb, solve_candidates, solver_report
from .profiles import classify, load_profiles
from .statespace import HardwareState, MemoryOption, load_state_space

ENV_PREFIX = "MIGSCHED_"
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1) + "\n")


def _apps(arg: str, profiles: dict) -> list:
    ids = [a for a in arg.split(",") if a]
    missing = [a for a in ids if a not in profiles]
    if missing:
        raise InvalidAllocation(f"unknown app_id(s): {', '.join(missing)}")
    return [profiles[a] for a in ids]


def _alphas(arg: str) -> list:
    return [float(a) for a in arg.split(",") if a]


def _oracle_config(args) -> OracleConfig:
    cfg = OracleConfig.load(args.oracle_config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "noise", None) is not None:
        cfg = replace(cfg, noise_sigma=args.noise)
    return cfg


def cmd_synth(args) -> int:
    cfg = _oracle_config(args)
    space = load_state_space(args.states)
    apps = [a for a, _ in default_workload_suite(cfg)]
    prof_path, train_path = write_dataset(args.out_dir, apps, space, default_pairings(apps), cfg)
    _emit({"profiles": str(prof_path), "training": str(train_path)})
    return EXIT_OK


def cmd_train(args) -> int:
    space = load_state_space(args.states)
    profiles = load_profiles(args.profiles)
    samples = load_training(args.training, profiles, space)
    solo = [s for s in samples if s.is_solo]
    corun = [s for s in samples if not s.is_solo]
    table = fit_interference(corun, fit_solo(solo))
    table.save(args.out)
    print(f"{'key':<20} {'n_solo':>6} {'rms_solo':>10} {'n_corun':>7} {'rms_corun':>10}")
    for key in table.keys():
        st = table.stats[key]
        rms_c = "-" if st.rms_corun is None else f"{st.rms_corun:.3e}"
        print(f"{str(key):<20} {st.n_solo:>6} {st.rms_solo:>10.3e} {st.n_corun:>7} {rms_c:>10}")
    return EXIT_OK


def cmd_predict(args) -> int:
    space = load_state_space(args.states)
    table = CoefficientTable.load(args.coefficients)
    apps = _apps(args.apps, load_profiles(args.profiles))
    state = HardwareState(space.resolve(args.state), args.power_w)
    rperfs = predict_pair(apps, state, table)
    _emit({"state_id": args.state, "power_w": args.power_w,
           "apps": [a.app_id for a in apps], "rperfs": rperfs})
    return EXIT_OK


def cmd_solve(args) -> int:
    space = load_state_space(args.states)
    table = CoefficientTable.load(args.coefficients)
    apps = _apps(args.apps, load_profiles(args.profiles))
    problem = PolicyProblem(args.problem, apps, args.alpha, args.power_w)
    cands = evaluate_candidates(problem, space.states, space.power_caps_w, table)
    try:
        if args.hill_climb:
            sol = hill_climb(problem, space.states, space.power_caps_w, table)
        else:
            sol = solve_candidates(cands, problem.alpha)
    except Infeasible:
        _emit(solver_report(problem, cands))
        return EXIT_INFEASIBLE
    _emit(solver_report(problem, cands, sol))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _oracle_config(args)
    space = load_state_space(args.states)
    table = CoefficientTable.load(args.coefficients)
    reports = [evaluate_suite(table, space, cfg, args.problem, a, args.power_w) for a in _alphas(args.alpha)]
    _emit({"problem": args.problem, "power_w": args.power_w, "reports": reports})
    return EXIT_OK


def min_alloc_from_training(samples, power_caps_w) -> dict:
    low = min(power_caps_w)
    found = {}
    for s in samples:
        sl = s.state.partition.slices[s.subject_slot]
        if s.is_solo and sl.gpcs == 1 and sl.option is MemoryOption.PRIVATE and s.state.power_w == low:
            found.setdefault(s.subject.app_id, s.measured_rperf)
    return found


def cmd_classify(args) -> int:
    space = load_state_space(args.states)
    profiles = load_profiles(args.profiles)
    if args.oracle:
        cfg = _oracle_config(args)
        apps = {a.app_id: a for a, _ in default_workload_suite(cfg)}
        rperf = {k: min_alloc_rperf(a, cfg, space.power_caps_w) for k, a in apps.items()}
    else:
        rperf = min_alloc_from_training(load_training(args.training, profiles, space), space.power_caps_w)
    rows, failed = [], False
    for app_id, prof in profiles.items():
        if app_id not in rperf:
            rows.append({"app_id": app_id, "class": None, "error": "no 1-GPC private sample at the lowest cap"})
            failed = True
            continue
        try:
            rows.append({"app_id": app_id, "class": classify(prof, rperf[app_id]).value,
                         "rperf_min_alloc": rperf[app_id]})
        except MigSchedError as exc:
            rows.append({"app_id": app_id, "class": None, "error": str(exc)})
            failed = True
    if args.json:
        _emit(rows)
    else:
        for r in rows:
            print(f"{r['app_id']}\t{r['class'] or 'ERROR: ' + r['error']}")
    return EXIT_ERROR if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="migsched", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, oracle=False):
        p.add_argument("--states", default=os.environ.get(ENV_PREFIX + "STATES"),
                       help="state-space config (JSON); defaults to the built-in 4-state menu")
        if oracle:
            p.add_argument("--oracle-config", default=os.environ.get(ENV_PREFIX + "ORACLE_CONFIG"))
        return p

    p = common(sub.add_parser("synth", help="write oracle profiles and training data"), oracle=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float, help="Gaussian sigma added to every rperf")
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("train", help="fit C from solo runs, then D from co-runs"))
    p.add_argument("--profiles", required=True)
    p.add_argument("--training", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("predict", help="predict rperf for apps on one state"))
    p.add_argument("--coefficients", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--apps", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--power-w", type=int, required=True)
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("solve", help="solve Problem 1 or Problem 2"))
    p.add_argument("--coefficients", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--apps", required=True)
    p.add_argument("--problem", choices=["p1", "p2"], required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--power-w", type=int)
    p.add_argument("--hill-climb", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = common(sub.add_parser("eval", help="worst/proposal/best over the oracle suite"), oracle=True)
    p.add_argument("--coefficients", required=True)
    p.add_argument("--problem", choices=["p1", "p2"], required=True)
    p.add_argument("--alpha", default="0.2", help="comma-separated fairness thresholds")
    p.add_argument("--power-w", type=int)
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("classify", help="TI/CI/MI/US class per profile"), oracle=True)
    p.add_argument("--profiles", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--training")
    src.add_argument("--oracle", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MigSchedError, OSError, ValueError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, OSError) and exc.filename:
            err["path"] = str(exc.filename)
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
