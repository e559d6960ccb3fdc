"""
Co-scheduling policies over the (partition state, power cap) grid.

Problem 1 fixes the power cap and picks the partition state maximising
weighted speedup (sum of rperf) subject to fairness (min rperf) > alpha.
Problem 2 also picks the cap and maximises weighted speedup per watt of cap.
Candidates are scored exhaustively; a hill climber over the grid is
available for menus too large to enumerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

from .errors import EmptyInput, Infeasible, InvalidAllocation, UnknownKey
from .model import CoefficientTable, predict_pair
from .statespace import HardwareState, PartitionState, validate


class ProblemKind(str, Enum):
    P1 = "p1"  # max throughput at a given cap
    P2 = "p2"  # max throughput / cap over all caps


@dataclass(frozen=True)
class PolicyProblem:
    kind: ProblemKind
    apps: tuple
    alpha: float
    power_w: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        object.__setattr__(self, "apps", tuple(self.apps))
        if not self.apps:
            raise EmptyInput("a policy problem needs at least one application")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.kind is ProblemKind.P1 and self.power_w is None:
            raise ValueError("Problem 1 needs a power cap")
        if self.kind is ProblemKind.P2 and self.power_w is not None:
            raise ValueError("Problem 2 chooses the power cap itself; do not pass power_w")


@dataclass(frozen=True)
class CandidateEvaluation:
    state: PartitionState
    power_w: int
    rperfs: tuple
    throughput: float
    fairness: float
    objective: float
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "state_id": self.state.state_id,
            "power_w": self.power_w,
            "rperfs": list(self.rperfs),
            "throughput": self.throughput,
            "fairness": self.fairness,
            "objective": self.objective,
            "feasible": self.feasible,
        }


@dataclass(frozen=True)
class Solution:
    state: PartitionState
    power_w: int
    predicted_rperfs: tuple
    predicted_throughput: float
    predicted_fairness: float
    objective: float

    @classmethod
    def from_candidate(cls, cand: CandidateEvaluation) -> "Solution":
        return cls(cand.state, cand.power_w, cand.rperfs, cand.throughput, cand.fairness, cand.objective)


def throughput(rperfs: Sequence[float]) -> float:
    """Weighted speedup; above 1 beats time-sharing the chip."""
    return math.fsum(rperfs)


def fairness(rperfs: Sequence[float]) -> float:
    if len(rperfs) == 0:
        raise EmptyInput("fairness of an empty rperf list")
    return min(rperfs)


def objective_value(kind: ProblemKind, thr: float, power_w: int) -> float:
    return thr if ProblemKind(kind) is ProblemKind.P1 else thr / power_w


def _problem_powers(problem: PolicyProblem, powers: Sequence[int]) -> list:
    if problem.kind is ProblemKind.P1:
        if problem.power_w not in powers:
            raise InvalidAllocation(f"power cap {problem.power_w} W not in menu {list(powers)}")
        return [problem.power_w]
    return list(powers)


def score(problem: PolicyProblem, state: PartitionState, power_w: int, rperfs) -> CandidateEvaluation:
    rperfs = tuple(float(r) for r in rperfs)
    thr = throughput(rperfs)
    fair = fairness(rperfs)
    return CandidateEvaluation(
        state, power_w, rperfs, thr, fair, objective_value(problem.kind, thr, power_w), fair > problem.alpha
    )


def model_rperfs(table: CoefficientTable) -> Callable:
    def rperfs(apps, hw: HardwareState):
        try:
            return predict_pair(apps, hw, table)
        except UnknownKey as exc:
            raise UnknownKey(f"{exc.key} (state {hw.partition.state_id} @ {hw.power_w} W)") from None
    return rperfs


def evaluate_with(problem: PolicyProblem, states: Sequence[PartitionState], powers: Sequence[int],
                  rperf_fn: Callable) -> list:
    """Score every (state, power) with ``rperf_fn(apps, HardwareState)``."""
    menu = _problem_powers(problem, powers)
    out = []
    for state in states:
        for p in menu:
            hw = HardwareState(state, p)
            validate(hw, len(problem.apps), power_caps_w=menu)
            out.append(score(problem, state, p, rperf_fn(problem.apps, hw)))
    return out


def evaluate_candidates(problem: PolicyProblem, states: Sequence[PartitionState], powers: Sequence[int],
                        table: CoefficientTable) -> list:
    return evaluate_with(problem, states, powers, model_rperfs(table))


def _pick(cands: Sequence[CandidateEvaluation], best=True) -> Optional[CandidateEvaluation]:
    chosen = None
    for cand in cands:
        if not cand.feasible:
            continue
        if chosen is None or (cand.objective > chosen.objective if best else cand.objective < chosen.objective):
            chosen = cand
    return chosen


def solve_candidates(cands: Sequence[CandidateEvaluation], alpha: float) -> Solution:
    chosen = _pick(cands)
    if chosen is None:
        raise Infeasible(f"no candidate has fairness > {alpha}", cands)
    return Solution.from_candidate(chosen)


def solve(problem: PolicyProblem, states: Sequence[PartitionState], powers: Sequence[int],
          table: CoefficientTable) -> Solution:
    """Exhaustive search; ties go to the earliest candidate in state-then-power order."""
    return solve_candidates(evaluate_candidates(problem, states, powers, table), problem.alpha)


def climb_grid(value: Callable, shape, start) -> tuple:
    """Greedy ascent on a 2-D grid using the 4-neighbourhood.

    Moves to the best strictly-better neighbour until none exists. ``value``
    maps a ``(row, col)`` cell to a number; -inf marks forbidden cells.
    """
    n_rows, n_cols = shape
    cur = start
    cur_val = value(cur)
    while True:
        r, c = cur
        best, best_val = None, cur_val
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nb[0] < n_rows and 0 <= nb[1] < n_cols:
                v = value(nb)
                if v > best_val:
                    best, best_val = nb, v
        if best is None:
            return cur
        cur, cur_val = best, best_val


def hill_climb(problem: PolicyProblem, states: Sequence[PartitionState], powers: Sequence[int],
               table: CoefficientTable, start=(0, 0)) -> Solution:
    """Approximate solve() by local search over the state x power grid.

    The grid rows follow ``states`` and the columns the admissible powers, so
    neighbouring cells differ by one state or one cap step. If the climb from
    ``start`` ends infeasible, every other cell is tried as a start in turn.
    """
    menu = _problem_powers(problem, powers)
    shape = (len(states), len(menu))
    if not (0 <= start[0] < shape[0] and 0 <= start[1] < shape[1]):
        raise ValueError(f"start {start} outside grid {shape}")
    rperf_fn = model_rperfs(table)
    cache = {}

    def cand(cell):
        if cell not in cache:
            hw = HardwareState(states[cell[0]], menu[cell[1]])
            validate(hw, len(problem.apps), power_caps_w=menu)
            cache[cell] = score(problem, hw.partition, hw.power_w, rperf_fn(problem.apps, hw))
        return cache[cell]

    def value(cell):
        c = cand(cell)
        return c.objective if c.feasible else -math.inf

    starts = [tuple(start)] + [(i, j) for i in range(shape[0]) for j in range(shape[1]) if (i, j) != tuple(start)]
    for st in starts:
        end = climb_grid(value, shape, st)
        if cand(end).feasible:
            return Solution.from_candidate(cand(end))
    raise Infeasible(f"no candidate has fairness > {problem.alpha}", [cache[k] for k in sorted(cache)])


@dataclass(frozen=True)
class Comparison:
    """Ground-truth scores of the worst, chosen and best feasible candidates."""

    worst: CandidateEvaluation
    proposal: CandidateEvaluation
    best: CandidateEvaluation
    predicted: Solution

    @property
    def fairness_violation(self) -> bool:
        return not self.proposal.feasible

    @property
    def ratio(self) -> float:
        return self.proposal.objective / self.best.objective

    def to_dict(self) -> dict:
        return {
            "worst": self.worst.to_dict(),
            "proposal": self.proposal.to_dict(),
            "best": self.best.to_dict(),
            "ratio": self.ratio,
            "fairness_violation": self.fairness_violation,
        }


def compare_worst_best(problem: PolicyProblem, states: Sequence[PartitionState], powers: Sequence[int],
                       ground_truth: Callable, table: CoefficientTable) -> Comparison:
    """Score the model's pick against the true worst and best feasible picks.

    ``ground_truth(apps, HardwareState)`` returns true rperfs. Raises
    Infeasible when the ground truth has no feasible candidate, and also when
    the model predicts none (the proposal would be exclusive scheduling).
    """
    truth = evaluate_with(problem, states, powers, ground_truth)
    best, worst = _pick(truth), _pick(truth, best=False)
    if best is None:
        raise Infeasible(f"ground truth has no candidate with fairness > {problem.alpha}", truth)
    pick = solve(problem, states, powers, table)
    proposal = next(c for c in truth if c.state == pick.state and c.power_w == pick.power_w)
    return Comparison(worst, proposal, best, pick)


def solver_report(problem: PolicyProblem, candidates: Sequence[CandidateEvaluation],
                  solution: Optional[Solution] = None) -> dict:
    report = {
        "problem": problem.kind.value,
        "alpha": problem.alpha,
        "power_w": problem.power_w,
        "apps": [a.app_id for a in problem.apps],
        "chosen": None,
        "predicted": None,
        "candidates": [c.to_dict() for c in candidates],
    }
    if solution is not None:
        report["chosen"] = {"state_id": solution.state.state_id, "power_w": solution.power_w}
        report["predicted"] = {
            "rperfs": list(solution.predicted_rperfs),
            "throughput": solution.predicted_throughput,
            "fairness": solution.predicted_fairness,
            "objective": solution.objective,
        }
    return report
