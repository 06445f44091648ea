"""Search for the selection minimizing the objective.

Exhaustive search is the optimality oracle at desk scale; greedy and
seeded local search cover larger candidate sets.  All solvers are
deterministic: ties break on (total, selection size, sorted id list), and
parallel exhaustive evaluation reduces with the same key regardless of
worker count.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import DomainError
from .objective import DEFAULT_WEIGHTS, EvalContext, ObjectiveBreakdown, SolverTables, Weights, check_weights
from .tgds import Selection

DEFAULT_CAP = 20


@dataclass(frozen=True)
class SolverReport:
    selection: Selection
    breakdown: ObjectiveBreakdown
    solver: str
    evaluations: int
    wall_time: float
    optimal: bool


def _scaled_total(tables: SolverTables, mask: int, weights: Weights) -> int:
    w1, w2, w3 = weights
    unexplained, errors, size = tables.eval_mask(mask)
    return w1 * unexplained + (w2 * errors + w3 * size) * tables.scale


def _mask_key(tables: SolverTables, mask: int, weights: Weights):
    w1, w2, w3 = weights
    unexplained, errors, size = tables.eval_mask(mask)
    total = w1 * unexplained + (w2 * errors + w3 * size) * tables.scale
    return total, size, tuple(sorted(tables.selection_of(mask)))


def select_exhaustive(
    ctx: EvalContext,
    weights: Weights = DEFAULT_WEIGHTS,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> SolverReport:
    """Enumerate all 2^|C| selections and return the minimum."""
    check_weights(weights)
    n = len(ctx.candidates)
    if n > cap:
        raise DomainError(f"{n} candidates exceed the exhaustive cap {cap}")
    start = time.perf_counter()
    tables = ctx.solver_tables()

    def best_in(span) -> tuple:
        best = None
        for mask in span:
            key = _mask_key(tables, mask, weights)
            if best is None or key < best[0]:
                best = (key, mask)
        return best

    total_masks = 1 << n
    if workers <= 1 or total_masks < 64:
        best = best_in(range(total_masks))
    else:
        chunk = (total_masks + workers - 1) // workers
        spans = [
            range(lo, min(lo + chunk, total_masks))
            for lo in range(0, total_masks, chunk)
        ]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            best = min(pool.map(best_in, spans), key=lambda kb: kb[0])
    _, mask = best
    return SolverReport(
        selection=tables.selection_of(mask),
        breakdown=tables.breakdown(mask, weights),
        solver="exhaustive",
        evaluations=total_masks,
        wall_time=time.perf_counter() - start,
        optimal=True,
    )


def select_greedy(
    ctx: EvalContext, weights: Weights = DEFAULT_WEIGHTS, workers: int = 1
) -> SolverReport:
    """Add the candidate with the largest strict total decrease until none helps."""
    check_weights(weights)
    start = time.perf_counter()
    tables = ctx.solver_tables()
    n = len(tables.ids)
    mask = 0
    current = _scaled_total(tables, 0, weights)
    evaluations = 1

    def score(i: int) -> tuple[int, int]:
        return i, _scaled_total(tables, mask | (1 << i), weights)

    while True:
        open_bits = [i for i in range(n) if not mask >> i & 1]
        if not open_bits:
            break
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                scored = list(pool.map(score, open_bits))
        else:
            scored = [score(i) for i in open_bits]
        evaluations += len(scored)
        best_i, best_total = None, current
        for i, total in scored:  # candidate order; strict < keeps the earliest
            if total < best_total:
                best_i, best_total = i, total
        if best_i is None:
            break
        mask |= 1 << best_i
        current = best_total
    return SolverReport(
        selection=tables.selection_of(mask),
        breakdown=tables.breakdown(mask, weights),
        solver="greedy",
        evaluations=evaluations,
        wall_time=time.perf_counter() - start,
        optimal=False,
    )


def select_local_search(
    ctx: EvalContext,
    weights: Weights = DEFAULT_WEIGHTS,
    seed: int = 0,
    max_moves: int = 1000,
) -> SolverReport:
    """Seeded add/remove/swap descent from the greedy start.

    Moves are examined in seeded-random order; the first strict improvement
    is applied and the neighbourhood reshuffled.  Stops at a local optimum
    or after max_moves examined moves.
    """
    check_weights(weights)
    if max_moves < 1:
        raise DomainError("max_moves must be at least 1")
    start = time.perf_counter()
    greedy = select_greedy(ctx, weights)
    tables = ctx.solver_tables()
    n = len(tables.ids)
    rng = random.Random(seed)
    mask = tables.mask_of(greedy.selection)
    current = _scaled_total(tables, mask, weights)
    evaluations = greedy.evaluations
    examined = 0
    improved = True
    while improved and examined < max_moves:
        improved = False
        ins = [i for i in range(n) if not mask >> i & 1]
        outs = [i for i in range(n) if mask >> i & 1]
        moves = (
            [("add", i) for i in ins]
            + [("remove", i) for i in outs]
            + [("swap", o, i) for o in outs for i in ins]
        )
        rng.shuffle(moves)
        for move in moves:
            if examined >= max_moves:
                break
            if move[0] == "add":
                nxt = mask | 1 << move[1]
            elif move[0] == "remove":
                nxt = mask & ~(1 << move[1])
            else:
                nxt = (mask & ~(1 << move[1])) | 1 << move[2]
            examined += 1
            evaluations += 1
            total = _scaled_total(tables, nxt, weights)
            if total < current:
                mask, current = nxt, total
                improved = True
                break
    return SolverReport(
        selection=tables.selection_of(mask),
        breakdown=tables.breakdown(mask, weights),
        solver="local",
        evaluations=evaluations,
        wall_time=time.perf_counter() - start,
        optimal=False,
    )


SOLVERS = {
    "exhaustive": select_exhaustive,
    "greedy": select_greedy,
    "local": select_local_search,
}


def decide(
    ctx: EvalContext,
    weights: Weights,
    threshold: Fraction,
    solver: str = "exhaustive",
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    max_moves: int = 1000,
) -> bool:
    """Is there a selection with total objective at most the threshold?

    Exhaustive mode is exact and exits early on the first witness; heuristic
    modes are sound for yes answers only.
    """
    check_weights(weights)
    if threshold < 0:
        raise DomainError("threshold must be non-negative")
    if solver == "exhaustive":
        n = len(ctx.candidates)
        if n > cap:
            raise DomainError(f"{n} candidates exceed the exhaustive cap {cap}")
        tables = ctx.solver_tables()
        bound = threshold * tables.scale
        for mask in range(1 << n):
            if _scaled_total(tables, mask, weights) <= bound:
                return True
        return False
    if solver == "greedy":
        report = select_greedy(ctx, weights)
    elif solver == "local":
        report = select_local_search(ctx, weights, seed=seed, max_moves=max_moves)
    else:
        raise DomainError(f"unknown solver {solver!r}")
    return report.breakdown.total <= threshold
