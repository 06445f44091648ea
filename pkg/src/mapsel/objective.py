"""Score candidate selections: creates, covers, explains, error, size, total.

All degrees are exact rationals so values like 2/3 and 22/3 compare
exactly.  An EvalContext pre-chases every candidate once (shared null
allocator) and memoizes covers and creates lookups; objective evaluations
for different selections are then pure reads and can run in parallel.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .chase import ChaseResult, chase_tgd
from .errors import DomainError
from .relational import (
    Const,
    Fact,
    Instance,
    Null,
    NullAllocator,
    fact_key,
    maps_into,
    tuple_homomorphism,
)
from .tgds import CandidateSet, Selection, selection_size

Weights = tuple[int, int, int]

DEFAULT_WEIGHTS: Weights = (1, 1, 1)


def check_weights(weights: Weights) -> Weights:
    if len(weights) != 3 or any(not isinstance(w, int) or w < 1 for w in weights):
        raise DomainError(f"weights must be three positive integers, got {weights!r}")
    return weights


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Per-selection score record; total = w1*unexplained + w2*errors + w3*size."""

    unexplained: Fraction
    errors: Fraction
    size: int
    total: Fraction
    weights: Weights

    @staticmethod
    def build(
        unexplained: Fraction, errors: Fraction, size: int, weights: Weights
    ) -> "ObjectiveBreakdown":
        w1, w2, w3 = check_weights(weights)
        total = w1 * unexplained + w2 * errors + w3 * size
        return ObjectiveBreakdown(unexplained, errors, size, total, weights)


@dataclass(frozen=True)
class SolverTables:
    """Integer-scaled view of a context for fast exact subset evaluation.

    covers values are scaled by L (the lcm of target arities) so per-mask
    evaluation stays in machine integers; results convert back to Fractions
    without loss.
    """

    ids: tuple[str, ...]
    sizes: tuple[int, ...]
    scale: int
    cov: tuple[tuple[int, ...], ...]  # candidate index -> per-q scaled covers
    err_masks: tuple[int, ...]  # one bitmask of producing candidates per error fact
    n_target: int

    def eval_mask(self, mask: int) -> tuple[int, int, int]:
        """(scaled unexplained, error count, size) for a candidate bitmask."""
        rows = [self.cov[i] for i in range(len(self.ids)) if mask >> i & 1]
        full = self.n_target * self.scale
        if not rows:
            unexplained = full
        elif len(rows) == 1:
            unexplained = full - sum(rows[0])
        else:
            unexplained = full - sum(map(max, zip(*rows)))
        errors = sum(1 for m in self.err_masks if m & mask)
        size = sum(self.sizes[i] for i in range(len(self.ids)) if mask >> i & 1)
        return unexplained, errors, size

    def breakdown(self, mask: int, weights: Weights) -> ObjectiveBreakdown:
        unexplained, errors, size = self.eval_mask(mask)
        return ObjectiveBreakdown.build(
            Fraction(unexplained, self.scale), Fraction(errors), size, weights
        )

    def mask_of(self, selection: Selection) -> int:
        mask = 0
        for i, tid in enumerate(self.ids):
            if tid in selection:
                mask |= 1 << i
        return mask

    def selection_of(self, mask: int) -> Selection:
        return frozenset(tid for i, tid in enumerate(self.ids) if mask >> i & 1)


class EvalContext:
    """Immutable evaluation context: candidates, data example, chase results."""

    def __init__(
        self,
        candidates: CandidateSet,
        source: Instance,
        target: Instance,
        _chase_results: Optional[dict[str, ChaseResult]] = None,
    ):
        if not target.is_ground():
            raise DomainError("the target instance must be ground")
        self.candidates = candidates
        self.source = source
        self.target = target
        if _chase_results is None:
            allocator = NullAllocator()
            _chase_results = {
                t.tgd_id: chase_tgd(t, source, target.schema, allocator)
                for t in candidates
            }
        self.chase_results = _chase_results

        union: set[Fact] = set()
        producers: dict[Fact, set[str]] = {}
        self._ground: dict[str, dict[str, frozenset[Fact]]] = {}
        self._with_nulls: dict[str, dict[str, tuple[Fact, ...]]] = {}
        self._null_index: dict[str, dict[int, tuple[Fact, ...]]] = {}
        for tid, result in self.chase_results.items():
            ground: dict[str, set[Fact]] = {}
            nully: dict[str, list[Fact]] = {}
            nindex: dict[int, list[Fact]] = {}
            for f in result.instance:
                union.add(f)
                producers.setdefault(f, set()).add(tid)
                if f.is_ground():
                    ground.setdefault(f.relation, set()).add(f)
                else:
                    nully.setdefault(f.relation, []).append(f)
                    for nid in f.nulls():
                        nindex.setdefault(nid, []).append(f)
            self._ground[tid] = {r: frozenset(fs) for r, fs in ground.items()}
            self._with_nulls[tid] = {r: tuple(fs) for r, fs in nully.items()}
            self._null_index[tid] = {n: tuple(fs) for n, fs in nindex.items()}

        self.chased_union: tuple[Fact, ...] = tuple(sorted(union, key=fact_key))
        self._producers = {f: frozenset(ps) for f, ps in producers.items()}
        self._target_value_count = Counter(c for q in target for c in q.cells)
        self._covers_memo: dict[tuple[str, Fact], Fraction] = {}
        self._creates_memo: dict[Fact, int] = {}
        self._tables: Optional[SolverTables] = None

    # -- per-tuple scores ---------------------------------------------------

    def creates(self, tgd_id: str, t: Fact) -> int:
        """1 iff the chased fact has no homomorphic witness in the target."""
        if tgd_id not in self.chase_results:
            raise DomainError(f"unknown tgd {tgd_id}")
        if t not in self.chase_results[tgd_id].instance:
            raise DomainError(f"fact {t} was not produced by {tgd_id}")
        return self._creates_flag(t)

    def _creates_flag(self, t: Fact) -> int:
        flag = self._creates_memo.get(t)
        if flag is None:
            flag = 0 if maps_into(t, self.target) is not None else 1
            self._creates_memo[t] = flag
        return flag

    def covers(self, tgd_id: str, q: Fact) -> Fraction:
        """Degree in [0,1] to which one candidate accounts for a target fact.

        Maximum over chased facts t mapping onto q of the fraction of covered
        positions.  A position is covered when it holds a constant, or a null
        whose binding is corroborated: some other chased fact of the same
        candidate containing that null also maps into the target consistently,
        or the bound value occurs nowhere else in the target (a singleton
        value is indistinguishable from a null, so the existential fully
        accounts for it).
        """
        if tgd_id not in self.chase_results:
            raise DomainError(f"unknown tgd {tgd_id}")
        if any(isinstance(c, Null) for c in q.cells):
            raise DomainError("covers is defined for ground target facts only")
        if q not in self.target:
            raise DomainError(f"fact {q} is not in the target instance")
        memo_key = (tgd_id, q)
        cached = self._covers_memo.get(memo_key)
        if cached is not None:
            return cached
        best = Fraction(0)
        if q in self._ground[tgd_id].get(q.relation, ()):
            best = Fraction(1)
        else:
            arity = len(q.cells)
            for t in self._with_nulls[tgd_id].get(q.relation, ()):
                h = tuple_homomorphism(t, q)
                if h is None:
                    continue
                covered = 0
                for i, cell in enumerate(t.cells):
                    if isinstance(cell, Const):
                        covered += 1
                    elif self._corroborated(tgd_id, t, cell.nid, q.cells[i], h):
                        covered += 1
                best = max(best, Fraction(covered, arity))
                if best == 1:
                    break
        self._covers_memo[memo_key] = best
        return best

    def _corroborated(
        self, tgd_id: str, t: Fact, nid: int, image: Const, h: dict
    ) -> bool:
        if self._target_value_count[image] == 1:
            return True
        for other in self._null_index[tgd_id].get(nid, ()):
            if other != t and maps_into(other, self.target, h) is not None:
                return True
        return False

    # -- per-selection scores -----------------------------------------------

    def check_selection(self, selection: Selection) -> Selection:
        unknown = frozenset(selection) - set(self.candidates.ids())
        if unknown:
            raise DomainError(f"selection contains non-candidates: {sorted(unknown)}")
        return frozenset(selection)

    def explains(self, selection: Selection, q: Fact) -> Fraction:
        selection = self.check_selection(selection)
        if not selection:
            return Fraction(0)
        return max(self.covers(tid, q) for tid in selection)

    def error_sum(self, selection: Selection) -> Fraction:
        """Created-fact count; ground duplicates across tgds count once."""
        selection = self.check_selection(selection)
        total = 0
        for t in self.chased_union:
            if self._producers[t] & selection and self._creates_flag(t):
                total += 1
        return Fraction(total)

    def objective(
        self, selection: Selection, weights: Weights = DEFAULT_WEIGHTS
    ) -> ObjectiveBreakdown:
        selection = self.check_selection(selection)
        unexplained = sum(
            (1 - self.explains(selection, q) for q in self.target), Fraction(0)
        )
        errors = self.error_sum(selection)
        size = selection_size(selection, self.candidates)
        return ObjectiveBreakdown.build(unexplained, errors, size, weights)

    # -- solver support -----------------------------------------------------

    def solver_tables(self) -> SolverTables:
        if self._tables is None:
            ids = self.candidates.ids()
            qs = list(self.target)
            scale = math.lcm(*(len(q.cells) for q in qs)) if qs else 1
            cov = tuple(
                tuple(int(self.covers(tid, q) * scale) for q in qs) for tid in ids
            )
            index = {tid: i for i, tid in enumerate(ids)}
            err_masks = []
            for t in self.chased_union:
                if self._creates_flag(t):
                    mask = 0
                    for tid in self._producers[t]:
                        mask |= 1 << index[tid]
                    err_masks.append(mask)
            sizes = tuple(
                selection_size(frozenset({tid}), self.candidates) for tid in ids
            )
            self._tables = SolverTables(
                ids, sizes, scale, cov, tuple(err_masks), len(qs)
            )
        return self._tables

    def anyone_maps_onto(self, q: Fact) -> bool:
        """True iff some chased fact of some candidate maps onto q."""
        for tid in self.candidates.ids():
            if q in self._ground[tid].get(q.relation, ()):
                return True
            for t in self._with_nulls[tid].get(q.relation, ()):
                if tuple_homomorphism(t, q) is not None:
                    return True
        return False


def prune_certain(ctx: EvalContext) -> tuple[EvalContext, Fraction]:
    """Drop target facts whose objective contribution is selection-independent.

    A fact is certainly unexplained when no candidate covers it to any degree
    and no chased fact maps onto it (so removing it cannot flip any creates
    flag).  Each removed fact contributes a constant 1 to the unexplained sum
    of every selection, returned as the offset: for weights (w1, w2, w3),
    total_original = total_pruned + w1 * offset.
    """
    removable = [
        q
        for q in ctx.target
        if not ctx.anyone_maps_onto(q)
        and all(ctx.covers(tid, q) == 0 for tid in ctx.candidates.ids())
    ]
    reduced = EvalContext(
        ctx.candidates,
        ctx.source,
        ctx.target.without_facts(removable),
        _chase_results=dict(ctx.chase_results),
    )
    return reduced, Fraction(len(removable))
