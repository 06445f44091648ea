"""Executable SET COVER reduction: the end-to-end correctness oracle.

A SET COVER instance (U, R, n) becomes a selection problem with one binary
source relation per family member, a single binary target relation, one
full copy tgd per family member, and an auxiliary domain that amplifies
each uncovered element past the acceptance threshold.  The closed-form
objective identity lets the whole chase/score pipeline be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable

from .errors import DomainError, ParseError
from .objective import DEFAULT_WEIGHTS, EvalContext, Weights, check_weights
from .relational import Const, Fact, Instance, RelationSig, Schema, strip_comment
from .solvers import DEFAULT_CAP, decide
from .tgds import Atom, CandidateSet, StTgd, Var


@dataclass(frozen=True)
class SetCoverInstance:
    universe: frozenset[str]
    family: tuple[frozenset[str], ...]
    bound: int

    def __post_init__(self):
        for i, subset in enumerate(self.family, start=1):
            extra = subset - self.universe
            if extra:
                raise DomainError(f"set {i} leaves the universe: {sorted(extra)}")
        if not 1 <= self.bound <= len(self.family):
            raise DomainError(
                f"bound must lie in [1, {len(self.family)}], got {self.bound}"
            )


@dataclass(frozen=True)
class ReducedInstance:
    """A full selection problem plus the decision threshold it encodes."""

    source_schema: Schema
    target_schema: Schema
    source: Instance
    target: Instance
    candidates: CandidateSet
    threshold: int
    domain_size: int
    weights: Weights

    def context(self) -> EvalContext:
        return EvalContext(self.candidates, self.source, self.target)


def candidate_id(index: int) -> str:
    """1-based id of the copy tgd for family member index."""
    return f"copy{index}"


def _build(sc: SetCoverInstance, threshold: int, weights: Weights) -> ReducedInstance:
    if not sc.universe:
        raise DomainError("the universe must be non-empty")
    domain = [Const(f"d_{k}") for k in range(1, threshold + 2)]
    elements = {u: Const(f"u_{u}") for u in sorted(sc.universe)}
    source_sigs = [
        RelationSig(f"r{i}", ("elem", "tag"))
        for i in range(1, len(sc.family) + 1)
    ]
    target_sig = RelationSig("u", ("elem", "tag"))
    source_schema = Schema(source_sigs)
    target_schema = Schema([target_sig])
    source_facts = [
        Fact(f"r{i}", (elements[x], d))
        for i, subset in enumerate(sc.family, start=1)
        for x in sorted(subset)
        for d in domain
    ]
    target_facts = [
        Fact("u", (elements[x], d)) for x in sorted(sc.universe) for d in domain
    ]
    tgds = [
        StTgd(
            candidate_id(i),
            (Atom(f"r{i}", (Var("X"), Var("Y"))),),
            (Atom("u", (Var("X"), Var("Y"))),),
        )
        for i in range(1, len(sc.family) + 1)
    ]
    return ReducedInstance(
        source_schema=source_schema,
        target_schema=target_schema,
        source=Instance(source_schema, source_facts),
        target=Instance(target_schema, target_facts),
        candidates=CandidateSet(tuple(tgds)),
        threshold=threshold,
        domain_size=threshold + 1,
        weights=weights,
    )


def reduce_to_selection(sc: SetCoverInstance) -> ReducedInstance:
    """Unweighted reduction: threshold 2n, auxiliary domain of size 2n + 1."""
    return _build(sc, 2 * sc.bound, DEFAULT_WEIGHTS)


def reduce_weighted(sc: SetCoverInstance, weights: Weights) -> ReducedInstance:
    """Weighted reduction: every copy tgd has size 2, so threshold 2*w3*n."""
    w1, w2, w3 = check_weights(weights)
    return _build(sc, 2 * w3 * sc.bound, weights)


def closed_form_objective(member_indices: Iterable[int], sc: SetCoverInstance) -> Fraction:
    """(m+1) * (|U| - |covered|) + 2 * |M| with m = 2n, weights (1,1,1)."""
    return closed_form_weighted(member_indices, sc, DEFAULT_WEIGHTS)


def closed_form_weighted(
    member_indices: Iterable[int], sc: SetCoverInstance, weights: Weights
) -> Fraction:
    """w1 * (m+1) * (|U| - |covered|) + w3 * 2 * |M| with m = 2*w3*n."""
    w1, w2, w3 = check_weights(weights)
    members = set(member_indices)
    bad = [i for i in members if not 1 <= i <= len(sc.family)]
    if bad:
        raise DomainError(f"family indices out of range: {sorted(bad)}")
    covered = set().union(*(sc.family[i - 1] for i in members)) if members else set()
    m = 2 * w3 * sc.bound
    return Fraction(
        w1 * (m + 1) * (len(sc.universe) - len(covered)) + w3 * 2 * len(members)
    )


def brute_force_set_cover(sc: SetCoverInstance) -> bool:
    """Exhaustive check over all subfamilies of size at most n."""
    if len(sc.family) > 20:
        raise DomainError("brute force capped at 20 sets")
    indices = range(len(sc.family))
    for r in range(sc.bound + 1):
        for combo in combinations(indices, r):
            if set().union(*(sc.family[i] for i in combo), set()) == sc.universe:
                return True
    return False


def decide_cover_via_selection(
    sc: SetCoverInstance, weights: Weights = DEFAULT_WEIGHTS, cap: int = DEFAULT_CAP
) -> bool:
    """Reduce, solve exactly, and compare the optimum against the threshold."""
    reduced = reduce_weighted(sc, weights)
    return decide(
        reduced.context(),
        weights,
        Fraction(reduced.threshold),
        solver="exhaustive",
        cap=cap,
    )


def parse_set_cover(text: str, source: str | None = None) -> SetCoverInstance:
    """Parse `universe: a b c`, `set: a b` (one per member), and `n: k` lines."""
    universe: frozenset[str] | None = None
    family: list[frozenset[str]] = []
    bound: int | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key = key.strip()
        items = rest.split()
        if key == "universe":
            if universe is not None:
                raise ParseError("duplicate universe line", line_no, source)
            universe = frozenset(items)
        elif key == "set":
            family.append(frozenset(items))
        elif key == "n":
            if bound is not None:
                raise ParseError("duplicate n line", line_no, source)
            if len(items) != 1 or not items[0].isdigit():
                raise ParseError("n expects a single natural number", line_no, source)
            bound = int(items[0])
        else:
            raise ParseError(f"unknown directive {key!r}", line_no, source)
    if universe is None or bound is None:
        raise ParseError("input needs universe, at least one set, and n", None, source)
    try:
        return SetCoverInstance(universe, tuple(family), bound)
    except DomainError as exc:
        raise ParseError(str(exc), None, source) from None


def serialize_set_cover(sc: SetCoverInstance) -> str:
    lines = ["universe: " + " ".join(sorted(sc.universe))]
    lines += ["set: " + " ".join(sorted(s)) for s in sc.family]
    lines.append(f"n: {sc.bound}")
    return "\n".join(lines) + "\n"
