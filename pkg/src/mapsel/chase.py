"""Chase st tgds over a source instance into a canonical target instance.

Source and target schemas are disjoint, so a single pass over all triggers
is a complete chase: no tgd can feed another.  Each trigger allocates fresh
nulls for the tgd's existential variables; triggers fire in a canonical
order (sorted by the matched body facts) so null numbering is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import DomainError
from .relational import (
    Const,
    Fact,
    Instance,
    Null,
    NullAllocator,
    Schema,
    Value,
    fact_key,
    value_key,
)
from .tgds import Atom, StTgd, Var


@dataclass(frozen=True)
class ChaseResult:
    """Chased instance plus per-fact provenance and per-null origin.

    provenance maps each produced fact to the (tgd id, trigger index) pairs
    that produced it; null_registry maps each fresh null to its
    (tgd id, existential variable, trigger index) origin triple.
    """

    instance: Instance
    provenance: Mapping[Fact, frozenset[tuple[str, int]]]
    null_registry: Mapping[int, tuple[str, str, int]]


Binding = dict[str, Value]


def unify_atom(atom: Atom, f: Fact, binding: Binding) -> Optional[Binding]:
    if atom.relation != f.relation or len(atom.terms) != len(f.cells):
        return None
    out = dict(binding)
    for term, cell in zip(atom.terms, f.cells):
        if isinstance(term, Var):
            bound = out.get(term.name)
            if bound is None:
                out[term.name] = cell
            elif bound != cell:
                return None
        elif term != cell:
            return None
    return out


def substitute(atom: Atom, binding: Binding) -> Atom:
    """Replace bound variables by their values; unbound variables remain."""
    terms = tuple(
        binding.get(t.name, t) if isinstance(t, Var) else t for t in atom.terms
    )
    return Atom(atom.relation, terms)


def atom_to_fact(atom: Atom) -> Fact:
    for t in atom.terms:
        if isinstance(t, Var):
            raise DomainError(f"unbound variable {t.name} in atom {atom.relation}")
    return Fact(atom.relation, atom.terms)


def find_matches(
    atoms: Sequence[Atom],
    inst: Instance,
    binding: Optional[Binding] = None,
    first_only: bool = False,
) -> list[Binding]:
    """All variable assignments making every atom a fact of inst.

    Atom terms may mix variables with values (constants or nulls); values
    must match cells exactly.  Backtracks most-constrained atom first.
    """
    results: list[Binding] = []
    seen: set[frozenset] = set()

    def rec(pending: list[Atom], bnd: Binding) -> bool:
        if not pending:
            key = frozenset(bnd.items())
            if key not in seen:
                seen.add(key)
                results.append(bnd)
            return first_only
        best_i, best_cands = 0, None
        for i, a in enumerate(pending):
            cands = []
            for f in inst.by_relation(a.relation):
                b = unify_atom(a, f, bnd)
                if b is not None:
                    cands.append(b)
            if best_cands is None or len(cands) < len(best_cands):
                best_i, best_cands = i, cands
            if not cands:
                return False
        rest = pending[:best_i] + pending[best_i + 1 :]
        for b in best_cands:
            if rec(rest, b):
                return True
        return False

    rec(list(atoms), dict(binding or {}))
    return results


def _trigger_key(tgd: StTgd, binding: Binding):
    facts = tuple(fact_key(atom_to_fact(substitute(a, binding))) for a in tgd.body)
    assignment = tuple(
        (name, value_key(binding[name])) for name in sorted(binding)
    )
    return facts, assignment


def _check_body_schema(tgd: StTgd, source: Instance):
    for a in tgd.body:
        if a.relation not in source.schema:
            raise DomainError(
                f"tgd {tgd.tgd_id}: body relation {a.relation} not in the source schema"
            )
        if len(a.terms) != source.schema[a.relation].arity:
            raise DomainError(
                f"tgd {tgd.tgd_id}: body atom {a.relation} has wrong arity"
            )


def chase_tgd(
    tgd: StTgd,
    source: Instance,
    target_schema: Schema,
    allocator: Optional[NullAllocator] = None,
) -> ChaseResult:
    """Fire every body match once, with fresh nulls per trigger."""
    _check_body_schema(tgd, source)
    allocator = allocator or NullAllocator()
    triggers = sorted(
        find_matches(tgd.body, source), key=lambda b: _trigger_key(tgd, b)
    )
    facts: set[Fact] = set()
    provenance: dict[Fact, set[tuple[str, int]]] = {}
    registry: dict[int, tuple[str, str, int]] = {}
    for idx, binding in enumerate(triggers):
        extended = dict(binding)
        for var in sorted(tgd.existential_vars):
            nid = allocator.fresh()
            extended[var] = Null(nid)
            registry[nid] = (tgd.tgd_id, var, idx)
        for atom in tgd.head:
            f = atom_to_fact(substitute(atom, extended))
            facts.add(f)
            provenance.setdefault(f, set()).add((tgd.tgd_id, idx))
    return ChaseResult(
        Instance(target_schema, facts),
        {f: frozenset(ps) for f, ps in provenance.items()},
        registry,
    )


def chase_mapping(
    tgds: Iterable[StTgd],
    source: Instance,
    target_schema: Schema,
    allocator: Optional[NullAllocator] = None,
) -> ChaseResult:
    """Union of per-tgd chases sharing one null allocator.

    Ground duplicates across tgds deduplicate; null-bearing facts from
    different tgds never merge because their nulls are disjoint.
    """
    allocator = allocator or NullAllocator()
    facts: set[Fact] = set()
    provenance: dict[Fact, set[tuple[str, int]]] = {}
    registry: dict[int, tuple[str, str, int]] = {}
    for tgd in tgds:
        part = chase_tgd(tgd, source, target_schema, allocator)
        facts |= part.instance.facts
        for f, ps in part.provenance.items():
            provenance.setdefault(f, set()).update(ps)
        registry.update(part.null_registry)
    return ChaseResult(
        Instance(target_schema, facts),
        {f: frozenset(ps) for f, ps in provenance.items()},
        registry,
    )


def satisfies(k: Instance, tgd: StTgd, source: Instance) -> bool:
    """True iff every body match in the source has a head image in k."""
    for binding in find_matches(tgd.body, source):
        head = [substitute(a, binding) for a in tgd.head]
        if not find_matches(head, k, first_only=True):
            return False
    return True
