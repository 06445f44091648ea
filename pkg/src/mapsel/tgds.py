"""Source-to-target tgds: representation, parsing, sizing, candidate sets.

A tgd has a conjunctive body over the source schema and a conjunctive head
over the target schema; head variables missing from the body are
existential.  Lexing follows the logic-programming convention: tokens
starting with an uppercase letter are variables, everything else is a
constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import DomainError, ParseError
from .relational import (
    Const,
    Schema,
    _Cursor,
    serialize_value,
    strip_comment,
    tokenize,
)


@dataclass(frozen=True)
class Var:
    name: str


Term = Var | Const


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple[Term, ...]

    def variables(self) -> frozenset[str]:
        return frozenset(t.name for t in self.terms if isinstance(t, Var))


@dataclass(frozen=True)
class StTgd:
    tgd_id: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]

    def __post_init__(self):
        if not self.body or not self.head:
            raise DomainError(f"tgd {self.tgd_id}: body and head must be non-empty")

    @property
    def body_vars(self) -> frozenset[str]:
        return frozenset(v for a in self.body for v in a.variables())

    @property
    def head_vars(self) -> frozenset[str]:
        return frozenset(v for a in self.head for v in a.variables())

    @property
    def existential_vars(self) -> frozenset[str]:
        return self.head_vars - self.body_vars

    @property
    def is_full(self) -> bool:
        return not self.existential_vars


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidate tgds; the order is the solvers' tie-break order."""

    candidates: tuple[StTgd, ...]
    size_overrides: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = [t.tgd_id for t in self.candidates]
        if len(set(ids)) != len(ids):
            raise DomainError("candidate tgd ids must be pairwise distinct")
        known = set(ids)
        for tid, size in self.size_overrides.items():
            if tid not in known:
                raise DomainError(f"size override for unknown tgd {tid}")
            if size < 1:
                raise DomainError(f"size override for {tid} must be positive")

    def ids(self) -> tuple[str, ...]:
        return tuple(t.tgd_id for t in self.candidates)

    def get(self, tgd_id: str) -> StTgd:
        for t in self.candidates:
            if t.tgd_id == tgd_id:
                return t
        raise DomainError(f"unknown tgd {tgd_id}")

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


Selection = frozenset[str]


def tgd_size(t: StTgd, overrides: Optional[Mapping[str, int]] = None) -> int:
    """Override if present, else total atom count (body plus head)."""
    if overrides and t.tgd_id in overrides:
        return overrides[t.tgd_id]
    return len(t.body) + len(t.head)


def selection_size(selection: Selection, cset: CandidateSet) -> int:
    unknown = selection - set(cset.ids())
    if unknown:
        raise DomainError(f"selection contains non-candidates: {sorted(unknown)}")
    return sum(
        tgd_size(t, cset.size_overrides) for t in cset if t.tgd_id in selection
    )


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------


def _parse_term(cur: _Cursor) -> Term:
    kind, tok = cur.next()
    if kind == "quoted":
        return Const(tok[1:-1])
    if kind == "bare":
        if tok[0].isupper():
            return Var(tok)
        return Const(tok)
    if kind == "null":
        cur.error("labeled nulls are not allowed in tgds")
    cur.error(f"expected a term, found {tok!r}")


def _parse_atom(cur: _Cursor) -> Atom:
    kind, rel = cur.next()
    if kind != "bare" or rel[0].isupper():
        cur.error(f"expected a relation name, found {rel!r}")
    cur.expect("(")
    terms = [_parse_term(cur)]
    while cur.peek()[1] == ",":
        cur.next()
        terms.append(_parse_term(cur))
    cur.expect(")")
    return Atom(rel, tuple(terms))


def _check_atom(atom: Atom, schema: Schema, other: Schema, side: str, cur: _Cursor):
    if atom.relation not in schema:
        if atom.relation in other:
            wrong = "target" if side == "body" else "source"
            cur.error(f"{side} atom {atom.relation} is a {wrong}-schema relation")
        cur.error(f"unknown relation {atom.relation}")
    sig = schema[atom.relation]
    if len(atom.terms) != sig.arity:
        cur.error(
            f"{atom.relation} declared with arity {sig.arity}, atom has {len(atom.terms)}"
        )


def parse_tgd(
    text: str,
    source_schema: Schema,
    target_schema: Schema,
    default_id: str = "tgd1",
    line_no: int = 1,
    source: str | None = None,
) -> StTgd:
    """Parse one `body -> head` line, with an optional leading `id:` label."""
    line = strip_comment(text).strip()
    cur = _Cursor(tokenize(line, line_no, source), line_no, source)
    tgd_id = default_id
    if len(cur.toks) >= 2 and cur.toks[1][1] == ":" and cur.toks[0][0] == "bare":
        tgd_id = cur.next()[1]
        cur.next()
    body = [_parse_atom(cur)]
    while cur.peek()[1] == "&":
        cur.next()
        body.append(_parse_atom(cur))
    cur.expect("->")
    head = [_parse_atom(cur)]
    while cur.peek()[1] == "&":
        cur.next()
        head.append(_parse_atom(cur))
    if not cur.done():
        cur.error(f"trailing text after tgd: {cur.peek()[1]!r}")
    for a in body:
        _check_atom(a, source_schema, target_schema, "body", cur)
    for a in head:
        _check_atom(a, target_schema, source_schema, "head", cur)
    return StTgd(tgd_id, tuple(body), tuple(head))


def parse_tgd_file(
    text: str, source_schema: Schema, target_schema: Schema, source: str | None = None
) -> list[StTgd]:
    tgds = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        tgds.append(
            parse_tgd(
                line,
                source_schema,
                target_schema,
                default_id=f"tgd{len(tgds) + 1}",
                line_no=line_no,
                source=source,
            )
        )
    ids = [t.tgd_id for t in tgds]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate tgd ids", None, source)
    return tgds


def serialize_term(t: Term) -> str:
    return t.name if isinstance(t, Var) else serialize_value(t)


def serialize_atom(a: Atom) -> str:
    return f"{a.relation}({', '.join(serialize_term(t) for t in a.terms)})"


def serialize_tgd(t: StTgd, with_id: bool = True) -> str:
    rule = (
        f"{' & '.join(serialize_atom(a) for a in t.body)}"
        f" -> {' & '.join(serialize_atom(a) for a in t.head)}"
    )
    return f"{t.tgd_id}: {rule}" if with_id else rule


def serialize_tgd_file(tgds: Iterable[StTgd]) -> str:
    return "".join(serialize_tgd(t) + "\n" for t in tgds)


def parse_size_overrides(text: str, source: str | None = None) -> dict[str, int]:
    """Parse `id = integer` lines."""
    overrides: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        cur = _Cursor(tokenize(line, line_no, source), line_no, source)
        kind, tid = cur.next()
        if kind != "bare":
            cur.error(f"expected a tgd id, found {tid!r}")
        cur.expect("=")
        kind, num = cur.next()
        if kind != "bare" or not num.isdigit() or int(num) < 1:
            cur.error(f"expected a positive integer size, found {num!r}")
        if not cur.done():
            cur.error("trailing text after size override")
        overrides[tid] = int(num)
    return overrides


def canonical_form(t: StTgd) -> str:
    """Serialization invariant under variable renaming and atom reordering.

    Atoms are sorted by relation and constant pattern before variables are
    renamed in first-occurrence order, so syntactically equal candidates
    deduplicate; tgds that differ only in repeated-variable structure within
    identically patterned atoms may still canonicalize apart.
    """

    def atom_pattern(a: Atom):
        return (
            a.relation,
            tuple(
                (0, t.symbol) if isinstance(t, Const) else (1,) for t in a.terms
            ),
        )

    body = sorted(t.body, key=atom_pattern)
    head = sorted(t.head, key=atom_pattern)
    renaming: dict[str, str] = {}

    def rename(a: Atom) -> Atom:
        terms = []
        for term in a.terms:
            if isinstance(term, Var):
                if term.name not in renaming:
                    renaming[term.name] = f"V{len(renaming)}"
                terms.append(Var(renaming[term.name]))
            else:
                terms.append(term)
        return Atom(a.relation, tuple(terms))

    body = [rename(a) for a in body]
    head = [rename(a) for a in head]
    return serialize_tgd(StTgd("x", tuple(body), tuple(head)), with_id=False)
