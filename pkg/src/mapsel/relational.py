"""Relational substrate: values, schemas, instances, homomorphism search.

Instances hold facts whose cells are constants or labeled nulls.
Homomorphisms are identity on constants and may rebind nulls; the
backtracking matchers here are the core used by the chase, the scoring
functions, and tuple classification.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional

from .errors import DomainError, ParseError


@dataclass(frozen=True)
class Const:
    """An uninterpreted atomic symbol; numerals are symbols, not numbers."""

    symbol: str


@dataclass(frozen=True)
class Null:
    """A labeled null with a run-unique positive integer identifier."""

    nid: int


Value = Const | Null

NullAssignment = Mapping[int, Value]


def value_key(v: Value) -> tuple:
    """Total order on values: constants by symbol, then nulls by id."""
    if isinstance(v, Const):
        return (0, v.symbol)
    return (1, v.nid)


@dataclass(frozen=True)
class Fact:
    """One relational tuple: relation name plus an ordered cell list."""

    relation: str
    cells: tuple[Value, ...]

    def nulls(self) -> frozenset[int]:
        return frozenset(c.nid for c in self.cells if isinstance(c, Null))

    def is_ground(self) -> bool:
        return all(isinstance(c, Const) for c in self.cells)


def fact_key(f: Fact) -> tuple:
    return (f.relation, tuple(value_key(c) for c in f.cells))


def fact(relation: str, *cells: Value | str) -> Fact:
    """Convenience constructor; bare strings become constants."""
    return Fact(relation, tuple(Const(c) if isinstance(c, str) else c for c in cells))


@dataclass(frozen=True)
class RelationSig:
    name: str
    attrs: tuple[str, ...]

    def __post_init__(self):
        if not self.attrs:
            raise DomainError(f"relation {self.name}: arity must be positive")
        if len(set(self.attrs)) != len(self.attrs):
            raise DomainError(f"relation {self.name}: duplicate attribute names")

    @property
    def arity(self) -> int:
        return len(self.attrs)


class Schema:
    """A set of relation signatures keyed by name."""

    def __init__(self, relations: Iterable[RelationSig]):
        self._by_name: dict[str, RelationSig] = {}
        for sig in relations:
            if sig.name in self._by_name:
                raise DomainError(f"duplicate relation {sig.name}")
            self._by_name[sig.name] = sig

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> RelationSig:
        try:
            return self._by_name[name]
        except KeyError:
            raise DomainError(f"unknown relation {name}") from None

    def relations(self) -> list[RelationSig]:
        return sorted(self._by_name.values(), key=lambda s: s.name)

    def __eq__(self, other) -> bool:
        return isinstance(other, Schema) and self._by_name == other._by_name

    def __hash__(self):
        return hash(frozenset(self._by_name.values()))

    def __repr__(self):
        return f"Schema({[s.name + '/' + str(s.arity) for s in self.relations()]})"


class Instance:
    """An immutable set of facts over a schema (set semantics, no duplicates)."""

    def __init__(self, schema: Schema, facts: Iterable[Fact] = ()):
        self.schema = schema
        fs = frozenset(facts)
        for f in fs:
            if f.relation not in schema:
                raise DomainError(f"fact over undeclared relation {f.relation}")
            sig = schema[f.relation]
            if len(f.cells) != sig.arity:
                raise DomainError(
                    f"{f.relation}: expected {sig.arity} cells, got {len(f.cells)}"
                )
        self.facts = fs
        self._sorted = tuple(sorted(fs, key=fact_key))
        by_rel: dict[str, list[Fact]] = {}
        for f in self._sorted:
            by_rel.setdefault(f.relation, []).append(f)
        self._by_rel = {r: tuple(fs) for r, fs in by_rel.items()}

    def __contains__(self, f: Fact) -> bool:
        return f in self.facts

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self) -> Iterator[Fact]:
        """Iterate in canonical order (relation name, then cells)."""
        return iter(self._sorted)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Instance)
            and self.schema == other.schema
            and self.facts == other.facts
        )

    def __hash__(self):
        return hash(self.facts)

    def by_relation(self, name: str) -> tuple[Fact, ...]:
        return self._by_rel.get(name, ())

    def with_facts(self, more: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, self.facts | set(more))

    def without_facts(self, gone: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, self.facts - set(gone))

    def nulls(self) -> frozenset[int]:
        return frozenset(n for f in self.facts for n in f.nulls())

    def constants(self) -> frozenset[Const]:
        return frozenset(c for f in self.facts for c in f.cells if isinstance(c, Const))

    def is_ground(self) -> bool:
        return all(f.is_ground() for f in self.facts)


class NullAllocator:
    """Monotone source of fresh null identifiers, safe to share across threads."""

    def __init__(self, start: int = 1):
        if start < 1:
            raise DomainError("null identifiers are positive")
        self._next = start
        self._lock = threading.Lock()

    def fresh(self) -> int:
        with self._lock:
            nid = self._next
            self._next += 1
            return nid


# ---------------------------------------------------------------------------
# Homomorphism search
# ---------------------------------------------------------------------------


def apply_assignment(f: Fact, h: NullAssignment) -> Fact:
    """Substitute bound nulls in a fact; unbound nulls stay as they are."""
    cells = tuple(
        h.get(c.nid, c) if isinstance(c, Null) else c for c in f.cells
    )
    return Fact(f.relation, cells)


def tuple_homomorphism(
    t: Fact, q: Fact, base: Optional[NullAssignment] = None
) -> Optional[dict[int, Value]]:
    """Minimal extension h of base with h(t) = q cell-wise, or None.

    Constants must match exactly; a null already bound in base must map to
    the corresponding cell of q.  base is never mutated.
    """
    if t.relation != q.relation or len(t.cells) != len(q.cells):
        return None
    h = dict(base or {})
    for a, b in zip(t.cells, q.cells):
        if isinstance(a, Const):
            if a != b:
                return None
        else:
            bound = h.get(a.nid)
            if bound is None:
                h[a.nid] = b
            elif bound != b:
                return None
    return h


def maps_into(
    t: Fact, inst: Instance, base: Optional[NullAssignment] = None
) -> Optional[tuple[Fact, dict[int, Value]]]:
    """First fact q of inst (canonical order) with an extension h(t) = q."""
    for q in inst.by_relation(t.relation):
        h = tuple_homomorphism(t, q, base)
        if h is not None:
            return q, h
    return None


def extend_into_instance(
    facts: Iterable[Fact], inst: Instance, base: Optional[NullAssignment] = None
) -> Optional[dict[int, Value]]:
    """Extension of base mapping every given fact to some member of inst.

    Backtracking over per-fact candidates, most-constrained fact first with
    canonical order as tie-break, so the result is deterministic.
    """
    pending = sorted(set(facts), key=fact_key)
    return _extend(pending, inst, dict(base or {}))


def _extend(pending, inst, h):
    if not pending:
        return h
    best_i, best_exts = 0, None
    for i, t in enumerate(pending):
        exts = []
        for q in inst.by_relation(t.relation):
            e = tuple_homomorphism(t, q, h)
            if e is not None:
                exts.append(e)
        if best_exts is None or len(exts) < len(best_exts):
            best_i, best_exts = i, exts
        if not exts:
            return None
    rest = pending[:best_i] + pending[best_i + 1 :]
    for e in best_exts:
        r = _extend(rest, inst, e)
        if r is not None:
            return r
    return None


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

_BARE_CONST = re.compile(r"[a-z0-9][A-Za-z0-9_]*")
_TOKEN = re.compile(
    r"\s*(?:(?P<quoted>'[^'\n]*')|(?P<null>_[0-9]+)|(?P<bare>[A-Za-z0-9][A-Za-z0-9_]*)"
    r"|(?P<punct>->|[(),.:&=]))"
)


def strip_comment(line: str) -> str:
    """Drop a % comment, honouring single-quoted strings."""
    in_quote = False
    for i, ch in enumerate(line):
        if ch == "'":
            in_quote = not in_quote
        elif ch == "%" and not in_quote:
            return line[:i]
    return line


def tokenize(line: str, line_no: int, source: str | None = None) -> list[tuple[str, str]]:
    """Split a line into (kind, text) tokens; kinds: quoted, null, bare, punct."""
    out = []
    pos = 0
    while pos < len(line):
        if line[pos:].strip() == "":
            break
        m = _TOKEN.match(line, pos)
        if m is None:
            raise ParseError(f"unexpected character {line[pos:].lstrip()[0]!r}", line_no, source)
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Cursor:
    """Token stream with one-line error reporting."""

    def __init__(self, tokens, line_no, source=None):
        self.toks = tokens
        self.i = 0
        self.line_no = line_no
        self.source = source

    def error(self, msg: str):
        raise ParseError(msg, self.line_no, self.source)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def next(self):
        if self.i >= len(self.toks):
            self.error("unexpected end of line")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, tok = self.next()
        if tok != text:
            self.error(f"expected {text!r}, found {tok!r}")

    def done(self) -> bool:
        return self.i >= len(self.toks)


def _parse_value(cur: _Cursor) -> Value:
    kind, tok = cur.next()
    if kind == "quoted":
        return Const(tok[1:-1])
    if kind == "null":
        nid = int(tok[1:])
        if nid < 1:
            cur.error("null identifiers are positive, found _0")
        return Null(nid)
    if kind == "bare":
        if tok[0].isupper():
            cur.error(f"constant {tok!r} must start with a lowercase letter or digit, or be quoted")
        return Const(tok)
    cur.error(f"expected a value, found {tok!r}")


def parse_instance(text: str, schema: Schema, source: str | None = None) -> Instance:
    """Parse an instance file; duplicate facts are silently deduplicated."""
    facts: list[Fact] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        cur = _Cursor(tokenize(line, line_no, source), line_no, source)
        kind, rel = cur.next()
        if kind != "bare":
            cur.error(f"expected a relation name, found {rel!r}")
        if rel not in schema:
            cur.error(f"unknown relation {rel}")
        cur.expect("(")
        cells = [_parse_value(cur)]
        while cur.peek()[1] == ",":
            cur.next()
            cells.append(_parse_value(cur))
        cur.expect(")")
        cur.expect(".")
        if not cur.done():
            cur.error(f"trailing text after fact: {cur.peek()[1]!r}")
        sig = schema[rel]
        if len(cells) != sig.arity:
            cur.error(f"{rel} declared with arity {sig.arity}, fact has {len(cells)}")
        facts.append(Fact(rel, tuple(cells)))
    return Instance(schema, facts)


def serialize_value(v: Value) -> str:
    if isinstance(v, Null):
        return f"_{v.nid}"
    if _BARE_CONST.fullmatch(v.symbol):
        return v.symbol
    if "'" in v.symbol or "\n" in v.symbol:
        raise DomainError(f"constant {v.symbol!r} cannot be serialized")
    return f"'{v.symbol}'"


def serialize_fact(f: Fact) -> str:
    return f"{f.relation}({', '.join(serialize_value(c) for c in f.cells)})"


def serialize_instance(inst: Instance) -> str:
    """Canonically ordered fact lines; parse(serialize(x)) == x."""
    return "".join(f"{serialize_fact(f)}.\n" for f in inst)


def parse_schema(text: str, source: str | None = None) -> tuple[Schema, Schema]:
    """Parse a schema file with [source] and [target] sections."""
    sections: dict[str, list[RelationSig]] = {"source": [], "target": []}
    current: list[RelationSig] | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        if line in ("[source]", "[target]"):
            current = sections[line[1:-1]]
            continue
        if current is None:
            raise ParseError("relation declared before a [source] or [target] header", line_no, source)
        cur = _Cursor(tokenize(line, line_no, source), line_no, source)
        kind, rel = cur.next()
        if kind != "bare" or rel[0].isupper():
            cur.error(f"expected a relation name, found {rel!r}")
        cur.expect("(")
        attrs = []
        while True:
            kind, attr = cur.next()
            if kind != "bare":
                cur.error(f"expected an attribute name, found {attr!r}")
            attrs.append(attr)
            kind, tok = cur.next()
            if tok == ")":
                break
            if tok != ",":
                cur.error(f"expected ',' or ')', found {tok!r}")
        if not cur.done():
            cur.error("trailing text after declaration")
        try:
            current.append(RelationSig(rel, tuple(attrs)))
        except DomainError as exc:
            raise ParseError(str(exc), line_no, source) from None
    try:
        return Schema(sections["source"]), Schema(sections["target"])
    except DomainError as exc:
        raise ParseError(str(exc), None, source) from None


def serialize_schema(source: Schema, target: Schema) -> str:
    lines = ["[source]"]
    lines += [f"{s.name}({', '.join(s.attrs)})" for s in source.relations()]
    lines.append("[target]")
    lines += [f"{s.name}({', '.join(s.attrs)})" for s in target.relations()]
    return "\n".join(lines) + "\n"
