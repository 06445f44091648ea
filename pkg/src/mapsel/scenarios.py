"""Benchmark scenario generation: schema-evolution primitives, instances,
controlled metadata and data noise.

Seven primitive kinds each emit fresh source and target relations, one
ground-truth tgd, and attribute correspondences.  The target instance is a
grounded chase of the ground truth over a random source instance; noise
then adds extra correspondences, non-certain unexplained tuples, and
non-certain error deletions.  Every random draw flows from one seeded
Mersenne Twister generator, so a scenario replays byte-identically from
its seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional

from .chase import ChaseResult, chase_mapping
from .errors import DomainError, ParseError
from .objective import EvalContext
from .relational import (
    Const,
    Fact,
    Instance,
    Null,
    RelationSig,
    Schema,
    apply_assignment,
    fact_key,
    maps_into,
    parse_instance,
    parse_schema,
    serialize_fact,
    serialize_instance,
    serialize_schema,
    tuple_homomorphism,
)
from .tgds import (
    Atom,
    CandidateSet,
    StTgd,
    Var,
    canonical_form,
    parse_tgd_file,
    serialize_tgd_file,
)

PRIMITIVES = ("CP", "ADD", "DL", "ADL", "ME", "VP", "VNM")


class Corresp(NamedTuple):
    source_rel: str
    source_attr: str
    target_rel: str
    target_attr: str


@dataclass(frozen=True)
class ScenarioConfig:
    primitive_counts: Mapping[str, int]
    attr_range: tuple[int, int] = (2, 4)
    rows: int = 5
    pi_corresp: int = 0
    pi_unexplained: int = 0
    pi_errors: int = 0
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.primitive_counts) - set(PRIMITIVES)
        if unknown:
            raise DomainError(f"unknown primitives: {sorted(unknown)}")
        if any(c < 0 for c in self.primitive_counts.values()):
            raise DomainError("primitive counts must be non-negative")
        lo, hi = self.attr_range
        if not 1 <= lo <= hi:
            raise DomainError(f"bad attribute range {self.attr_range}")
        if self.rows < 1:
            raise DomainError("rows must be positive")
        for name in ("pi_corresp", "pi_unexplained", "pi_errors"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise DomainError(f"{name} must lie in [0, 100], got {value}")

    def total_primitives(self) -> int:
        return sum(self.primitive_counts.values())


@dataclass(frozen=True)
class Invocation:
    kind: str
    index: int
    source_rels: tuple[str, ...]
    target_rels: tuple[str, ...]


@dataclass
class BuilderState:
    """Mutable accumulator while primitives are applied."""

    source: list[RelationSig] = field(default_factory=list)
    target: list[RelationSig] = field(default_factory=list)
    ground_truth: list[StTgd] = field(default_factory=list)
    correspondences: list[Corresp] = field(default_factory=list)
    invocations: list[Invocation] = field(default_factory=list)

    def add_corresp(self, c: Corresp):
        if c not in self.correspondences:
            self.correspondences.append(c)

    def source_sig(self, name: str) -> RelationSig:
        for sig in self.source:
            if sig.name == name:
                return sig
        raise DomainError(f"unknown source relation {name}")

    def target_sig(self, name: str) -> RelationSig:
        for sig in self.target:
            if sig.name == name:
                return sig
        raise DomainError(f"unknown target relation {name}")


def _attrs(n: int, start: int = 0) -> tuple[str, ...]:
    return tuple(f"c{i}" for i in range(start, start + n))


def _body_vars(n: int) -> list[Var]:
    return [Var(f"X{i}") for i in range(n)]


def apply_primitive(
    kind: str,
    state: BuilderState,
    rng: random.Random,
    attr_range: tuple[int, int] = (2, 4),
) -> BuilderState:
    """Extend the builder with one primitive invocation.

    Adds fresh source and target relations, the ground-truth tgd, and
    attribute correspondences.  Base relation arities are drawn from
    attr_range; ADD/DL/ADL draw the number of added or removed attributes
    from the same range, and DL/ADL widen the base relation so at least one
    attribute survives.
    """
    if kind not in PRIMITIVES:
        raise DomainError(f"unknown primitive {kind!r}")
    idx = len(state.invocations)
    lo, hi = attr_range
    base = max(lo, 2)

    def fresh_arity() -> int:
        return rng.randint(base, max(base, hi))

    if kind == "CP":
        k = fresh_arity()
        s = RelationSig(f"s{idx}", _attrs(k))
        t = RelationSig(f"t{idx}", _attrs(k))
        xs = _body_vars(k)
        tgd = StTgd(
            f"g{idx}", (Atom(s.name, tuple(xs)),), (Atom(t.name, tuple(xs)),)
        )
        state.source.append(s)
        state.target.append(t)
        state.ground_truth.append(tgd)
        for j in range(k):
            state.add_corresp(Corresp(s.name, s.attrs[j], t.name, t.attrs[j]))
        state.invocations.append(Invocation(kind, idx, (s.name,), (t.name,)))

    elif kind in ("ADD", "ADL", "DL"):
        n_add = rng.randint(lo, hi) if kind in ("ADD", "ADL") else 0
        n_del = rng.randint(lo, hi) if kind in ("DL", "ADL") else 0
        k = n_del + rng.randint(1, 3) if n_del else fresh_arity()
        s = RelationSig(f"s{idx}", _attrs(k))
        kept = sorted(set(range(k)) - set(rng.sample(range(k), n_del)))
        if not kept:
            raise DomainError(f"{kind} would leave {s.name} with zero attributes")
        t = RelationSig(f"t{idx}", _attrs(len(kept) + n_add))
        xs = _body_vars(k)
        head_terms = [xs[p] for p in kept] + [Var(f"E{i}") for i in range(n_add)]
        tgd = StTgd(
            f"g{idx}", (Atom(s.name, tuple(xs)),), (Atom(t.name, tuple(head_terms)),)
        )
        state.source.append(s)
        state.target.append(t)
        state.ground_truth.append(tgd)
        for out, p in enumerate(kept):
            state.add_corresp(Corresp(s.name, s.attrs[p], t.name, t.attrs[out]))
        state.invocations.append(Invocation(kind, idx, (s.name,), (t.name,)))

    elif kind == "ME":
        k1, k2 = fresh_arity(), fresh_arity()
        sa = RelationSig(f"s{idx}a", _attrs(k1))
        sb = RelationSig(f"s{idx}b", _attrs(k2))
        t = RelationSig(f"t{idx}", _attrs(k1 + k2 - 1))
        xs = _body_vars(k1)
        ys = [Var(f"Y{i}") for i in range(1, k2)]
        tgd = StTgd(
            f"g{idx}",
            (
                Atom(sa.name, tuple(xs)),
                Atom(sb.name, tuple([xs[-1]] + ys)),
            ),
            (Atom(t.name, tuple(xs + ys)),),
        )
        state.source += [sa, sb]
        state.target.append(t)
        state.ground_truth.append(tgd)
        for j in range(k1):
            state.add_corresp(Corresp(sa.name, sa.attrs[j], t.name, t.attrs[j]))
        state.add_corresp(Corresp(sb.name, sb.attrs[0], t.name, t.attrs[k1 - 1]))
        for j in range(1, k2):
            state.add_corresp(Corresp(sb.name, sb.attrs[j], t.name, t.attrs[k1 - 1 + j]))
        state.invocations.append(Invocation(kind, idx, (sa.name, sb.name), (t.name,)))

    elif kind in ("VP", "VNM"):
        k = fresh_arity()
        split = rng.randint(1, k - 1)
        s = RelationSig(f"s{idx}", _attrs(k))
        ta = RelationSig(f"t{idx}a", ("key",) + _attrs(split))
        tb = RelationSig(f"t{idx}b", ("key",) + _attrs(k - split, start=split))
        xs = _body_vars(k)
        state.source.append(s)
        if kind == "VP":
            head = (
                Atom(ta.name, tuple([Var("E1")] + xs[:split])),
                Atom(tb.name, tuple([Var("E1")] + xs[split:])),
            )
            targets = (ta, tb)
        else:
            tm = RelationSig(f"t{idx}m", ("key1", "key2"))
            head = (
                Atom(ta.name, tuple([Var("E1")] + xs[:split])),
                Atom(tm.name, (Var("E1"), Var("E2"))),
                Atom(tb.name, tuple([Var("E2")] + xs[split:])),
            )
            targets = (ta, tm, tb)
        state.target += list(targets)
        tgd = StTgd(f"g{idx}", (Atom(s.name, tuple(xs)),), head)
        state.ground_truth.append(tgd)
        for j in range(split):
            state.add_corresp(Corresp(s.name, s.attrs[j], ta.name, ta.attrs[j + 1]))
        for j in range(split, k):
            state.add_corresp(Corresp(s.name, s.attrs[j], tb.name, tb.attrs[j - split + 1]))
        state.invocations.append(
            Invocation(kind, idx, (s.name,), tuple(sig.name for sig in targets))
        )

    return state


def _percent_count(percent, pool_size: int) -> int:
    return int(Fraction(percent) * pool_size / 100)


def perturb_correspondences(
    state: BuilderState, pi_corresp, rng: random.Random
) -> BuilderState:
    """Add random correspondences to a share of the target relations.

    Each selected target relation gets, for every one of its attributes, a
    correspondence to a random attribute of one source relation drawn from a
    different primitive invocation.  Existing correspondences are kept.
    A target is skipped when no other invocation exists to draw from.
    """
    target_names = [sig.name for sig in state.target]
    count = _percent_count(pi_corresp, len(target_names))
    if count == 0:
        return state
    by_target = {
        name: inv for inv in state.invocations for name in inv.target_rels
    }
    for t_name in rng.sample(target_names, count):
        own = by_target[t_name]
        eligible = [
            name
            for inv in state.invocations
            if inv.index != own.index
            for name in inv.source_rels
        ]
        if not eligible:
            continue
        s_sig = state.source_sig(rng.choice(eligible))
        t_sig = state.target_sig(t_name)
        for b in t_sig.attrs:
            a = rng.choice(s_sig.attrs)
            state.add_corresp(Corresp(s_sig.name, a, t_sig.name, b))
    return state


def generate_candidates(state: BuilderState) -> CandidateSet:
    """Correspondence-driven candidate tgds, ground truth included first.

    For every (target relation, source relation) pair linked by at least one
    correspondence, emit a tgd copying the corresponded attributes and
    existentially quantifying the rest.  The joined ground-truth variants
    come first under stable ids; syntactic duplicates collapse.
    """
    candidates = list(state.ground_truth)
    seen = {canonical_form(t) for t in candidates}
    pair_map: dict[tuple[str, str], dict[str, str]] = {}
    for c in state.correspondences:
        per_attr = pair_map.setdefault((c.target_rel, c.source_rel), {})
        per_attr.setdefault(c.target_attr, c.source_attr)
    fresh = 0
    for (t_name, s_name) in sorted(pair_map):
        per_attr = pair_map[(t_name, s_name)]
        s_sig = state.source_sig(s_name)
        t_sig = state.target_sig(t_name)
        body_vars = {a: Var(f"V{i}") for i, a in enumerate(s_sig.attrs)}
        head_terms: list[Var] = []
        n_exist = 0
        for b in t_sig.attrs:
            if b in per_attr:
                head_terms.append(body_vars[per_attr[b]])
            else:
                head_terms.append(Var(f"E{n_exist}"))
                n_exist += 1
        tgd = StTgd(
            f"c{fresh}",
            (Atom(s_name, tuple(body_vars[a] for a in s_sig.attrs)),),
            (Atom(t_name, tuple(head_terms)),),
        )
        form = canonical_form(tgd)
        if form in seen:
            continue
        seen.add(form)
        candidates.append(tgd)
        fresh += 1
    return CandidateSet(tuple(candidates))


def populate_source(state: BuilderState, rows: int, rng: random.Random) -> Instance:
    """rows random facts per source relation, cells from a seeded value pool."""
    pool = [f"v{i}" for i in range(max(4, rows))]
    facts = []
    for sig in state.source:
        for _ in range(rows):
            facts.append(
                Fact(sig.name, tuple(Const(rng.choice(pool)) for _ in sig.attrs))
            )
    return Instance(Schema(state.source), facts)


def ground_nulls(inst: Instance, prefix: str = "n") -> Instance:
    """Replace every null by a fresh constant named after its identifier."""
    mapping = {nid: Const(f"{prefix}{nid}") for nid in sorted(inst.nulls())}
    return Instance(inst.schema, (apply_assignment(f, mapping) for f in inst))


@dataclass(frozen=True)
class TuplePools:
    """Chased facts classified by which side of the candidate set explains them.

    deletable lists the target facts witnessed only by the ground truth (the
    potential non-certain errors); addable lists the chased facts, absent
    from the target, generated only by the non-ground-truth candidates (the
    potential non-certain unexplained tuples, grounded when added).
    """

    both: tuple[Fact, ...]
    only_ground: tuple[Fact, ...]
    only_errmap: tuple[Fact, ...]
    deletable: tuple[Fact, ...]
    addable: tuple[Fact, ...]


def classify_tuples(
    kc: ChaseResult, ground_ids: frozenset[str], target: Instance
) -> TuplePools:
    """Split the chased candidate-set facts by generating side.

    A side generates a fact when one of that side's chased facts maps
    homomorphically onto the fact's target witness (or onto the fact itself
    when it has no witness), so renamed-null duplicates count as shared.
    """
    g_by_rel: dict[str, list[Fact]] = {}
    e_by_rel: dict[str, list[Fact]] = {}
    for f in kc.instance:
        producers = {tid for tid, _ in kc.provenance[f]}
        if producers & ground_ids:
            g_by_rel.setdefault(f.relation, []).append(f)
        if producers - ground_ids:
            e_by_rel.setdefault(f.relation, []).append(f)

    both: list[Fact] = []
    only_g: list[Fact] = []
    only_e: list[Fact] = []
    deletable: set[Fact] = set()
    addable: list[Fact] = []
    for f in kc.instance:
        witnessed = maps_into(f, target)
        anchor = witnessed[0] if witnessed else f
        gen_g = any(
            tuple_homomorphism(t, anchor) is not None
            for t in g_by_rel.get(anchor.relation, ())
        )
        gen_e = any(
            tuple_homomorphism(t, anchor) is not None
            for t in e_by_rel.get(anchor.relation, ())
        )
        if gen_g and gen_e:
            both.append(f)
        elif gen_g:
            only_g.append(f)
            if witnessed:
                deletable.add(anchor)
        else:
            only_e.append(f)
            if not witnessed:
                addable.append(f)
    return TuplePools(
        both=tuple(both),
        only_ground=tuple(only_g),
        only_errmap=tuple(only_e),
        deletable=tuple(sorted(deletable, key=fact_key)),
        addable=tuple(sorted(addable, key=fact_key)),
    )


@dataclass(frozen=True)
class NoiseLedger:
    added: tuple[Fact, ...]
    deleted: tuple[Fact, ...]


def perturb_instance(
    target: Instance,
    pools: TuplePools,
    pi_unexplained,
    pi_errors,
    rng: random.Random,
) -> tuple[Instance, NoiseLedger]:
    """Add grounded unexplained-pool facts and delete error-pool facts.

    Counts are floor(percent / 100 * pool size).  Sampled additions are
    grounded with fresh constants, one per null, numbered in canonical
    order; deletions come only from the deletable pool.
    """
    n_add = _percent_count(pi_unexplained, len(pools.addable))
    n_del = _percent_count(pi_errors, len(pools.deletable))
    picked_add = sorted(rng.sample(pools.addable, n_add), key=fact_key)
    picked_del = sorted(rng.sample(pools.deletable, n_del), key=fact_key)
    counter = 0
    added = []
    for f in picked_add:
        mapping: dict[int, Const] = {}
        for nid in sorted(f.nulls()):
            mapping[nid] = Const(f"m{counter}")
            counter += 1
        added.append(apply_assignment(f, mapping))
    perturbed = target.without_facts(picked_del).with_facts(added)
    return perturbed, NoiseLedger(added=tuple(added), deleted=tuple(picked_del))


@dataclass(frozen=True)
class Scenario:
    """A generated benchmark bundle."""

    source_schema: Schema
    target_schema: Schema
    source: Instance
    target: Instance
    candidates: CandidateSet
    ground_truth_ids: frozenset[str]
    correspondences: tuple[Corresp, ...]
    ledger: NoiseLedger
    config: ScenarioConfig

    @property
    def seed(self) -> int:
        return self.config.seed

    def ground_truth(self) -> tuple[StTgd, ...]:
        return tuple(t for t in self.candidates if t.tgd_id in self.ground_truth_ids)

    def context(self) -> EvalContext:
        return EvalContext(self.candidates, self.source, self.target)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Run the full generation pipeline, deterministic in config.seed."""
    if config.total_primitives() < 1:
        raise DomainError("a scenario needs at least one primitive")
    rng = random.Random(config.seed)
    state = BuilderState()
    for kind in PRIMITIVES:
        for _ in range(config.primitive_counts.get(kind, 0)):
            apply_primitive(kind, state, rng, config.attr_range)
    target_schema = Schema(state.target)
    source_inst = populate_source(state, config.rows, rng)
    ground_ids = frozenset(t.tgd_id for t in state.ground_truth)
    kg = chase_mapping(state.ground_truth, source_inst, target_schema)
    baseline = ground_nulls(kg.instance)
    perturb_correspondences(state, config.pi_corresp, rng)
    candidates = generate_candidates(state)
    kc = chase_mapping(candidates.candidates, source_inst, target_schema)
    pools = classify_tuples(kc, ground_ids, baseline)
    target_inst, ledger = perturb_instance(
        baseline, pools, config.pi_unexplained, config.pi_errors, rng
    )
    return Scenario(
        source_schema=Schema(state.source),
        target_schema=target_schema,
        source=source_inst,
        target=target_inst,
        candidates=candidates,
        ground_truth_ids=ground_ids,
        correspondences=tuple(state.correspondences),
        ledger=ledger,
        config=config,
    )


# ---------------------------------------------------------------------------
# Scenario directory I/O
# ---------------------------------------------------------------------------


def config_to_text(config: ScenarioConfig) -> str:
    primitives = ",".join(
        f"{k}:{config.primitive_counts[k]}"
        for k in PRIMITIVES
        if config.primitive_counts.get(k, 0)
    )
    lines = [
        f"primitives={primitives}",
        f"attr_range={config.attr_range[0]},{config.attr_range[1]}",
        f"rows={config.rows}",
        f"pi_corresp={config.pi_corresp}",
        f"pi_unexplained={config.pi_unexplained}",
        f"pi_errors={config.pi_errors}",
        f"seed={config.seed}",
    ]
    return "\n".join(lines) + "\n"


def config_from_text(text: str, source: str | None = None) -> ScenarioConfig:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, found {line!r}", line_no, source)
        values[key.strip()] = value.strip()
    try:
        counts = {}
        if values.get("primitives"):
            for part in values["primitives"].split(","):
                kind, _, num = part.partition(":")
                counts[kind.strip()] = int(num)
        lo, _, hi = values.get("attr_range", "2,4").partition(",")
        return ScenarioConfig(
            primitive_counts=counts,
            attr_range=(int(lo), int(hi)),
            rows=int(values.get("rows", "5")),
            pi_corresp=int(values.get("pi_corresp", "0")),
            pi_unexplained=int(values.get("pi_unexplained", "0")),
            pi_errors=int(values.get("pi_errors", "0")),
            seed=int(values.get("seed", "0")),
        )
    except (ValueError, DomainError) as exc:
        raise ParseError(f"bad scenario config: {exc}", None, source) from None


def write_scenario(scenario: Scenario, out_dir: Path | str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schema.txt").write_text(
        serialize_schema(scenario.source_schema, scenario.target_schema)
    )
    (out / "source.inst").write_text(serialize_instance(scenario.source))
    (out / "target.inst").write_text(serialize_instance(scenario.target))
    (out / "groundtruth.tgd").write_text(serialize_tgd_file(scenario.ground_truth()))
    (out / "candidates.tgd").write_text(
        serialize_tgd_file(scenario.candidates.candidates)
    )
    corresp_lines = ["source_rel,source_attr,target_rel,target_attr"]
    corresp_lines += [",".join(c) for c in scenario.correspondences]
    (out / "corresp.csv").write_text("\n".join(corresp_lines) + "\n")
    ledger_lines = ["op,fact"]
    ledger_lines += [f'add,"{serialize_fact(f)}"' for f in scenario.ledger.added]
    ledger_lines += [f'del,"{serialize_fact(f)}"' for f in scenario.ledger.deleted]
    (out / "ledger.csv").write_text("\n".join(ledger_lines) + "\n")
    (out / "config.txt").write_text(config_to_text(scenario.config))
    return out


@dataclass(frozen=True)
class LoadedScenario:
    source_schema: Schema
    target_schema: Schema
    source: Instance
    target: Instance
    candidates: CandidateSet
    ground_truth: tuple[StTgd, ...]

    def context(self) -> EvalContext:
        return EvalContext(self.candidates, self.source, self.target)


def read_scenario(in_dir: Path | str) -> LoadedScenario:
    base = Path(in_dir)
    source_schema, target_schema = parse_schema(
        (base / "schema.txt").read_text(), source=str(base / "schema.txt")
    )
    source = parse_instance(
        (base / "source.inst").read_text(), source_schema, str(base / "source.inst")
    )
    target = parse_instance(
        (base / "target.inst").read_text(), target_schema, str(base / "target.inst")
    )
    candidates = parse_tgd_file(
        (base / "candidates.tgd").read_text(),
        source_schema,
        target_schema,
        str(base / "candidates.tgd"),
    )
    ground = parse_tgd_file(
        (base / "groundtruth.tgd").read_text(),
        source_schema,
        target_schema,
        str(base / "groundtruth.tgd"),
    )
    return LoadedScenario(
        source_schema=source_schema,
        target_schema=target_schema,
        source=source,
        target=target,
        candidates=CandidateSet(tuple(candidates)),
        ground_truth=tuple(ground),
    )
