"""Command-line harness tying generation, chasing, evaluation, selection,
reduction, and benchmarking together.

All randomness flows from explicit --seed flags.  Exit codes: 0 success,
1 domain errors (infeasible config, cap exceeded), 2 I/O or parse errors.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DomainError, ParseError
from .fixtures import COPY_ID, JOIN_ID, project_example, project_example_extended
from .objective import DEFAULT_WEIGHTS, EvalContext, ObjectiveBreakdown, Weights
from .relational import parse_instance, parse_schema, serialize_fact, serialize_instance
from .scenarios import (
    PRIMITIVES,
    ScenarioConfig,
    generate_scenario,
    read_scenario,
    write_scenario,
)
from .setcover import parse_set_cover, reduce_weighted
from .solvers import SOLVERS, decide, select_exhaustive, select_greedy, select_local_search
from .tgds import (
    CandidateSet,
    StTgd,
    canonical_form,
    parse_size_overrides,
    parse_tgd_file,
    serialize_tgd,
    serialize_tgd_file,
)

BENCH_CSV_HEADER = (
    "# mapsel bench csv v1\n"
    "scenario,seed,config,solver,total,total_decimal,evaluations,"
    "precision,recall,exact_match\n"
)


def frac_str(x: Fraction) -> str:
    return str(x)  # "p/q" for proper fractions, plain integer otherwise


def human_frac(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x} (≈ {float(x):.4f})"


@dataclass(frozen=True)
class RecoveryMetrics:
    precision: Fraction
    recall: Fraction
    exact: bool


def compare_to_ground_truth(
    selected: Iterable[StTgd], ground_truth: Iterable[StTgd]
) -> RecoveryMetrics:
    """Precision/recall of a selection against the ground truth.

    Tgds are compared by canonical form (sorted atoms, positional variable
    numbering).  An empty selection scores precision 1 against an empty
    ground truth and 0 otherwise; recall is the mirror convention.
    """
    sel = {canonical_form(t) for t in selected}
    truth = {canonical_form(t) for t in ground_truth}
    hit = len(sel & truth)
    if sel:
        precision = Fraction(hit, len(sel))
    else:
        precision = Fraction(1) if not truth else Fraction(0)
    if truth:
        recall = Fraction(hit, len(truth))
    else:
        recall = Fraction(1) if not sel else Fraction(0)
    return RecoveryMetrics(precision, recall, sel == truth)


@dataclass(frozen=True)
class BenchRecord:
    scenario_id: str
    seed: int
    config: str
    solver: str
    total: Fraction
    evaluations: int
    wall_time: float
    metrics: RecoveryMetrics

    def csv_row(self) -> str:
        # wall_time is reported in text mode only, so bench CSVs replay
        # byte-identically for a fixed seed.
        return (
            f"{self.scenario_id},{self.seed},{self.config},{self.solver},"
            f"{frac_str(self.total)},{float(self.total):.4f},{self.evaluations},"
            f"{frac_str(self.metrics.precision)},{frac_str(self.metrics.recall)},"
            f"{str(self.metrics.exact).lower()}"
        )


# ---------------------------------------------------------------------------
# Shared argument plumbing
# ---------------------------------------------------------------------------


def _parse_weights(text: str) -> Weights:
    parts = text.split(",")
    if len(parts) != 3:
        raise DomainError(f"--weights expects w1,w2,w3, got {text!r}")
    try:
        w1, w2, w3 = (int(p) for p in parts)
    except ValueError:
        raise DomainError(f"--weights expects integers, got {text!r}") from None
    return (w1, w2, w3)


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise DomainError(f"expected a rational like 22/3, got {text!r}") from None


def _parse_primitive_counts(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    if not text:
        return counts
    for part in text.split(","):
        kind, sep, num = part.partition(":")
        if not sep:
            kind, sep, num = part.partition("=")
        if not sep or not num.strip().isdigit():
            raise DomainError(
                f"--primitives expects KIND:COUNT pairs, got {part!r}"
            )
        counts[kind.strip()] = counts.get(kind.strip(), 0) + int(num)
    return counts


def _read_text(path: str) -> str:
    return Path(path).read_text()


def _load_problem(args) -> tuple[EvalContext, CandidateSet]:
    source_schema, target_schema = parse_schema(_read_text(args.schema), args.schema)
    source = parse_instance(_read_text(args.source), source_schema, args.source)
    target = parse_instance(_read_text(args.target), target_schema, args.target)
    tgds = parse_tgd_file(_read_text(args.tgds), source_schema, target_schema, args.tgds)
    overrides = {}
    if getattr(args, "sizes", None):
        overrides = parse_size_overrides(_read_text(args.sizes), args.sizes)
    candidates = CandidateSet(tuple(tgds), overrides)
    return EvalContext(candidates, source, target), candidates


def _parse_selection(text: str, candidates: CandidateSet) -> frozenset[str]:
    if not text:
        return frozenset()
    if text == "all":
        return frozenset(candidates.ids())
    return frozenset(part.strip() for part in text.split(",") if part.strip())


def _breakdown_lines(selection: frozenset[str], b: ObjectiveBreakdown) -> list[str]:
    members = ",".join(sorted(selection)) if selection else "(empty)"
    return [
        f"selection: {members}",
        f"unexplained: {human_frac(b.unexplained)}",
        f"errors: {human_frac(b.errors)}",
        f"size: {b.size}",
        f"total: {human_frac(b.total)}",
    ]


def _breakdown_csv(selection: frozenset[str], b: ObjectiveBreakdown) -> str:
    members = ";".join(sorted(selection))
    return (
        f"{members},{frac_str(b.unexplained)},{frac_str(b.errors)},"
        f"{b.size},{frac_str(b.total)}"
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    config = ScenarioConfig(
        primitive_counts=_parse_primitive_counts(args.primitives),
        attr_range=tuple(int(x) for x in args.attr_range.split(",")),
        rows=args.rows,
        pi_corresp=args.pi_corresp,
        pi_unexplained=args.pi_unexplained,
        pi_errors=args.pi_errors,
        seed=args.seed,
    )
    scenario = generate_scenario(config)
    out = write_scenario(scenario, args.out)
    print(
        f"scenario written to {out}: |I|={len(scenario.source)} "
        f"|J|={len(scenario.target)} |C|={len(scenario.candidates)} "
        f"|ground truth|={len(scenario.ground_truth_ids)}"
    )
    return 0


def _cmd_chase(args) -> int:
    source_schema, target_schema = parse_schema(_read_text(args.schema), args.schema)
    source = parse_instance(_read_text(args.source), source_schema, args.source)
    tgds = parse_tgd_file(_read_text(args.tgds), source_schema, target_schema, args.tgds)
    from .chase import chase_mapping

    result = chase_mapping(tgds, source, target_schema)
    instance_text = serialize_instance(result.instance)
    prov_lines = []
    for f in result.instance:
        for tid, idx in sorted(result.provenance[f]):
            prov_lines.append(f"tuple {serialize_fact(f)} <- {tid} {idx}")
    prov_text = "\n".join(prov_lines) + ("\n" if prov_lines else "")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "chase.inst").write_text(instance_text)
        (out / "chase.prov").write_text(prov_text)
        print(f"chase written to {out}: {len(result.instance)} facts")
    else:
        sys.stdout.write(instance_text)
        print("% provenance")
        sys.stdout.write(prov_text)
    return 0


def _cmd_evaluate(args) -> int:
    ctx, candidates = _load_problem(args)
    selection = _parse_selection(args.selection, candidates)
    breakdown = ctx.objective(selection, _parse_weights(args.weights))
    if args.format == "csv":
        print("selection,unexplained,errors,size,total")
        print(_breakdown_csv(selection, breakdown))
    else:
        for line in _breakdown_lines(selection, breakdown):
            print(line)
    return 0


def _cmd_select(args) -> int:
    ctx, candidates = _load_problem(args)
    weights = _parse_weights(args.weights)
    if args.solver == "exhaustive":
        report = select_exhaustive(ctx, weights, cap=args.cap, workers=args.workers)
    elif args.solver == "greedy":
        report = select_greedy(ctx, weights, workers=args.workers)
    else:
        report = select_local_search(
            ctx, weights, seed=args.seed, max_moves=args.max_moves
        )
    chosen = [t for t in candidates if t.tgd_id in report.selection]
    if args.format == "csv":
        print("selection,unexplained,errors,size,total")
        print(_breakdown_csv(report.selection, report.breakdown))
    else:
        for t in chosen:
            print(serialize_tgd(t))
        for line in _breakdown_lines(report.selection, report.breakdown):
            print(line)
    print(
        f"solver={report.solver} evaluations={report.evaluations} "
        f"optimal={str(report.optimal).lower()} wall={report.wall_time:.3f}s"
    )
    return 0


def _cmd_decide(args) -> int:
    ctx, _ = _load_problem(args)
    answer = decide(
        ctx,
        _parse_weights(args.weights),
        _parse_fraction(args.threshold),
        solver=args.solver,
        cap=args.cap,
        seed=args.seed,
        max_moves=args.max_moves,
    )
    print("yes" if answer else "no")
    return 0


def _cmd_reduce_setcover(args) -> int:
    sc = parse_set_cover(_read_text(args.input), args.input)
    reduced = reduce_weighted(sc, _parse_weights(args.weights))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .relational import serialize_schema

    (out / "schema.txt").write_text(
        serialize_schema(reduced.source_schema, reduced.target_schema)
    )
    (out / "source.inst").write_text(serialize_instance(reduced.source))
    (out / "target.inst").write_text(serialize_instance(reduced.target))
    (out / "candidates.tgd").write_text(
        serialize_tgd_file(reduced.candidates.candidates)
    )
    (out / "threshold.txt").write_text(f"{reduced.threshold}\n")
    print(
        f"reduction written to {out}: |I|={len(reduced.source)} "
        f"|J|={len(reduced.target)} |C|={len(reduced.candidates)} "
        f"threshold={reduced.threshold}"
    )
    return 0


def _cmd_bench(args) -> int:
    master = random.Random(args.seed)
    counts = _parse_primitive_counts(args.primitives)
    rows: list[str] = []
    records: list[BenchRecord] = []
    for i in range(args.scenarios):
        seed_i = master.getrandbits(63)
        config = ScenarioConfig(
            primitive_counts=counts,
            rows=args.rows,
            pi_corresp=args.pi_corresp,
            pi_unexplained=args.pi_unexplained,
            pi_errors=args.pi_errors,
            seed=seed_i,
        )
        scenario = generate_scenario(config)
        ctx = scenario.context()
        start = time.perf_counter()
        if args.solver == "exhaustive":
            report = select_exhaustive(ctx, _parse_weights(args.weights), cap=args.cap)
        elif args.solver == "greedy":
            report = select_greedy(ctx, _parse_weights(args.weights))
        else:
            report = select_local_search(
                ctx, _parse_weights(args.weights), seed=seed_i
            )
        wall = time.perf_counter() - start
        selected = [t for t in scenario.candidates if t.tgd_id in report.selection]
        metrics = compare_to_ground_truth(selected, scenario.ground_truth())
        record = BenchRecord(
            scenario_id=f"s{i:04d}",
            seed=seed_i,
            config=config_echo(config),
            solver=report.solver,
            total=report.breakdown.total,
            evaluations=report.evaluations,
            wall_time=wall,
            metrics=metrics,
        )
        records.append(record)
        rows.append(record.csv_row())
    csv_text = BENCH_CSV_HEADER + "\n".join(rows) + ("\n" if rows else "")
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"bench csv written to {args.out} ({len(rows)} scenarios)")
    else:
        sys.stdout.write(csv_text)
    if args.format == "text":
        exact = sum(1 for r in records if r.metrics.exact)
        total_wall = sum(r.wall_time for r in records)
        print(
            f"# {exact}/{len(records)} exact recoveries, "
            f"total solver wall time {total_wall:.3f}s"
        )
    return 0


def config_echo(config: ScenarioConfig) -> str:
    primitives = "+".join(
        f"{k}{config.primitive_counts[k]}"
        for k in PRIMITIVES
        if config.primitive_counts.get(k, 0)
    )
    return (
        f"{primitives};rows={config.rows};piC={config.pi_corresp};"
        f"piU={config.pi_unexplained};piE={config.pi_errors}"
    )


def _cmd_verify_fixture(args) -> int:
    ctx = project_example()
    expected = {
        frozenset(): Fraction(4),
        frozenset({COPY_ID}): Fraction(22, 3),
        frozenset({JOIN_ID}): Fraction(8),
        frozenset({COPY_ID, JOIN_ID}): Fraction(12),
    }
    ok = True
    for selection in sorted(expected, key=lambda s: (len(s), sorted(s))):
        b = ctx.objective(selection)
        want = expected[selection]
        members = ",".join(sorted(selection)) if selection else "(empty)"
        status = "ok" if b.total == want else f"MISMATCH (expected {want})"
        print(f"{members}: total {human_frac(b.total)} {status}")
        ok = ok and b.total == want
    extended = project_example_extended()
    best = select_exhaustive(extended).selection
    if best != frozenset({JOIN_ID}):
        print(f"extended example optimum MISMATCH: {sorted(best)}")
        ok = False
    else:
        print(f"extended example optimum: {JOIN_ID} ok")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapsel",
        description="Schema-mapping selection over data examples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_problem_flags(p):
        p.add_argument("--schema", required=True, help="schema file")
        p.add_argument("--source", required=True, help="source instance file")
        p.add_argument("--target", required=True, help="target instance file")
        p.add_argument("--tgds", required=True, help="candidate tgd file")
        p.add_argument("--sizes", help="size override file (id = integer lines)")
        p.add_argument("--weights", default="1,1,1", help="w1,w2,w3 (default 1,1,1)")

    p = sub.add_parser("generate", help="generate a benchmark scenario directory")
    p.add_argument("--primitives", default="CP:2", help="KIND:COUNT list, e.g. CP:2,VP:1")
    p.add_argument("--attr-range", default="2,4", help="low,high attribute range")
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--pi-corresp", type=int, default=0)
    p.add_argument("--pi-unexplained", type=int, default=0)
    p.add_argument("--pi-errors", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("chase", help="chase tgds over a source instance")
    p.add_argument("--schema", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--tgds", required=True)
    p.add_argument("--out", help="output directory (default: stdout)")
    p.set_defaults(func=_cmd_chase)

    p = sub.add_parser("evaluate", help="score one selection of candidates")
    add_problem_flags(p)
    p.add_argument("--selection", default="", help="comma list of tgd ids, or 'all'")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("select", help="search for the minimizing selection")
    add_problem_flags(p)
    p.add_argument("--solver", choices=tuple(SOLVERS), default="exhaustive")
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-moves", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("decide", help="is there a selection with total <= threshold?")
    add_problem_flags(p)
    p.add_argument("--threshold", required=True, help="rational bound, e.g. 8 or 22/3")
    p.add_argument("--solver", choices=tuple(SOLVERS), default="exhaustive")
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-moves", type=int, default=1000)
    p.set_defaults(func=_cmd_decide)

    p = sub.add_parser("reduce-setcover", help="reduce a SET COVER instance")
    p.add_argument("--input", required=True, help="universe/set/n file")
    p.add_argument("--weights", default="1,1,1")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_reduce_setcover)

    p = sub.add_parser("bench", help="generate, solve, and score many scenarios")
    p.add_argument("--scenarios", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--primitives", default="CP:1,VP:1")
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--pi-corresp", type=int, default=0)
    p.add_argument("--pi-unexplained", type=int, default=0)
    p.add_argument("--pi-errors", type=int, default=0)
    p.add_argument("--solver", choices=tuple(SOLVERS), default="exhaustive")
    p.add_argument("--weights", default="1,1,1")
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--out", help="CSV output file (default: stdout)")
    p.add_argument("--format", choices=("text", "csv"), default="csv")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify-fixture", help="replay the worked example end to end")
    p.set_defaults(func=_cmd_verify_fixture)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
