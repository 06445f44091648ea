"""A small worked data example: projects, tasks, and orgs.

Two candidate rules compete to explain the target: a plain copy of
projects into tasks, and a join with the financing relation that also
emits org facts.  The target is deliberately small, so on the base data
the empty selection wins; adding a handful of extra project rows flips
the optimum to the joining rule.
"""

from __future__ import annotations

from .objective import EvalContext
from .relational import parse_instance, parse_schema
from .tgds import CandidateSet, parse_tgd_file

COPY_ID = "copy_tasks"
JOIN_ID = "join_orgs"

SCHEMA_TEXT = """\
[source]
proj(pname, lead, fund)
fin(fund, comp)
[target]
task(tname, lead, emp)
org(emp, comp)
"""

SOURCE_TEXT = """\
proj('BigData', 'Bob', 2).
proj('ML', 'Alice', 1).
fin(1, 'SAP').
fin(2, 'IBM').
"""

# Two of the four target facts are reachable from the source; the other two
# keep the data example honest about mass no candidate can explain.
TARGET_TEXT = """\
task('ML', 'Alice', 111).
org(111, 'SAP').
task('Cloud', 'Carol', 222).
org(333, 'HP').
"""

TGDS_TEXT = f"""\
{COPY_ID}: proj(P, L, F) -> task(P, L, E)
{JOIN_ID}: proj(P, L, F) & fin(F, C) -> task(P, L, E) & org(E, C)
"""

# The rules' real definitions carry more atoms than the compact forms above,
# so their sizes are pinned explicitly.
SIZE_OVERRIDES = {COPY_ID: 3, JOIN_ID: 4}


def project_example() -> EvalContext:
    """The base data example (empty selection optimal)."""
    return _build(extra_projects=0)


def project_example_extended(extra_projects: int = 5) -> EvalContext:
    """The same example with extra project rows (joining rule optimal)."""
    return _build(extra_projects=extra_projects)


def _build(extra_projects: int) -> EvalContext:
    source_schema, target_schema = parse_schema(SCHEMA_TEXT)
    source_text = SOURCE_TEXT
    target_text = TARGET_TEXT
    for i in range(1, extra_projects + 1):
        source_text += f"proj('X{i}', 'Alice', 1).\n"
        target_text += f"task('X{i}', 'Alice', 111).\n"
    source = parse_instance(source_text, source_schema)
    target = parse_instance(target_text, target_schema)
    tgds = parse_tgd_file(TGDS_TEXT, source_schema, target_schema)
    candidates = CandidateSet(tuple(tgds), SIZE_OVERRIDES)
    return EvalContext(candidates, source, target)
