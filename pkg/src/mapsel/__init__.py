"""Schema-mapping selection over data examples.

Chase candidate st tgds over a source instance, score every selection of
candidates with an exact-rational explains/error/size objective, and search
for the minimizing subset.  Includes a schema-evolution scenario generator
and an executable SET COVER reduction used as a correctness oracle.
"""

from .chase import ChaseResult, chase_mapping, chase_tgd, satisfies
from .errors import DomainError, ParseError
from .objective import (
    DEFAULT_WEIGHTS,
    EvalContext,
    ObjectiveBreakdown,
    Weights,
    prune_certain,
)
from .relational import (
    Const,
    Fact,
    Instance,
    Null,
    NullAllocator,
    RelationSig,
    Schema,
    extend_into_instance,
    fact,
    maps_into,
    parse_instance,
    parse_schema,
    serialize_instance,
    tuple_homomorphism,
)
from .scenarios import (
    Scenario,
    ScenarioConfig,
    classify_tuples,
    generate_scenario,
    read_scenario,
    write_scenario,
)
from .setcover import (
    SetCoverInstance,
    brute_force_set_cover,
    closed_form_objective,
    decide_cover_via_selection,
    reduce_to_selection,
    reduce_weighted,
)
from .solvers import (
    SolverReport,
    decide,
    select_exhaustive,
    select_greedy,
    select_local_search,
)
from .tgds import (
    CandidateSet,
    Selection,
    StTgd,
    canonical_form,
    parse_tgd,
    parse_tgd_file,
    selection_size,
    serialize_tgd,
    tgd_size,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
