"""I/O-centric provenance capture, storage, query, and visualization.

Instrumented file and container operations emit typed provenance triples
into per-process graphs, serialized as Turtle, merged without
duplication, queried with conjunctive triple patterns, and rendered as
lineage graphs.
"""

from .container import Container, ContainerError
from .dot import RenderSpec, to_dot
from .facade import ContainerObjectHandle, FacadeError, FileHandle, IoFacade
from .model import (
    ConflictError,
    ConstraintError,
    Guid,
    Predicate,
    ProvNode,
    ProvioError,
    SubClass,
    SuperClass,
    Triple,
    make_node,
    mint_guid,
    relation_for_io,
    super_of,
)
from .query import (
    BindingSet,
    LineageStep,
    LineageTree,
    Query,
    QueryError,
    TriplePattern,
    UnsupportedFeatureError,
    Var,
    backward_lineage,
    config_accuracy_map,
    consistent_checkpoints,
    evaluate,
    file_modifiers,
    io_stats,
    parse_query,
)
from .store import (
    ParseError,
    ProvGraph,
    load_turtle_file,
    merge,
    merge_directory,
    parse_turtle,
    serialize_turtle,
    write_turtle_file,
)
from .tracker import (
    CONFIG_ENV_VAR,
    UNTRACKED,
    AgentContext,
    IoEvent,
    Session,
    SessionError,
    TrackingConfig,
    begin_session,
    end_session,
)
from .workloads import (
    OverheadReport,
    RunReport,
    WorkloadSpec,
    measure_overhead,
    merged_graph,
    run_workload,
)

__version__ = "0.1.0"

__all__ = [
    "AgentContext", "BindingSet", "CONFIG_ENV_VAR", "ConflictError",
    "ConstraintError", "Container", "ContainerError",
    "ContainerObjectHandle", "FacadeError", "FileHandle", "Guid", "IoEvent",
    "IoFacade", "LineageStep", "LineageTree", "OverheadReport", "ParseError",
    "Predicate", "ProvGraph", "ProvNode", "ProvioError", "Query",
    "QueryError", "RenderSpec", "RunReport", "Session", "SessionError",
    "SubClass", "SuperClass", "TrackingConfig", "Triple", "TriplePattern",
    "UNTRACKED", "UnsupportedFeatureError", "Var", "WorkloadSpec",
    "backward_lineage", "begin_session", "config_accuracy_map",
    "consistent_checkpoints", "end_session", "evaluate", "file_modifiers",
    "io_stats", "load_turtle_file", "make_node", "measure_overhead", "merge",
    "merge_directory", "merged_graph", "mint_guid", "parse_query",
    "parse_turtle", "relation_for_io", "run_workload", "serialize_turtle",
    "super_of", "to_dot", "write_turtle_file",
]
