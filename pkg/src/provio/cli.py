"""Command-line front end.

Each subcommand is a thin adapter over exactly one library operation:
run tracked workloads, merge sub-graph files, evaluate queries, compute
lineage/statistics, and export DOT renderings.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .dot import RenderSpec, to_dot
from .model import Guid, Predicate, ProvioError
from .query import (
    backward_lineage,
    config_accuracy_map,
    consistent_checkpoints,
    evaluate,
    file_modifiers,
    io_stats,
    parse_query,
)
from .store import load_turtle_file, merge_directory, write_turtle_file
from .tracker import CONFIG_ENV_VAR, TrackingConfig
from .workloads import WorkloadSpec, measure_overhead, run_workload


def _parse_literal(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _format_term(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _load_config(args, out_dir: Path | None) -> TrackingConfig:
    if getattr(args, "config", None):
        cfg = TrackingConfig.from_ini(args.config)
    else:
        cfg = TrackingConfig.from_env(default=TrackingConfig())
    if out_dir is not None:
        cfg = TrackingConfig(cfg.enabled, cfg.track_durations,
                             cfg.flush_every_ms, out_dir)
    return cfg


def _workload_spec(args) -> WorkloadSpec:
    return WorkloadSpec(
        kind=args.workload,
        input_files=args.input_files,
        pattern=args.pattern,
        workers=args.workers,
        ops_per_worker=args.ops_per_worker,
        compute_ms=args.compute_ms,
        epochs=args.epochs,
        config_fields=args.config_fields,
        iterations=args.iterations,
        batch_sizes=tuple(int(b) for b in args.batch_sizes.split(",")),
        checkpoints=args.checkpoints,
        seed=args.seed,
    )


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", required=True,
                   choices=("dassa", "h5bench", "topreco", "megatron"))
    p.add_argument("--input-files", type=int, default=4)
    p.add_argument("--pattern", default="write+read")
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--ops-per-worker", type=int, default=4)
    p.add_argument("--compute-ms", type=int, default=0)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--config-fields", type=int, default=4)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--batch-sizes", default="128,256")
    p.add_argument("--checkpoints", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provio",
        description="I/O provenance capture, merge, query, and rendering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a tracked workload")
    _add_workload_flags(p)
    p.add_argument("--config", help=f"tracking config INI "
                                    f"(default: ${CONFIG_ENV_VAR})")
    p.add_argument("--out", help="sub-graph output directory")
    p.add_argument("--sandbox", help="data sandbox directory "
                                     "(default: <out>/data)")

    p = sub.add_parser("merge", help="merge per-process .ttl files")
    p.add_argument("directory")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("query", help="evaluate a query file")
    p.add_argument("graph")
    p.add_argument("--file", required=True, help="query text (.rq)")
    p.add_argument("--json", action="store_true",
                   help="one JSON object per binding row")

    p = sub.add_parser("lineage", help="backward lineage of a data object")
    p.add_argument("graph")
    p.add_argument("--object", required=True)
    p.add_argument("--levels", type=int, default=1)

    p = sub.add_parser("stats", help="I/O statistics per API sub-class")
    p.add_argument("graph")
    p.add_argument("--durations", action="store_true")

    p = sub.add_parser("modifiers", help="agent chains that touched a file")
    p.add_argument("graph")
    p.add_argument("--file", required=True)

    p = sub.add_parser("configs", help="configuration/version/accuracy table")
    p.add_argument("graph")

    p = sub.add_parser("checkpoints",
                       help="checkpoints consistent with configuration values")
    p.add_argument("graph")
    p.add_argument("--where", action="append", required=True,
                   metavar="NAME=VALUE")
    p.add_argument("--quality", metavar="PROP<OP>BOUND",
                   help="e.g. 'ns1:hasValue<2.5'")

    p = sub.add_parser("export-dot", help="render the graph as DOT")
    p.add_argument("graph")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--highlight-lineage", metavar="OBJECT:LEVELS")
    p.add_argument("--collapse", action="store_true",
                   help="fold repeated activities into counted nodes")

    p = sub.add_parser("bench", help="overhead measurement harness")
    _add_workload_flags(p)
    p.add_argument("--config", help="tracking config INI")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default="bench_out")

    return parser


def _cmd_run(args) -> int:
    out = Path(args.out) if args.out else None
    cfg = _load_config(args, out)
    sandbox = Path(args.sandbox) if args.sandbox else None
    report = run_workload(_workload_spec(args), cfg, sandbox=sandbox)
    print(report.to_text())
    return 0


def _cmd_merge(args) -> int:
    merged = merge_directory(args.directory)
    write_turtle_file(merged, args.output)
    print(f"{args.output}: {len(merged.nodes)} nodes, {len(merged)} triples")
    return 0


def _cmd_query(args) -> int:
    graph = load_turtle_file(args.graph)
    query = parse_query(Path(args.file).read_text(encoding="utf-8"))
    result = evaluate(graph, query)
    if args.json:
        for row in result.rows:
            print(json.dumps({str(v): _format_term(row[v])
                              for v in result.variables}))
    else:
        print("\t".join(str(v) for v in result.variables))
        for row in result.rows:
            print("\t".join(_format_term(row[v]) for v in result.variables))
    return 0


def _cmd_lineage(args) -> int:
    graph = load_turtle_file(args.graph)
    tree = backward_lineage(graph, Guid(args.object), args.levels)
    print(f"root: {tree.root}")
    for idx, steps in enumerate(tree.levels, start=1):
        for step in steps:
            program = graph.nodes[step.via_program].label
            print(f"level {idx}: {step.entity} "
                  f"(via {program}, {step.via_activity})")
    return 0


def _cmd_stats(args) -> int:
    graph = load_turtle_file(args.graph)
    stats = io_stats(graph, with_durations=args.durations)
    header = "class\tcount" + ("\ttotal_elapsed_us" if args.durations else "")
    print(header)
    for sub, (count, total) in stats.items():
        row = f"{sub.value}\t{count}"
        if args.durations:
            row += f"\t{total}"
        print(row)
    return 0


def _cmd_modifiers(args) -> int:
    graph = load_turtle_file(args.graph)
    print("program\tthread\tuser")
    for program, thread, user in file_modifiers(graph, Guid(args.file)):
        print("\t".join(graph.nodes[g].label for g in (program, thread, user)))
    return 0


def _cmd_configs(args) -> int:
    graph = load_turtle_file(args.graph)
    print("configuration\tversion\taccuracy")
    for name, version, accuracy in config_accuracy_map(graph):
        print(f"{name}\t{_format_term(version)}\t{_format_term(accuracy)}")
    return 0


_QUALITY_RE = re.compile(r"^(.+?)(<=|>=|<|>|=)(-?\d+(?:\.\d+)?)$")


def _cmd_checkpoints(args) -> int:
    graph = load_turtle_file(args.graph)
    constraints = []
    for clause in args.where:
        if "=" not in clause:
            raise ProvioError(f"--where expects NAME=VALUE, got {clause!r}")
        name, _, value = clause.partition("=")
        constraints.append((name, _parse_literal(value)))
    quality = None
    if args.quality:
        m = _QUALITY_RE.match(args.quality)
        if m is None:
            raise ProvioError(f"--quality expects PROP<OP>BOUND, "
                              f"got {args.quality!r}")
        quality = (m.group(1), m.group(2), _parse_literal(m.group(3)))
    for guid in consistent_checkpoints(graph, constraints, quality):
        print(graph.nodes[guid].label)
    return 0


def _cmd_export_dot(args) -> int:
    graph = load_turtle_file(args.graph)
    spec = RenderSpec(collapse=args.collapse)
    if args.highlight_lineage:
        obj, _, levels = args.highlight_lineage.rpartition(":")
        if not obj:
            raise ProvioError("--highlight-lineage expects OBJECT:LEVELS")
        tree = backward_lineage(graph, Guid(obj), int(levels))
        spec.highlight_nodes.add(tree.root)
        for steps in tree.levels:
            for step in steps:
                spec.highlight_nodes.update(
                    {step.entity, step.via_program, step.via_activity})
                spec.highlight_edges.add(
                    (step.entity, Predicate.WAS_READ_BY, step.via_activity))
                spec.highlight_edges.add(
                    (step.via_activity, Predicate.WAS_ASSOCIATED_WITH,
                     step.via_program))
                spec.highlight_edges.add(
                    (step.entity, Predicate.WAS_ATTRIBUTED_TO,
                     step.via_program))
    dot = to_dot(graph, spec)
    Path(args.output).write_text(dot, encoding="utf-8")
    print(args.output)
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args, Path(args.out))
    report = measure_overhead(_workload_spec(args), cfg, repetitions=args.reps)
    print(report.to_text())
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "merge": _cmd_merge,
    "query": _cmd_query,
    "lineage": _cmd_lineage,
    "stats": _cmd_stats,
    "modifiers": _cmd_modifiers,
    "configs": _cmd_configs,
    "checkpoints": _cmd_checkpoints,
    "export-dot": _cmd_export_dot,
    "bench": _cmd_bench,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ProvioError, OSError, ValueError) as exc:
        print(f"provio: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
