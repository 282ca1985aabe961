"""Synthetic workflows reproducing four workload shapes at desk scale,
plus the overhead/storage measurement harness.

Ranks are modeled as concurrent worker threads, each owning its own
tracker session and sub-graph file; the shared container is the only
cross-worker resource.  With a fixed seed and an injected clock, a
workload produces an identical merged triple set on every run.
"""

from __future__ import annotations

import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

from .facade import IoFacade
from .model import ConstraintError, Predicate, SubClass
from .store import ProvGraph, merge_directory
from .tracker import (
    UNTRACKED,
    AgentContext,
    Session,
    TrackingConfig,
    begin_session,
)

H5BENCH_PATTERNS = ("write+read", "write+overwrite+read", "write+append+read")
WORKLOAD_KINDS = ("dassa", "h5bench", "topreco", "megatron")

ClockFactory = Callable[[int], Callable[[], int]]


@dataclass
class WorkloadSpec:
    kind: str
    # dassa
    input_files: int = 4
    # h5bench
    pattern: str = "write+read"
    workers: int = 2
    ops_per_worker: int = 4
    compute_ms: int = 0
    # topreco
    epochs: int = 8
    config_fields: int = 4
    # megatron
    iterations: int = 10
    batch_sizes: tuple[int, ...] = (128, 256)
    checkpoints: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in WORKLOAD_KINDS:
            raise ConstraintError(f"unknown workload kind {self.kind!r}")
        positive = {
            "input_files": self.input_files, "workers": self.workers,
            "ops_per_worker": self.ops_per_worker, "epochs": self.epochs,
            "config_fields": self.config_fields,
            "iterations": self.iterations, "checkpoints": self.checkpoints,
        }
        for name, value in positive.items():
            if value < 1:
                raise ConstraintError(f"{name} must be >= 1, got {value}")
        if self.compute_ms < 0:
            raise ConstraintError("compute_ms must be >= 0")
        if self.pattern not in H5BENCH_PATTERNS:
            raise ConstraintError(f"unknown I/O pattern {self.pattern!r}")
        if not self.batch_sizes:
            raise ConstraintError("batch_sizes must be non-empty")


@dataclass
class RunReport:
    kind: str
    wall_time_tracked_ms: float
    wall_time_baseline_ms: float | None
    triple_count: int
    provenance_bytes: int
    event_counts: dict[SubClass, int] = field(default_factory=dict)
    output_dir: Path | None = None

    def to_text(self) -> str:
        lines = [
            f"workload:          {self.kind}",
            f"tracked wall time: {self.wall_time_tracked_ms:.1f} ms",
        ]
        if self.wall_time_baseline_ms is not None:
            lines.append(
                f"baseline wall time: {self.wall_time_baseline_ms:.1f} ms")
        lines.append(f"triples:           {self.triple_count}")
        lines.append(f"provenance bytes:  {self.provenance_bytes}")
        for sub, count in sorted(self.event_counts.items(),
                                 key=lambda kv: kv[0].value):
            lines.append(f"events[{sub.value}]: {count}")
        return "\n".join(lines)

    @staticmethod
    def tsv_header() -> str:
        return "\t".join(["kind", "tracked_ms", "baseline_ms", "triples",
                          "bytes"] + [s.value for s in _ACTIVITY_ORDER])

    def to_tsv_row(self) -> str:
        baseline = ("" if self.wall_time_baseline_ms is None
                    else f"{self.wall_time_baseline_ms:.3f}")
        cells = [self.kind, f"{self.wall_time_tracked_ms:.3f}", baseline,
                 str(self.triple_count), str(self.provenance_bytes)]
        cells += [str(self.event_counts.get(s, 0)) for s in _ACTIVITY_ORDER]
        return "\t".join(cells)


_ACTIVITY_ORDER = (SubClass.CREATE, SubClass.OPEN, SubClass.READ,
                   SubClass.WRITE, SubClass.FSYNC, SubClass.RENAME)


class _EventLog:
    """Independent issued-operation counter kept by the workload itself
    (the oracle side of event-conservation checks)."""

    def __init__(self) -> None:
        self.counts: dict[SubClass, int] = {}
        self._lock = threading.Lock()

    def bump(self, sub: SubClass, n: int = 1) -> None:
        with self._lock:
            self.counts[sub] = self.counts.get(sub, 0) + n


def _begin(ctx: AgentContext, cfg: TrackingConfig, tracked: bool,
           clock_factory: ClockFactory | None, worker: int) -> Session | None:
    if not tracked:
        return None
    if clock_factory is not None:
        return begin_session(ctx, cfg, clock=clock_factory(worker))
    return begin_session(ctx, cfg)


def _compute(spec: WorkloadSpec) -> None:
    if spec.compute_ms:
        time.sleep(spec.compute_ms / 1000.0)


# ------------------------------------------------------------- runners

def _run_dassa(spec: WorkloadSpec, cfg: TrackingConfig, sandbox: Path,
               tracked: bool, clock_factory: ClockFactory | None,
               log: _EventLog) -> None:
    """Fixed two-stage conversion/analysis pipeline: raw ``.tdms`` inputs
    become per-file containers (1 group, 2 datasets, 4 attributes per
    dataset), then a decimation stage reads each container file and
    writes one output per input."""
    names = ["WestSac" if i == 0 else f"WestSac_{i}"
             for i in range(spec.input_files)]
    for name in names:  # input fixtures exist before the workflow runs
        (sandbox / f"{name}.tdms").write_bytes(
            f"tdms-sensor-data:{name}:{spec.seed}".encode())

    convert = _begin(AgentContext("alice", "tdms2h5", rank=0), cfg, tracked,
                     clock_factory, 0)
    fac = IoFacade(sandbox, convert)
    try:
        for name in names:
            h = fac.open(f"{name}.tdms", mode="r")
            log.bump(SubClass.OPEN)
            raw = fac.read(h)
            log.bump(SubClass.READ)
            fac.close(h)
            c = fac.create_container(f"{name}.h5")
            with c:
                group = fac.container_create(c, SubClass.GROUP, f"/{name}")
                log.bump(SubClass.CREATE)
                for d in range(2):
                    ds = fac.container_create(
                        c, SubClass.DATASET, f"/{name}/d{d}")
                    log.bump(SubClass.CREATE)
                    fac.container_write(ds, raw[d::2])
                    log.bump(SubClass.WRITE)
                    for a in range(4):
                        fac.container_create(
                            c, SubClass.ATTRIBUTE, f"/{name}/d{d}/a{a}",
                            payload=b"meta")
                        log.bump(SubClass.CREATE)
                fac.container_close_object(group)
                fac.container_flush(c)
                log.bump(SubClass.FSYNC)
            _compute(spec)
    finally:
        if convert is not None:
            convert.end()

    decimate = _begin(AgentContext("alice", "decimate", rank=0), cfg, tracked,
                      clock_factory, 1)
    fac = IoFacade(sandbox, decimate)
    try:
        for i, name in enumerate(names):
            h = fac.open(f"{name}.h5", mode="r")
            log.bump(SubClass.OPEN)
            data = fac.read(h)
            log.bump(SubClass.READ)
            fac.close(h)
            out_name = "decimate.h5" if i == 0 else f"decimate_{i}.h5"
            out = fac.open(out_name, create=True, mode="w")
            log.bump(SubClass.CREATE)
            fac.write(out, data[::4])
            log.bump(SubClass.WRITE)
            fac.fsync(out)
            log.bump(SubClass.FSYNC)
            fac.close(out)
            _compute(spec)
    finally:
        if decimate is not None:
            decimate.end()


def _run_h5bench(spec: WorkloadSpec, cfg: TrackingConfig, sandbox: Path,
                 tracked: bool, clock_factory: ClockFactory | None,
                 log: _EventLog) -> None:
    """W concurrent workers exercising one shared container under the
    selected write/overwrite/append/read pattern."""
    container_name = "h5bench_data.h5"
    shared = IoFacade(sandbox).create_container(container_name)
    errors: list[BaseException] = []

    def worker(w: int) -> None:
        try:
            session = _begin(AgentContext("bench_user", "h5bench", rank=w),
                             cfg, tracked, clock_factory, w)
            fac = IoFacade(sandbox, session)
            try:
                fac.container_create(shared, SubClass.GROUP, f"/rank_{w}")
                log.bump(SubClass.CREATE)
                ds = fac.container_create(shared, SubClass.DATASET,
                                          f"/rank_{w}/data")
                log.bump(SubClass.CREATE)
                for op in range(spec.ops_per_worker):
                    fac.container_write(ds, f"w{w}:v{op}".encode() * 8)
                    log.bump(SubClass.WRITE)
                    _compute(spec)
                if spec.pattern == "write+overwrite+read":
                    for op in range(spec.ops_per_worker):
                        fac.container_write(ds, f"w{w}:o{op}".encode() * 8)
                        log.bump(SubClass.WRITE)
                        _compute(spec)
                elif spec.pattern == "write+append+read":
                    for op in range(spec.ops_per_worker):
                        fac.container_write(ds, f"+a{op}".encode(),
                                            append=True)
                        log.bump(SubClass.WRITE)
                        _compute(spec)
                for _ in range(spec.ops_per_worker):
                    fac.container_read(ds)
                    log.bump(SubClass.READ)
                    _compute(spec)
                fac.container_close_object(ds)
            finally:
                if session is not None:
                    session.end()
        except BaseException as exc:  # surfaced after join
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(w,), name=f"bench-{w}")
               for w in range(spec.workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    shared.close()
    if errors:
        raise errors[0]


def _accuracy(epoch: int, epochs: int) -> float:
    # strictly increasing, collision-free across epochs
    return round(0.5 + 0.45 * (epoch + 1) / epochs, 9)


def _loss(iteration: int, iterations: int) -> float:
    # strictly decreasing, collision-free across iterations
    return round(6.0 - 5.0 * (iteration + 1) / iterations, 9)


def _run_topreco(spec: WorkloadSpec, cfg: TrackingConfig, sandbox: Path,
                 tracked: bool, clock_factory: ClockFactory | None,
                 log: _EventLog) -> None:
    """Single-process training loop recording configuration fields once
    and an accuracy reading per epoch (a property of each configuration
    node, plus one metrics node per epoch)."""
    session = _begin(AgentContext("reco_user", "top_reco", rank=0), cfg,
                     tracked, clock_factory, 0)
    fac = IoFacade(sandbox, session)
    try:
        if session is not None:
            session.record_extensible(SubClass.TYPE, "Machine_Learning")
            for j in range(spec.config_fields):
                session.record_extensible(
                    SubClass.CONFIGURATION, f"config_{j}",
                    {"ns1:Version": "v1", "ns1:hasValue": j})
        out = fac.open("scores.out", create=True, mode="w")
        log.bump(SubClass.CREATE)
        for epoch in range(spec.epochs):
            _compute(spec)
            acc = _accuracy(epoch, spec.epochs)
            if session is not None:
                for j in range(spec.config_fields):
                    session.record_extensible(
                        SubClass.CONFIGURATION, f"config_{j}",
                        {"provio:hasAccuracy": acc})
                session.record_extensible(
                    SubClass.METRICS, f"accuracy@epoch{epoch}",
                    {"provio:hasAccuracy": acc})
            fac.write(out, f"epoch {epoch}: {acc}\n".encode())
            log.bump(SubClass.WRITE)
        fac.close(out)
    finally:
        if session is not None:
            session.end()


def _run_megatron(spec: WorkloadSpec, cfg: TrackingConfig, sandbox: Path,
                  tracked: bool, clock_factory: ClockFactory | None,
                  log: _EventLog) -> None:
    """Pretraining loop: configurations recorded up front, one loss
    metric per iteration, checkpoints linked to their configurations at
    the end of the run."""
    (sandbox / "corpus.json").write_bytes(b'{"text": "training corpus"}')
    session = _begin(AgentContext("ml_user", "megatron_lm", rank=0), cfg,
                     tracked, clock_factory, 0)
    fac = IoFacade(sandbox, session)
    config_names: list[str] = []
    try:
        if session is not None:
            session.record_extensible(SubClass.TYPE, "Machine_Learning")
            for idx, bs in enumerate(spec.batch_sizes):
                letter = chr(ord("A") + idx)
                name = f"Batch_Size_{letter}"
                config_names.append(name)
                session.record_extensible(
                    SubClass.CONFIGURATION, name,
                    {"ns1:Version": "v1", "ns1:hasValue": bs})
        # preprocessing: corpus -> .bin/.idx
        h = fac.open("corpus.json", mode="r")
        log.bump(SubClass.OPEN)
        corpus = fac.read(h)
        log.bump(SubClass.READ)
        fac.close(h)
        for suffix in ("bin", "idx"):
            out = fac.open(f"corpus.{suffix}", create=True, mode="w")
            log.bump(SubClass.CREATE)
            fac.write(out, corpus[::2])
            log.bump(SubClass.WRITE)
            fac.close(out)
        for iteration in range(spec.iterations):
            _compute(spec)
            if session is not None:
                session.record_extensible(
                    SubClass.METRICS, f"loss@iter{iteration}",
                    {"ns1:hasValue": _loss(iteration, spec.iterations)})
        if session is not None:
            n = spec.checkpoints
            sizes = len(spec.batch_sizes)
            for k in range(1, n + 1):
                config_idx = min((k - 1) * sizes // n, sizes - 1)
                at_iter = max(0, k * spec.iterations // n - 1)
                ckpt = session.record_extensible(
                    SubClass.CHECKPOINT, f"Checkpoint_{k}",
                    {"ns1:hasValue": _loss(at_iter, spec.iterations)})
                if ckpt != UNTRACKED and config_names:
                    session.record_extensible(
                        SubClass.CONFIGURATION, config_names[config_idx],
                        links=[(Predicate.INFLUENCED, ckpt)])
    finally:
        if session is not None:
            session.end()


_RUNNERS = {
    "dassa": _run_dassa,
    "h5bench": _run_h5bench,
    "topreco": _run_topreco,
    "megatron": _run_megatron,
}


# ------------------------------------------------------------- harness

def run_workload(spec: WorkloadSpec, cfg: TrackingConfig, *,
                 tracked: bool = True,
                 clock_factory: ClockFactory | None = None,
                 sandbox: Path | None = None) -> RunReport:
    """Execute one workload through the facade/tracker, then parse and
    merge the per-process sub-graph files into the run report."""
    spec.validate()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if sandbox is None:
        sandbox = cfg.output_dir / "data"
    sandbox.mkdir(parents=True, exist_ok=True)
    log = _EventLog()
    started = time.perf_counter()
    _RUNNERS[spec.kind](spec, cfg, sandbox, tracked, clock_factory, log)
    wall_ms = (time.perf_counter() - started) * 1000.0
    triple_count = 0
    prov_bytes = 0
    if tracked:
        merged = merge_directory(cfg.output_dir)
        triple_count = len(merged)
        prov_bytes = sum(p.stat().st_size
                         for p in cfg.output_dir.glob("*.ttl"))
    return RunReport(spec.kind, wall_ms, None, triple_count, prov_bytes,
                     dict(log.counts), cfg.output_dir)


def merged_graph(report: RunReport) -> ProvGraph:
    if report.output_dir is None:
        raise ConstraintError("report carries no output directory")
    return merge_directory(report.output_dir)


@dataclass
class OverheadReport:
    kind: str
    repetitions: int
    mean_baseline_ms: float
    mean_tracked_ms: float
    ratio: float
    provenance_bytes: int

    def to_text(self) -> str:
        return "\n".join([
            f"workload:         {self.kind}",
            f"repetitions:      {self.repetitions}",
            f"baseline mean:    {self.mean_baseline_ms:.1f} ms",
            f"tracked mean:     {self.mean_tracked_ms:.1f} ms",
            f"tracked/baseline: {self.ratio:.4f}",
            f"provenance bytes: {self.provenance_bytes}",
        ])


def measure_overhead(spec: WorkloadSpec, cfg: TrackingConfig,
                     repetitions: int = 5) -> OverheadReport:
    """Interleave baseline (no tracking wired at all) and tracked runs;
    report the ratio of mean wall times and the provenance volume."""
    if repetitions < 3:
        raise ConstraintError("repetitions must be >= 3")
    base_dir = cfg.output_dir
    baseline_ms: list[float] = []
    tracked_ms: list[float] = []
    prov_bytes = 0
    for rep in range(repetitions):
        b_cfg = TrackingConfig(cfg.enabled, cfg.track_durations,
                               cfg.flush_every_ms,
                               base_dir / f"baseline_{rep}")
        report = run_workload(spec, b_cfg, tracked=False)
        baseline_ms.append(report.wall_time_tracked_ms)
        t_cfg = TrackingConfig(cfg.enabled, cfg.track_durations,
                               cfg.flush_every_ms, base_dir / f"tracked_{rep}")
        report = run_workload(spec, t_cfg)
        tracked_ms.append(report.wall_time_tracked_ms)
        prov_bytes = report.provenance_bytes
    mean_b = sum(baseline_ms) / len(baseline_ms)
    mean_t = sum(tracked_ms) / len(tracked_ms)
    return OverheadReport(spec.kind, repetitions, mean_b, mean_t,
                          mean_t / mean_b if mean_b > 0 else float("inf"),
                          prov_bytes)
