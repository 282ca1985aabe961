from __future__ import annotations

import sys
import threading
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from provio.facade import IoFacade
from provio.model import Guid, Predicate, SubClass, Triple, make_node
from provio.store import ProvGraph
from provio.tracker import AgentContext, Session, TrackingConfig, begin_session


class FakeClock:
    """Deterministic microsecond clock: every call advances a fixed step."""

    def __init__(self, step_us: int = 1000, start_us: int = 0):
        self.step_us = step_us
        self.now_us = start_us
        self._lock = threading.Lock()

    def __call__(self) -> int:
        with self._lock:
            current = self.now_us
            self.now_us += self.step_us
            return current


@pytest.fixture
def fake_clock() -> FakeClock:
    return FakeClock()


def make_session(tmp_path: Path, *, user: str = "Bob",
                 program: str = "vpicio_un_h5.exe", rank: int = 0,
                 cfg: TrackingConfig | None = None,
                 clock=None) -> Session:
    ctx = AgentContext(user, program, rank=rank)
    if cfg is None:
        cfg = TrackingConfig(output_dir=tmp_path / "prov")
    if clock is None:
        return begin_session(ctx, cfg)
    return begin_session(ctx, cfg, clock=clock)


@pytest.fixture
def session(tmp_path) -> Session:
    s = make_session(tmp_path)
    yield s
    if not s.ended:
        s.end()


def fig_snippet_graph() -> ProvGraph:
    """Hand-built five-record snippet: user, rank, program, create
    activity, dataset, with the four chain/creation relation edges."""
    g = ProvGraph()
    user = make_node(SubClass.USER, "Bob")
    rank = make_node(SubClass.RANK, "MPI_rank_0")
    program = make_node(SubClass.PROGRAM, "vpicio_un_h5.exe")
    activity = make_node(SubClass.CREATE, "H5Dcreate2", rank=0, seq=1)
    dataset = make_node(SubClass.DATASET, "/Timestep_0/x")
    for n in (user, rank, program, activity, dataset):
        g.add_node(n)
    g.add_triple(Triple(program.guid, Predicate.ACTED_ON_BEHALF_OF, rank.guid))
    g.add_triple(Triple(rank.guid, Predicate.ACTED_ON_BEHALF_OF, user.guid))
    g.add_triple(Triple(activity.guid, Predicate.WAS_ASSOCIATED_WITH,
                        program.guid))
    g.add_triple(Triple(dataset.guid, Predicate.WAS_CREATED_BY, activity.guid))
    return g


def fig_checkpoint_graph() -> ProvGraph:
    """Two batch-size configurations (128 and 256) and three checkpoints;
    the 256 configuration influenced only the last checkpoint."""
    g = ProvGraph()
    a = make_node(SubClass.CONFIGURATION, "Batch_Size_A")
    b = make_node(SubClass.CONFIGURATION, "Batch_Size_B")
    ckpts = [make_node(SubClass.CHECKPOINT, f"Checkpoint_{i}")
             for i in (1, 2, 3)]
    for n in (a, b, *ckpts):
        g.add_node(n)
    g.add_triple(Triple(a.guid, Predicate.HAS_VALUE, 128))
    g.add_triple(Triple(b.guid, Predicate.HAS_VALUE, 256))
    g.add_triple(Triple(a.guid, Predicate.INFLUENCED, ckpts[0].guid))
    g.add_triple(Triple(a.guid, Predicate.INFLUENCED, ckpts[1].guid))
    g.add_triple(Triple(b.guid, Predicate.INFLUENCED, ckpts[2].guid))
    # checkpoint quality: training loss at save time, decreasing
    for ckpt, loss in zip(ckpts, (5.0, 3.5, 2.0)):
        g.add_triple(Triple(ckpt.guid, Predicate.HAS_VALUE, loss))
    return g


@pytest.fixture
def fig_graph() -> ProvGraph:
    return fig_snippet_graph()


@pytest.fixture
def checkpoint_graph() -> ProvGraph:
    return fig_checkpoint_graph()


def touch_all_classes(sandbox: Path, session: Session | None) -> dict[SubClass, int]:
    """Mini workload touching every Entity and Activity sub-class once
    or more; returns the independently counted issued events."""
    counts: dict[SubClass, int] = {}

    def bump(sub: SubClass, n: int = 1) -> None:
        counts[sub] = counts.get(sub, 0) + n

    fac = IoFacade(sandbox, session)
    fac.mkdir("work")
    bump(SubClass.CREATE)
    h = fac.open("work/plain.dat", create=True, mode="rw")
    bump(SubClass.CREATE)
    fac.write(h, b"payload")
    bump(SubClass.WRITE)
    fac.fsync(h)
    bump(SubClass.FSYNC)
    fac.close(h)
    h = fac.open("work/plain.dat", mode="r")
    bump(SubClass.OPEN)
    fac.read(h)
    bump(SubClass.READ)
    fac.close(h)
    fac.rename("work/plain.dat", "work/renamed.dat")
    bump(SubClass.RENAME)

    c = fac.create_container("work/store.h5")
    with c:
        fac.container_create(c, SubClass.GROUP, "/g")
        bump(SubClass.CREATE)
        ds = fac.container_create(c, SubClass.DATASET, "/g/d")
        bump(SubClass.CREATE)
        fac.container_write(ds, b"version-1")
        bump(SubClass.WRITE)
        fac.container_read(ds)
        bump(SubClass.READ)
        fac.container_create(c, SubClass.ATTRIBUTE, "/g/d/a", payload=b"meta")
        bump(SubClass.CREATE)
        fac.container_create(c, SubClass.DATATYPE, "/g/t")
        bump(SubClass.CREATE)
        fac.container_create(c, SubClass.LINK, "/g/l", payload=b"/g/d")
        bump(SubClass.CREATE)
        fac.container_open(c, SubClass.ATTRIBUTE, "/g/d/a")
        bump(SubClass.OPEN)
        fac.container_flush(c)
        bump(SubClass.FSYNC)
    return counts


def run_fig_minimal(base: Path) -> Path:
    """Minimal tracked workload mirroring the five-record snippet: user
    Bob, program vpicio_un_h5.exe, rank 0, one dataset created in a
    container.  The container and parent group are prepared through the
    raw (session-free) layer so exactly one tracked event occurs.
    Returns the sub-graph output directory."""
    cfg = TrackingConfig(output_dir=base / "prov")
    sandbox = base / "data"
    setup = IoFacade(sandbox)
    c = setup.create_container("vpic.h5")
    c.create_object(SubClass.GROUP, "/Timestep_0")
    session = begin_session(AgentContext("Bob", "vpicio_un_h5.exe", rank=0),
                            cfg)
    fac = IoFacade(sandbox, session)
    fac.container_create(c, SubClass.DATASET, "/Timestep_0/x",
                         payload=b"particle coordinates")
    c.close()
    session.end()
    return cfg.output_dir


# ---------------------------------------------------------------- report

_ACCEPTANCE_RESULTS: dict[str, bool] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE_RESULTS[name] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if _ACCEPTANCE_RESULTS[name] else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
