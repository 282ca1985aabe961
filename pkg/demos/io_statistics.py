"""
I/O statistics from a parallel benchmark run
============================================

Concurrent workers hammer one shared container under three I/O
patterns; the merged provenance answers "how many calls of each kind,
and how much time did each kind cost".
"""

import tempfile
from pathlib import Path

from provio import (
    TrackingConfig,
    WorkloadSpec,
    io_stats,
    merged_graph,
    run_workload,
)

workdir = Path(tempfile.mkdtemp(prefix="provio_stats_"))

for pattern in ("write+read", "write+overwrite+read", "write+append+read"):
    spec = WorkloadSpec(kind="h5bench", pattern=pattern, workers=8,
                        ops_per_worker=16)
    cfg = TrackingConfig(track_durations=True,
                         output_dir=workdir / pattern.replace("+", "_"))
    report = run_workload(spec, cfg)

    stats = io_stats(merged_graph(report), with_durations=True)
    print(f"pattern {pattern}:")
    for sub, (count, total_us) in stats.items():
        print(f"  {sub.value:<8} count={count:<6} elapsed={total_us} us")
    print(f"  provenance: {report.triple_count} triples, "
          f"{report.provenance_bytes} bytes\n")
