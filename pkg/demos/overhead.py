"""
Tracking overhead measurement
=============================

Interleaves baseline (uninstrumented) and tracked runs of the parallel
benchmark and reports the wall-time ratio plus provenance volume, with
full tracking and with every class disabled.
"""

import tempfile
from pathlib import Path

from provio import TrackingConfig, WorkloadSpec, measure_overhead

workdir = Path(tempfile.mkdtemp(prefix="provio_bench_"))

spec = WorkloadSpec(kind="h5bench", pattern="write+read", workers=8,
                    ops_per_worker=4, compute_ms=50)

full = measure_overhead(
    spec, TrackingConfig(track_durations=True, output_dir=workdir / "full"),
    repetitions=5)
print("full tracking:")
print(full.to_text())

disabled = measure_overhead(
    spec, TrackingConfig(enabled=frozenset(), output_dir=workdir / "off"),
    repetitions=5)
print("\nall classes disabled:")
print(disabled.to_text())
