"""
Experiment metadata: configuration versions and checkpoint consistency
======================================================================

Two training-style workloads exercise the extensible provenance
classes: one maps configuration versions to recorded accuracies, the
other finds which checkpoint can resume a run with a given batch size.
"""

import tempfile
from pathlib import Path

from provio import (
    TrackingConfig,
    WorkloadSpec,
    config_accuracy_map,
    consistent_checkpoints,
    merged_graph,
    run_workload,
)

workdir = Path(tempfile.mkdtemp(prefix="provio_ml_"))

# --- configuration/accuracy mapping across a training loop -----------
spec = WorkloadSpec(kind="topreco", epochs=5, config_fields=3)
report = run_workload(spec, TrackingConfig(output_dir=workdir / "reco"))
rows = config_accuracy_map(merged_graph(report))
print("configuration -> version -> accuracy")
for name, version, accuracy in rows:
    print(f"  {name:<10} {version:<4} {accuracy}")

# --- checkpoint-configuration consistency ----------------------------
spec = WorkloadSpec(kind="megatron", iterations=40, batch_sizes=(128, 256),
                    checkpoints=3)
report = run_workload(spec, TrackingConfig(output_dir=workdir / "megatron"))
graph = merged_graph(report)

for batch_size in (128, 256, 512):
    found = consistent_checkpoints(graph, [("batch_size", batch_size)])
    labels = [graph.nodes[g].label for g in found]
    print(f"checkpoints consistent with batch_size={batch_size}: "
          f"{labels or 'none'}")

# tighten with a quality bound on the stored training loss
best = consistent_checkpoints(graph, [("batch_size", 128)],
                              quality=("ns1:hasValue", "<", 3.0))
print(f"batch_size=128 with loss < 3.0: "
      f"{[graph.nodes[g].label for g in best] or 'none'}")
