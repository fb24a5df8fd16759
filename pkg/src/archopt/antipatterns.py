"""Performance antipattern detection on (architecture, performance) pairs.

Three crisp rules with relative thresholds:

* Blob: a component concentrating invocations on a saturated node.
* Concurrent Processing Systems: a saturated node next to an idle one.
* Pipe and Filter: one operation dominating a scenario's demand on a
  saturated node.

The count objective is the number of distinct (kind, element) detections.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Architecture, invocation_matrix
from .perfqn import PerformanceResult

BLOB = "blob"
CONCURRENT_PROCESSING = "concurrent_processing"
PIPE_AND_FILTER = "pipe_and_filter"


@dataclass(frozen=True)
class Thresholds:
    util_high: float = 0.8
    util_low: float = 0.3
    blob_share: float = 2.0  # multiple of the mean per-component invocations
    paf_demand_share: float = 0.5  # fraction of a scenario's total demand

    def __post_init__(self):
        if not 0.0 <= self.util_low < self.util_high <= 1.0:
            raise ValueError(f"need 0 <= util_low < util_high <= 1, got {self.util_low}, {self.util_high}")
        if self.blob_share <= 0.0 or self.paf_demand_share <= 0.0:
            raise ValueError("share thresholds must be > 0")


@dataclass(frozen=True)
class Detection:
    kind: str
    elements: tuple[str, ...]
    scenario: str | None
    metrics: tuple[tuple[str, float], ...]

    def metric(self, name: str) -> float:
        return dict(self.metrics)[name]


def detect(arch: Architecture, perf: PerformanceResult, thresholds: Thresholds | None = None) -> list[Detection]:
    """All distinct (kind, element) detections, in deterministic order."""
    th = thresholds or Thresholds()
    util = {node_id: float(u) for node_id, u in zip(perf.station_ids, perf.utilization)}
    owners = arch.owner_map()
    ops = arch.operation_map()
    node_of = {c.id: arch.deployment[c.id] for c in arch.components}
    detections: list[Detection] = []

    invocations, _ = invocation_matrix(arch)
    mean_invocations = invocations.mean(axis=0)  # per scenario
    for i, comp in enumerate(arch.components):
        if util[node_of[comp.id]] < th.util_high:
            continue
        for j, scen in enumerate(arch.scenarios):
            if invocations[i, j] > th.blob_share * mean_invocations[j]:
                detections.append(
                    Detection(
                        kind=BLOB,
                        elements=(comp.id,),
                        scenario=scen.id,
                        metrics=(
                            ("invocations", float(invocations[i, j])),
                            ("mean_invocations", float(mean_invocations[j])),
                            ("node_utilization", util[node_of[comp.id]]),
                        ),
                    )
                )
                break  # one detection per component

    node_ids = [n.id for n in arch.nodes]
    for a in range(len(node_ids)):
        for b in range(a + 1, len(node_ids)):
            u_a, u_b = util[node_ids[a]], util[node_ids[b]]
            high, low = max(u_a, u_b), min(u_a, u_b)
            if high >= th.util_high and low <= th.util_low:
                detections.append(
                    Detection(
                        kind=CONCURRENT_PROCESSING,
                        elements=(node_ids[a], node_ids[b]),
                        scenario=None,
                        metrics=(("utilization_high", high), ("utilization_low", low)),
                    )
                )

    flagged_ops: set[str] = set()
    for comp in arch.components:
        for op in comp.operations:
            if op.id in flagged_ops or util[node_of[comp.id]] < th.util_high:
                continue
            for j, scen in enumerate(arch.scenarios):
                total = sum(step.count * ops[step.operation].cpu_demand for step in scen.steps)
                if total <= 0.0:
                    continue
                own = sum(step.count * op.cpu_demand for step in scen.steps if step.operation == op.id)
                share = own / total
                if share >= th.paf_demand_share:
                    flagged_ops.add(op.id)
                    detections.append(
                        Detection(
                            kind=PIPE_AND_FILTER,
                            elements=(op.id,),
                            scenario=scen.id,
                            metrics=(
                                ("demand_share", share),
                                ("node_utilization", util[node_of[comp.id]]),
                            ),
                        )
                    )
                    break

    return detections


def pas_count(arch: Architecture, perf: PerformanceResult, thresholds: Thresholds | None = None) -> int:
    return len(detect(arch, perf, thresholds))
