"""Plugin-driven scheduling core: queue, Filter -> PostFilter -> Score
pipeline, weighted score combination, deterministic node selection.

Plugins are stateless objects exposing any of `filter(pod, node, snapshot)`
(a reason string excludes the node), `score(pod, node, snapshot)` (a value
in [0, 1]) and `post_filter(pod, snapshot)` (a preemption plan).  A CPU-fit
filter (allocated + request <= capacity) is always active.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .cluster import ClusterSnapshot, ClusterState, PodInstance, PodStatus

TIE_LEXICOGRAPHIC = "lexicographic"
TIE_SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class Assigned:
    node: str


@dataclass(frozen=True)
class Unschedulable:
    reason: str


@dataclass(frozen=True)
class Preempted:
    node: str
    victims: tuple[str, ...]


ScheduleOutcome = Union[Assigned, Unschedulable, Preempted]


class BaselinePlugin:
    """Resource-balancing score mirroring a stock scheduler: disfavour nodes
    with more allocated CPU and more pods than their peers."""

    name = "baseline"

    def __init__(self, cpu_weight: float = 0.5, count_weight: float = 0.5):
        self.cpu_weight = cpu_weight
        self.count_weight = count_weight

    def score(self, pod: PodInstance, node_id: str, snapshot: ClusterSnapshot) -> float:
        node = snapshot.nodes[node_id]
        cpu_after = (snapshot.allocated_m[node_id] + pod.cpu_request) / node.cpu_capacity
        counts = snapshot.pod_counts()
        max_count = max(counts.values())
        count_frac = counts[node_id] / max_count if max_count > 0 else 0.0
        score = (self.cpu_weight * (1.0 - cpu_after)
                 + self.count_weight * (1.0 - count_frac))
        return min(max(score, 0.0), 1.0)


class LocationAffinityPlugin:
    """Favour a location-scoped pod's own node; neutral for unscoped pods."""

    name = "location-affinity"

    def score(self, pod: PodInstance, node_id: str, snapshot: ClusterSnapshot) -> float:
        if pod.location_scope is None:
            return 1.0
        return 1.0 if node_id == pod.location_scope else 0.0


def build_plugin(name: str):
    if name == "baseline":
        return BaselinePlugin()
    if name == "location-affinity":
        return LocationAffinityPlugin()
    if name == "realtime":
        from .realtime import RealtimePlugin
        return RealtimePlugin()
    if name == "dependencies":
        from .dependencies import DependenciesPlugin
        return DependenciesPlugin()
    raise ValueError(f"unknown plugin: {name}")


@dataclass
class SchedulerConfig:
    """Ordered plugin list with weights, plus the tie-break rule.

    Tie-breaking is lexicographic by node id by default; `seeded-random`
    picks uniformly among the top-scoring nodes using the run's RNG, which
    mirrors how stock schedulers choose among equal candidates.
    """

    plugins: tuple[tuple[str, float], ...] = (("baseline", 1.0),)
    tie_break: str = TIE_LEXICOGRAPHIC
    _instances: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        names = [name for name, _ in self.plugins]
        if len(set(names)) != len(names):
            raise ValueError("plugin names must be unique")
        if any(w <= 0 for _, w in self.plugins):
            raise ValueError("plugin weights must be positive")
        if self.tie_break not in (TIE_LEXICOGRAPHIC, TIE_SEEDED_RANDOM):
            raise ValueError(f"unknown tie-break rule: {self.tie_break}")

    def instances(self) -> list[tuple[object, float]]:
        if self._instances is None:
            self._instances = [(build_plugin(name), weight)
                               for name, weight in self.plugins]
        return self._instances


def _cpu_fit(pod: PodInstance, node_id: str, snapshot: ClusterSnapshot) -> Optional[str]:
    node = snapshot.nodes[node_id]
    if snapshot.allocated_m[node_id] + pod.cpu_request > node.cpu_capacity:
        return "insufficient cpu"
    return None


def schedule_one(snapshot: ClusterSnapshot, pod: PodInstance,
                 config: SchedulerConfig,
                 rng: Optional[random.Random] = None) -> ScheduleOutcome:
    """Schedule a single pending pod against a snapshot.

    Nodes surviving every filter are scored by each scoring plugin; the
    combined score is the weight-normalized weighted sum and the best node
    wins.  If no node survives, PostFilter plugins run in configured order
    and the first non-empty preemption plan is returned.
    """
    node_ids = sorted(snapshot.nodes)
    if not node_ids:
        return Unschedulable("no nodes")
    plugins = config.instances()

    survivors = []
    reasons = []
    for node_id in node_ids:
        reason = _cpu_fit(pod, node_id, snapshot)
        if reason is None:
            for plugin, _ in plugins:
                fn = getattr(plugin, "filter", None)
                if fn is None:
                    continue
                reason = fn(pod, node_id, snapshot)
                if reason is not None:
                    reason = f"{plugin.name}: {reason}"
                    break
        if reason is None:
            survivors.append(node_id)
        else:
            reasons.append(f"{node_id}: {reason}")

    if not survivors:
        for plugin, _ in plugins:
            fn = getattr(plugin, "post_filter", None)
            if fn is None:
                continue
            plan = fn(pod, snapshot)
            if plan is not None:
                return Preempted(plan.node, tuple(plan.victims))
        return Unschedulable("; ".join(reasons) if reasons else "all nodes filtered")

    scorers = [(p, w) for p, w in plugins if getattr(p, "score", None) is not None]
    if not scorers:
        return Assigned(survivors[0])
    total_weight = sum(w for _, w in scorers)
    combined = {}
    for node_id in survivors:
        acc = 0.0
        for plugin, weight in scorers:
            s = plugin.score(pod, node_id, snapshot)
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"plugin {plugin.name} returned {s} out of [0, 1]")
            acc += weight * s
        combined[node_id] = acc / total_weight
    best = max(combined.values())
    tied = [n for n in survivors if combined[n] == best]
    if len(tied) > 1 and config.tie_break == TIE_SEEDED_RANDOM and rng is not None:
        return Assigned(rng.choice(tied))
    return Assigned(tied[0])


def sort_queue(state: ClusterState) -> list[str]:
    """Scheduling order: descending priority class, FIFO within a class."""
    pending = [p for p in state.queue if state.pods[p].status is PodStatus.PENDING]
    return sorted(pending, key=lambda p: -state.pods[p].priority_class)


def run_queue(state: ClusterState, config: SchedulerConfig, now: float,
              rng: Optional[random.Random] = None) -> list[tuple[str, ScheduleOutcome]]:
    """Drain the pending queue, scheduling pods one at a time.

    Each pod is scheduled against a snapshot reflecting the outcomes of the
    pods before it.  Preemption victims re-enter the queue tail and get
    their turn in the same drain; unschedulable pods are retried only after
    some other pod made progress.
    """
    outcomes = []
    while True:
        order = sort_queue(state)
        if not order:
            break
        progress = False
        for pod_id in order:
            pod = state.pods[pod_id]
            if pod.status is not PodStatus.PENDING:
                continue
            outcome = schedule_one(state.snapshot(now=now), pod, config, rng)
            outcomes.append((pod_id, outcome))
            if isinstance(outcome, Assigned):
                state.apply_placement(pod_id, outcome.node, now)
                progress = True
            elif isinstance(outcome, Preempted):
                for victim in outcome.victims:
                    state.evict(victim, now, reason="preemption")
                state.apply_placement(pod_id, outcome.node, now)
                progress = True
            else:
                state.mark_unschedulable(pod_id)
        if progress and state.unschedulable:
            state.reactivate_unschedulable()
        elif not progress:
            break
    return outcomes
