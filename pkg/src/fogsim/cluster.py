"""Cluster world model: nodes, star topology, pods, placements, snapshots.

All mutation goes through :class:`ClusterState`, which keeps CPU allocation
bookkeeping consistent with pod status transitions.  Consumers that must not
observe later mutations (scheduler plugins, the rescheduling monitor) work on
:class:`ClusterSnapshot` values produced by :meth:`ClusterState.snapshot`.
"""

from __future__ import annotations

import copy as _copy
import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional

DEFAULT_CORES = 4
DEFAULT_CPU_CAPACITY_M = 4000
DEFAULT_RT_PERIOD_US = 1_000_000
DEFAULT_RT_RUNTIME_US = 950_000

RT_PERIOD_LABEL = "sched_rt_period_us"
RT_RUNTIME_LABEL = "sched_rt_runtime_us"

DEFAULT_INTRA_NODE_MS = 0.02
DEFAULT_INTRA_ZONE_MS = 0.01


class PodStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    EVICTED = "Evicted"
    UNSCHEDULABLE = "Unschedulable"


@dataclass(frozen=True)
class DeadlinePolicy:
    """EDF-style reservation: `runtime_us` of CPU every `period_us`."""

    runtime_us: int
    period_us: int
    deadline_us: int = 0

    def __post_init__(self):
        if self.deadline_us == 0:
            object.__setattr__(self, "deadline_us", self.period_us)

    @property
    def utilization(self) -> float:
        return self.runtime_us / self.period_us


@dataclass(frozen=True)
class FifoPolicy:
    """Fixed-priority policy with a declared CPU budget in core-fractions."""

    priority: int
    cpu_request: float


@dataclass(frozen=True)
class RtProcessSpec:
    """Selects a process (by container PID or name substring) and its policy."""

    policy: DeadlinePolicy | FifoPolicy
    pid: Optional[int] = None
    name_substring: Optional[str] = None


@dataclass(frozen=True)
class DependencyRef:
    target_service: str
    dep_weight: float = 1.0
    latency_weight: float = 0.5
    metric_weight: float = 0.5


@dataclass
class Node:
    id: str
    zone: str
    cores: int = DEFAULT_CORES
    cpu_capacity: int = DEFAULT_CPU_CAPACITY_M
    rt_period_us: int = DEFAULT_RT_PERIOD_US
    rt_runtime_us: int = DEFAULT_RT_RUNTIME_US
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError(f"node {self.id}: cores must be >= 1")
        if not 0 < self.rt_runtime_us <= self.rt_period_us:
            raise ValueError(f"node {self.id}: need 0 < rt_runtime_us <= rt_period_us")
        # The RT quota is advertised through labels, mirroring how worker
        # nodes expose their kernel parameters to the scheduler.
        self.labels.setdefault(RT_PERIOD_LABEL, str(self.rt_period_us))
        self.labels.setdefault(RT_RUNTIME_LABEL, str(self.rt_runtime_us))


class Topology:
    """Star layout: every node hangs off its zone switch, every zone switch
    off one core switch.  Links carry one-way latencies in milliseconds."""

    def __init__(self, zones: Mapping[str, Iterable[str]], uplinks_ms: Mapping[str, float],
                 intra_node_ms: float = DEFAULT_INTRA_NODE_MS,
                 intra_zone_ms: float = DEFAULT_INTRA_ZONE_MS):
        self.zones = {z: list(nodes) for z, nodes in zones.items()}
        self.uplinks_ms = dict(uplinks_ms)
        self.intra_node_ms = intra_node_ms
        self.intra_zone_ms = intra_zone_ms
        self.zone_of: dict[str, str] = {}
        for zone, nodes in self.zones.items():
            if zone not in self.uplinks_ms:
                raise ValueError(f"zone {zone} has no uplink latency")
            for n in nodes:
                if n in self.zone_of:
                    raise ValueError(f"node {n} appears in more than one zone")
                self.zone_of[n] = zone
        for lat in list(self.uplinks_ms.values()) + [intra_node_ms, intra_zone_ms]:
            if lat < 0:
                raise ValueError("latency must be non-negative")

    def node_ids(self) -> list[str]:
        return sorted(self.zone_of)

    def links(self) -> list[tuple[str, str, float]]:
        return [(zone, "core", self.uplinks_ms[zone]) for zone in sorted(self.uplinks_ms)]

    def set_uplink(self, zone: str, latency_ms: float) -> None:
        if zone not in self.uplinks_ms:
            raise KeyError(f"unknown link: {zone}")
        if latency_ms < 0:
            raise ValueError("latency must be non-negative")
        self.uplinks_ms[zone] = latency_ms

    def copy(self) -> "Topology":
        return Topology(self.zones, self.uplinks_ms, self.intra_node_ms, self.intra_zone_ms)


@dataclass
class PodInstance:
    id: str
    service: str
    cpu_request: int = 100
    cpu_limit: int = 100
    priority_class: int = 0
    location_scope: Optional[str] = None
    rt_processes: tuple[RtProcessSpec, ...] = ()
    dependencies: tuple[DependencyRef, ...] = ()
    runtime_class: str = "container"
    rt_limit: float = 0.0
    config: Mapping[str, str] = field(default_factory=dict)
    submitted_at: float = 0.0
    assignment: Optional[str] = None
    start_time: float = 0.0
    status: PodStatus = PodStatus.PENDING

    def copy(self) -> "PodInstance":
        # rt_processes/dependencies are immutable tuples and safe to share
        return _copy.copy(self)


@dataclass(frozen=True)
class EvictionEvent:
    time: float
    pod: str
    from_node: str
    target_node: Optional[str]
    reason: str


class ClusterSnapshot:
    """Point-in-time copy of the cluster, isolated from later mutations."""

    def __init__(self, nodes, topology, pods, allocated_m, queue, now,
                 metrics_view=None, metric_specs=None, scoreboard_view=None):
        self.nodes: dict[str, Node] = nodes
        self.topology: Topology = topology
        self.pods: dict[str, PodInstance] = pods
        self.allocated_m: dict[str, int] = allocated_m
        self.queue: tuple[str, ...] = queue
        self.now = now
        self.metrics_view = metrics_view or {}
        self.metric_specs = metric_specs or {}
        self.scoreboard_view = scoreboard_view or {}
        self._by_node: Optional[dict[str, list[PodInstance]]] = None

    def _node_index(self) -> dict[str, list[PodInstance]]:
        # snapshots are immutable, so the index is computed once
        if self._by_node is None:
            index = {n: [] for n in self.nodes}
            for pod in self.pods.values():
                if pod.status is PodStatus.RUNNING:
                    index[pod.assignment].append(pod)
            self._by_node = index
        return self._by_node

    def running_on(self, node_id: str) -> list[PodInstance]:
        return self._node_index()[node_id]

    def pod_counts(self) -> dict[str, int]:
        return {n: len(pods) for n, pods in self._node_index().items()}

    def running_of_service(self, service: str) -> list[PodInstance]:
        pods = [p for p in self.pods.values()
                if p.status is PodStatus.RUNNING and p.service == service]
        return sorted(pods, key=lambda p: p.id)

    def to_text(self) -> str:
        return _state_text(self.topology, self.nodes, self.pods, self.now)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


class ClusterState:
    """Single-writer world model.  All mutations happen on the event loop."""

    def __init__(self, nodes: Iterable[Node], topology: Topology):
        self.topology = topology
        self.nodes: dict[str, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValueError(f"duplicate node id {node.id}")
            if node.id not in topology.zone_of:
                raise ValueError(f"node {node.id} missing from topology")
            self.nodes[node.id] = node
        self.pods: dict[str, PodInstance] = {}
        self.allocated_m: dict[str, int] = {n: 0 for n in self.nodes}
        self.queue: list[str] = []
        self.unschedulable: list[str] = []
        self.eviction_log: list[EvictionEvent] = []
        self.version = 0
        # telemetry attachments, wired up by the simulator
        self.metric_store = None
        self.metric_specs: dict = {}
        self.scoreboard = None

    # -- pod lifecycle -----------------------------------------------------

    def add_pod(self, pod: PodInstance) -> None:
        if pod.id in self.pods:
            raise ValueError(f"duplicate pod id {pod.id}")
        self.pods[pod.id] = pod
        if pod.status is PodStatus.PENDING:
            self.queue.append(pod.id)
        self.version += 1

    def add_pods(self, pods: Iterable[PodInstance]) -> None:
        for pod in pods:
            self.add_pod(pod)

    def apply_placement(self, pod_id: str, node_id: str, time: float) -> None:
        pod = self._pod(pod_id)
        if pod.status is not PodStatus.PENDING:
            raise ValueError(f"pod {pod_id} is not pending")
        if node_id not in self.nodes:
            raise KeyError(f"unknown node {node_id}")
        pod.status = PodStatus.RUNNING
        pod.assignment = node_id
        pod.start_time = time
        self.allocated_m[node_id] += pod.cpu_request
        if pod_id in self.queue:
            self.queue.remove(pod_id)
        self.version += 1

    def evict(self, pod_id: str, time: float, reason: str = "evicted",
              target_node: Optional[str] = None) -> None:
        pod = self._pod(pod_id)
        if pod.status is not PodStatus.RUNNING:
            raise ValueError(f"pod {pod_id} is not running")
        node_id = pod.assignment
        self.allocated_m[node_id] -= pod.cpu_request
        pod.status = PodStatus.PENDING
        pod.assignment = None
        self.queue.append(pod_id)
        self.eviction_log.append(EvictionEvent(time, pod_id, node_id, target_node, reason))
        self.version += 1

    def mark_unschedulable(self, pod_id: str) -> None:
        pod = self._pod(pod_id)
        if pod.status is not PodStatus.PENDING:
            raise ValueError(f"pod {pod_id} is not pending")
        pod.status = PodStatus.UNSCHEDULABLE
        if pod_id in self.queue:
            self.queue.remove(pod_id)
        if pod_id not in self.unschedulable:
            self.unschedulable.append(pod_id)
        self.version += 1

    def reactivate_unschedulable(self) -> list[str]:
        """Give previously unschedulable pods another chance after the
        cluster changed (new placements, evictions, topology updates)."""
        woken = []
        for pod_id in self.unschedulable:
            pod = self.pods[pod_id]
            pod.status = PodStatus.PENDING
            self.queue.append(pod_id)
            woken.append(pod_id)
        self.unschedulable.clear()
        if woken:
            self.version += 1
        return woken

    # -- views ---------------------------------------------------------------

    def running_on(self, node_id: str) -> list[PodInstance]:
        return [p for p in self.pods.values()
                if p.status is PodStatus.RUNNING and p.assignment == node_id]

    def running_of_service(self, service: str) -> list[PodInstance]:
        pods = [p for p in self.pods.values()
                if p.status is PodStatus.RUNNING and p.service == service]
        return sorted(pods, key=lambda p: p.id)

    def snapshot(self, exclude: Optional[str] = None, now: float = 0.0) -> ClusterSnapshot:
        if exclude is not None and exclude not in self.pods:
            raise KeyError(f"pod not found: {exclude}")
        pods = {}
        allocated = dict(self.allocated_m)
        for pod_id, pod in self.pods.items():
            if pod_id == exclude:
                if pod.status is PodStatus.RUNNING:
                    allocated[pod.assignment] -= pod.cpu_request
                continue
            pods[pod_id] = pod.copy()
        nodes = {nid: replace(n, labels=dict(n.labels)) for nid, n in self.nodes.items()}
        queue = tuple(p for p in self.queue if p != exclude)
        metrics_view = self.metric_store.view() if self.metric_store is not None else {}
        board_view = self.scoreboard.view() if self.scoreboard is not None else {}
        return ClusterSnapshot(nodes, self.topology.copy(), pods, allocated, queue, now,
                               metrics_view, dict(self.metric_specs), board_view)

    def to_text(self) -> str:
        return _state_text(self.topology, self.nodes, self.pods, None)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def _pod(self, pod_id: str) -> PodInstance:
        try:
            return self.pods[pod_id]
        except KeyError:
            raise KeyError(f"pod not found: {pod_id}") from None


# -- structured text serialization ------------------------------------------
#
# One section per link, node, and pod.  The same document both seeds test
# clusters and backs golden-file comparisons; `content_hash` hashes it.


def _rt_spec_text(spec: RtProcessSpec) -> str:
    sel = f"pid={spec.pid}" if spec.pid is not None else f"name={spec.name_substring}"
    if isinstance(spec.policy, DeadlinePolicy):
        pol = f"deadline:{spec.policy.runtime_us}:{spec.policy.period_us}:{spec.policy.deadline_us}"
    else:
        pol = f"fifo:{spec.policy.priority}:{spec.policy.cpu_request}"
    return f"{sel} {pol}"


def _state_text(topology: Topology, nodes: Mapping[str, Node],
                pods: Mapping[str, PodInstance], now) -> str:
    lines = ["[cluster]"]
    if now is not None:
        lines.append(f"time = {now}")
    lines.append(f"intra_node_ms = {topology.intra_node_ms}")
    lines.append(f"intra_zone_ms = {topology.intra_zone_ms}")
    for zone, _, lat in topology.links():
        lines.append("")
        lines.append(f"[link {zone}]")
        lines.append(f"uplink_ms = {lat}")
        lines.append(f"nodes = {' '.join(topology.zones[zone])}")
    for nid in sorted(nodes):
        n = nodes[nid]
        lines.extend(["", f"[node {nid}]", f"zone = {n.zone}", f"cores = {n.cores}",
                      f"cpu_capacity = {n.cpu_capacity}",
                      f"rt_period_us = {n.labels[RT_PERIOD_LABEL]}",
                      f"rt_runtime_us = {n.labels[RT_RUNTIME_LABEL]}"])
    for pid in sorted(pods):
        p = pods[pid]
        lines.extend(["", f"[pod {pid}]", f"service = {p.service}",
                      f"status = {p.status.value}",
                      f"node = {p.assignment or '-'}",
                      f"start_time = {p.start_time}",
                      f"priority_class = {p.priority_class}",
                      f"cpu_request = {p.cpu_request}",
                      f"cpu_limit = {p.cpu_limit}",
                      f"location_scope = {p.location_scope or '-'}",
                      f"runtime_class = {p.runtime_class}"])
        if p.rt_processes:
            lines.append("rt_processes = " + "; ".join(_rt_spec_text(s) for s in p.rt_processes))
        if p.dependencies:
            deps = "; ".join(f"{d.target_service}:{d.dep_weight}:{d.latency_weight}:{d.metric_weight}"
                             for d in p.dependencies)
            lines.append("dependencies = " + deps)
    return "\n".join(lines) + "\n"


def _rt_spec_from_text(text: str) -> RtProcessSpec:
    sel, pol = text.split(" ", 1)
    key, value = sel.split("=", 1)
    pid = int(value) if key == "pid" else None
    name = value if key == "name" else None
    parts = pol.split(":")
    if parts[0] == "deadline":
        policy = DeadlinePolicy(int(parts[1]), int(parts[2]), int(parts[3]))
    else:
        policy = FifoPolicy(int(parts[1]), float(parts[2]))
    return RtProcessSpec(policy=policy, pid=pid, name_substring=name)


def state_from_text(text: str) -> ClusterState:
    """Rebuild a cluster from its structured text document."""
    import configparser

    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    parser.read_string(text)
    meta = parser["cluster"]
    zones: dict[str, list[str]] = {}
    uplinks: dict[str, float] = {}
    nodes = []
    pods = []
    for section in parser.sections():
        if section.startswith("link "):
            zone = section.split(" ", 1)[1]
            uplinks[zone] = float(parser[section]["uplink_ms"])
            zones[zone] = parser[section]["nodes"].split()
        elif section.startswith("node "):
            sect = parser[section]
            nodes.append(Node(id=section.split(" ", 1)[1], zone=sect["zone"],
                              cores=int(sect["cores"]),
                              cpu_capacity=int(sect["cpu_capacity"]),
                              rt_period_us=int(sect["rt_period_us"]),
                              rt_runtime_us=int(sect["rt_runtime_us"])))
        elif section.startswith("pod "):
            sect = parser[section]
            procs = tuple(_rt_spec_from_text(part.strip())
                          for part in sect.get("rt_processes", "").split(";") if part.strip())
            deps = []
            for part in sect.get("dependencies", "").split(";"):
                if not part.strip():
                    continue
                svc, w, lw, mw = part.strip().split(":")
                deps.append(DependencyRef(svc, float(w), float(lw), float(mw)))
            node = sect["node"]
            pods.append(PodInstance(
                id=section.split(" ", 1)[1], service=sect["service"],
                cpu_request=int(sect["cpu_request"]), cpu_limit=int(sect["cpu_limit"]),
                priority_class=int(sect["priority_class"]),
                location_scope=None if sect["location_scope"] == "-" else sect["location_scope"],
                rt_processes=procs, dependencies=tuple(deps),
                runtime_class=sect["runtime_class"],
                assignment=None if node == "-" else node,
                start_time=float(sect["start_time"]),
                status=PodStatus(sect["status"])))
    topology = Topology(zones, uplinks,
                        intra_node_ms=float(meta.get("intra_node_ms", DEFAULT_INTRA_NODE_MS)),
                        intra_zone_ms=float(meta.get("intra_zone_ms", DEFAULT_INTRA_ZONE_MS)))
    state = ClusterState(nodes, topology)
    for pod in pods:
        placed_on = pod.assignment
        if pod.status is PodStatus.RUNNING:
            pod.status = PodStatus.PENDING
            pod.assignment = None
            state.add_pod(pod)
            state.apply_placement(pod.id, placed_on, pod.start_time)
        else:
            state.add_pod(pod)
            if pod.status is PodStatus.UNSCHEDULABLE:
                state.unschedulable.append(pod.id)
    return state
