"""Deterministic discrete-event engine hosting the experiment scenarios.

A run processes timed events (deployments, pinned placements, metric
samples, link changes, scheduler cycles, monitor passes, balancer
refreshes, requests, allocation samples) in timestamp order with a
documented tie-break: equal timestamps resolve by event kind, then by
insertion order.  Every source of randomness derives from the scenario
seed, so a (config, seed) pair reproduces byte-identical results.
"""

from __future__ import annotations

import heapq
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Optional

from .cluster import ClusterState, Node, PodStatus, Topology
from .fogservice import FogServiceSpec, expand
from .loadbalancer import POLICY_WEIGHTED, LoadBalancer, RuleChain, select_replica
from .monitor import ClusterMonitor, MonitorConfig
from .realtime import pod_rt_utilization
from .scheduling import SchedulerConfig, run_queue
from .telemetry import MetricStore, ReplicaScoreBoard, path_latency


class EventKind(IntEnum):
    LINK = 0
    SUBMIT = 1
    PIN = 2
    METRIC = 3
    SCHED = 4
    MONITOR = 5
    LB_REFRESH = 6
    REQUEST = 7
    SAMPLE = 8


@dataclass(frozen=True)
class WorkloadEvent:
    at: float
    action: str  # deploy | pin | metric | requests | link
    args: tuple = ()


@dataclass(frozen=True)
class ArmSpec:
    """One scheduler/balancer configuration to run the scenario under."""

    name: str
    plugins: tuple[tuple[str, float], ...] = (("baseline", 1.0),)
    tie_break: str = "lexicographic"
    lb_policy: str = POLICY_WEIGHTED

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(plugins=self.plugins, tie_break=self.tie_break)


@dataclass(frozen=True)
class MonitorSettings:
    enabled: bool = False
    loop_period_s: float = 10.0
    grace_s: float = 120.0
    backoff_s: float = 120.0


@dataclass(frozen=True)
class LbSettings:
    refresh_period_s: float = 30.0
    processing_delay_ms: float = 0.005
    staleness_periods: int = 3


@dataclass(frozen=True)
class NodeSettings:
    cores: int = 4
    cpu_capacity: int = 4000
    rt_period_us: int = 1_000_000
    rt_runtime_us: int = 950_000
    overrides: Mapping[str, Mapping[str, int]] = field(default_factory=dict)


@dataclass(frozen=True)
class TopologySpec:
    zones: Mapping[str, tuple[str, ...]]
    uplinks_ms: Mapping[str, float]
    intra_node_ms: float = 0.02
    intra_zone_ms: float = 0.01

    def build(self) -> Topology:
        return Topology(self.zones, self.uplinks_ms,
                        self.intra_node_ms, self.intra_zone_ms)


@dataclass
class ScenarioConfig:
    name: str
    topology: TopologySpec
    services: tuple[FogServiceSpec, ...]
    arms: tuple[ArmSpec, ...]
    workload: tuple[WorkloadEvent, ...]
    description: str = ""
    seed: int = 42
    duration_s: float = 10.0
    repetitions: int = 1
    ci_repetitions: int = 1
    nodes: NodeSettings = NodeSettings()
    monitor: MonitorSettings = MonitorSettings()
    lb: LbSettings = LbSettings()
    sample_period_s: float = 0.0
    # extra scheduler configs addressable from `deploy ... using=<name>`
    # without running them as full arms
    named_configs: tuple[ArmSpec, ...] = ()

    def validate(self) -> list[str]:
        problems = []
        if self.duration_s <= 0:
            problems.append("duration_s must be positive")
        if self.repetitions < 1 or self.ci_repetitions < 1:
            problems.append("repetitions must be >= 1")
        if not self.arms:
            problems.append("at least one arm is required")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            problems.append("arm names must be unique")
        service_names = [s.name for s in self.services]
        if len(set(service_names)) != len(service_names):
            problems.append("service names must be unique")
        try:
            self.topology.build()
        except (ValueError, KeyError) as exc:
            problems.append(f"topology: {exc}")
        return problems


@dataclass
class ResultSet:
    scenario: str
    seed: int
    profile: str
    placements: list = field(default_factory=list)
    timeseries: list = field(default_factory=list)
    requests: list = field(default_factory=list)
    evictions: list = field(default_factory=list)

    PLACEMENT_FIELDS = ("arm", "rep", "pod", "service", "node", "status", "time")
    TIMESERIES_FIELDS = ("arm", "rep", "t", "node", "rt_pods", "regular_pods", "total")
    REQUEST_FIELDS = ("arm", "rep", "t", "client", "service", "replica", "node", "rtt_ms")
    EVICTION_FIELDS = ("arm", "rep", "t", "pod", "from_node", "target_node", "reason")


def build_nodes(topology_spec: TopologySpec, settings: NodeSettings) -> list[Node]:
    nodes = []
    for zone in sorted(topology_spec.zones):
        for node_id in topology_spec.zones[zone]:
            over = settings.overrides.get(node_id, {})
            nodes.append(Node(
                id=node_id, zone=zone,
                cores=over.get("cores", settings.cores),
                cpu_capacity=over.get("cpu_capacity", settings.cpu_capacity),
                rt_period_us=over.get("rt_period_us", settings.rt_period_us),
                rt_runtime_us=over.get("rt_runtime_us", settings.rt_runtime_us)))
    return nodes


def request_rtt(topology: Topology, client: str, node: str,
                processing_delay_ms: float) -> float:
    return 2.0 * path_latency(topology, client, node) + processing_delay_ms


@dataclass(frozen=True)
class RequestRecord:
    time: float
    client: str
    service: str
    replica: str
    node: str
    rtt_ms: float


def generate_requests(topology: Topology, client_node: str,
                      replica_nodes: Mapping[str, str], rate_hz: float,
                      duration_s: float, chain: RuleChain, rng: random.Random,
                      processing_delay_ms: float = 0.005,
                      start: float = 0.0) -> list[RequestRecord]:
    """Issue one request every 1/rate_hz against a fixed rule chain."""
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    count = int(round(rate_hz * duration_s))
    records = []
    for i in range(count):
        t = start + i / rate_hz
        replica = select_replica(chain, rng)
        node = replica_nodes[replica]
        records.append(RequestRecord(t, client_node, "-", replica, node,
                                     request_rtt(topology, client_node, node,
                                                 processing_delay_ms)))
    return records


def inject_link_latency(topology: Topology, link: str, latency_ms: float) -> Topology:
    """Point a zone's core-switch uplink at a new one-way latency."""
    topology.set_uplink(link, latency_ms)
    return topology


class _Run:
    """One (arm, repetition) execution of a scenario."""

    def __init__(self, config: ScenarioConfig, arm: ArmSpec, rep: int, seed: int):
        self.config = config
        self.arm = arm
        self.rep = rep
        self.rng_workload = random.Random(f"{seed}:{rep}:workload")
        self.rng_sched = random.Random(f"{seed}:{rep}:sched:{arm.name}")
        self.rng_requests = random.Random(f"{seed}:{rep}:requests")
        self.topology = config.topology.build()
        self.state = ClusterState(build_nodes(config.topology, config.nodes),
                                  self.topology)
        self.state.metric_store = MetricStore()
        self.state.metric_specs = {s.name: s.metric for s in config.services
                                   if s.metric is not None}
        self.state.scoreboard = ReplicaScoreBoard()
        self.services = {s.name: s for s in config.services}
        self.sched_config = arm.scheduler_config()
        self.alt_configs = {a.name: a.scheduler_config()
                            for a in (*config.arms, *config.named_configs)}
        self.monitor = ClusterMonitor(
            MonitorConfig(config.monitor.loop_period_s, config.monitor.grace_s,
                          config.monitor.backoff_s),
            self.sched_config) if config.monitor.enabled else None
        staleness = config.lb.refresh_period_s * config.lb.staleness_periods
        self.balancers: dict[str, LoadBalancer] = {}
        for event in config.workload:
            if event.action == "requests":
                client = event.args[0]
                self.balancers.setdefault(client, LoadBalancer(
                    client, arm.lb_policy, config.lb.refresh_period_s, staleness))
        self.heap: list = []
        self.seq = 0
        self.requests: list[RequestRecord] = []
        # metric directives declare continuously exported values; the
        # aggregator re-polls them every balancer refresh cycle
        self.static_metrics: dict[tuple[str, str], float] = {}

    def push(self, time: float, kind: EventKind, payload=None) -> None:
        heapq.heappush(self.heap, (time, int(kind), self.seq, payload))
        self.seq += 1

    def execute(self):
        cfg = self.config
        for event in cfg.workload:
            kind = {"link": EventKind.LINK, "deploy": EventKind.SUBMIT,
                    "pin": EventKind.PIN, "metric": EventKind.METRIC,
                    "requests": EventKind.REQUEST}[event.action]
            self.push(event.at, kind, event)
        if self.monitor is not None:
            t = cfg.monitor.loop_period_s
            while t <= cfg.duration_s:
                self.push(t, EventKind.MONITOR)
                t += cfg.monitor.loop_period_s
        if self.balancers:
            t = 0.0
            while t <= cfg.duration_s:
                self.push(t, EventKind.LB_REFRESH)
                t += cfg.lb.refresh_period_s
        if cfg.sample_period_s > 0:
            t = 0.0
            while t <= cfg.duration_s:
                self.push(t, EventKind.SAMPLE)
                t += cfg.sample_period_s
        timeseries = []
        while self.heap:
            time, kind, _, payload = heapq.heappop(self.heap)
            if time > cfg.duration_s:
                break
            self.dispatch(time, EventKind(kind), payload, timeseries)
        return self.collect(timeseries)

    def dispatch(self, now: float, kind: EventKind, payload, timeseries) -> None:
        if kind == EventKind.LINK:
            zone, latency_ms = payload.args
            self.topology.set_uplink(zone, latency_ms)
        elif kind == EventKind.SUBMIT:
            self.handle_deploy(now, payload)
        elif kind == EventKind.PIN:
            pod_id, node_id = payload.args
            self.state.apply_placement(pod_id, node_id, now)
        elif kind == EventKind.METRIC:
            service, pod_id, value = payload.args
            self.static_metrics[(service, pod_id)] = value
            self.state.metric_store.ingest(service, pod_id, value, now)
        elif kind == EventKind.SCHED:
            config = self.alt_configs.get(payload) if payload else None
            run_queue(self.state, config or self.sched_config, now, self.rng_sched)
        elif kind == EventKind.MONITOR:
            evicted = self.monitor.pass_once(self.state, now)
            if evicted:
                self.state.reactivate_unschedulable()
                self.push(now, EventKind.SCHED)
        elif kind == EventKind.LB_REFRESH:
            for (service, pod_id), value in self.static_metrics.items():
                self.state.metric_store.ingest(service, pod_id, value, now)
            snapshot = self.state.snapshot(now=now)
            for client in sorted(self.balancers):
                self.balancers[client].refresh(snapshot, now)
        elif kind == EventKind.REQUEST:
            self.handle_request(now, payload)
        elif kind == EventKind.SAMPLE:
            for node_id in sorted(self.state.nodes):
                pods = self.state.running_on(node_id)
                rt = sum(1 for p in pods if pod_rt_utilization(p).value > 0)
                timeseries.append((now, node_id, rt, len(pods) - rt, len(pods)))

    def handle_deploy(self, now: float, event: WorkloadEvent) -> None:
        names = list(event.args[0])
        using = event.args[1] if len(event.args) > 1 else None
        pods = []
        for name in names:
            pods.extend(expand(self.services[name], now))
        self.rng_workload.shuffle(pods)
        self.state.add_pods(pods)
        self.state.reactivate_unschedulable()
        self.push(now, EventKind.SCHED, using)

    def handle_request(self, now: float, payload) -> None:
        if isinstance(payload, WorkloadEvent):
            client, service, rate_hz, count = payload.args
            payload = (client, service, float(rate_hz), int(count))
        client, service, rate_hz, remaining = payload
        if remaining <= 0:
            return
        balancer = self.balancers[client]
        chain = balancer.chain_for(service)
        if chain is not None:
            replica = select_replica(chain, self.rng_requests)
            pod = self.state.pods[replica]
            if pod.status is PodStatus.RUNNING:
                rtt = request_rtt(self.topology, client, pod.assignment,
                                  self.config.lb.processing_delay_ms)
                self.requests.append(RequestRecord(now, client, service,
                                                   replica, pod.assignment, rtt))
        if remaining > 1:
            self.push(now + 1.0 / rate_hz, EventKind.REQUEST,
                      (client, service, rate_hz, remaining - 1))

    def collect(self, timeseries):
        arm, rep = self.arm.name, self.rep
        placements = []
        for pod_id in sorted(self.state.pods):
            pod = self.state.pods[pod_id]
            placements.append((arm, rep, pod_id, pod.service,
                               pod.assignment or "-", pod.status.value,
                               repr(pod.start_time if pod.assignment else 0.0)))
        series = [(arm, rep, repr(t), node, rt, reg, total)
                  for t, node, rt, reg, total in timeseries]
        requests = [(arm, rep, repr(r.time), r.client, r.service, r.replica,
                     r.node, repr(r.rtt_ms)) for r in self.requests]
        evictions = [(arm, rep, repr(e.time), e.pod, e.from_node,
                      e.target_node or "-", e.reason)
                     for e in self.state.eviction_log]
        return placements, series, requests, evictions


def _run_rep(config: ScenarioConfig, seed: int, rep: int):
    rows = ([], [], [], [])
    for arm in config.arms:
        run = _Run(config, arm, rep, seed)
        for sink, new in zip(rows, run.execute()):
            sink.extend(new)
    return rows


def run_scenario(config: ScenarioConfig, seed: Optional[int] = None,
                 repetitions: Optional[int] = None, profile: str = "paper",
                 jobs: int = 1) -> ResultSet:
    """Run every arm of a scenario for the configured repetitions.

    All arms of a repetition share the workload RNG stream, so baseline and
    custom configurations face identical submission orders.  Repetitions
    reset cluster state and may execute in parallel (`jobs`) without
    affecting the results.
    """
    problems = config.validate()
    if problems:
        raise ValueError(f"invalid scenario {config.name}: " + "; ".join(problems))
    if profile not in ("paper", "ci"):
        raise ValueError(f"unknown profile: {profile}")
    seed = config.seed if seed is None else seed
    reps = repetitions if repetitions is not None else (
        config.ci_repetitions if profile == "ci" else config.repetitions)
    results = ResultSet(config.name, seed, profile)
    sinks = (results.placements, results.timeseries, results.requests,
             results.evictions)
    if jobs > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rows in pool.map(_run_rep, [config] * reps, [seed] * reps,
                                 range(reps)):
                for sink, new in zip(sinks, rows):
                    sink.extend(new)
    else:
        for rep in range(reps):
            for sink, new in zip(sinks, _run_rep(config, seed, rep)):
                sink.extend(new)
    return results
