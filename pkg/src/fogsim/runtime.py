"""Workload runtime layer: runtime-class dispatch, RT priority assignment
with a 30-second pending queue, and RT group limit computation.

Everything operates against an abstract process host.  The simulated host
used in tests records every call so that ordering, retries and
exactly-once application can be asserted; integration with a real host is
out of scope.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Optional, Protocol

from .cluster import DeadlinePolicy, FifoPolicy, Node, PodInstance, RtProcessSpec
from .fogservice import FogServiceSpec
from .realtime import rt_capacity

log = logging.getLogger(__name__)

RETRY_INTERVAL_S = 30.0
RT_GROUP_PERIOD_US = 1_000_000

RUNTIME_CONTAINER = "container"
RUNTIME_LEGACY = "legacy"


class ProcessHost(Protocol):
    def list_processes(self, pod_id: str) -> list[tuple[int, str]]: ...
    def set_policy(self, pod_id: str, pid: int,
                   policy: DeadlinePolicy | FifoPolicy) -> bool: ...
    def set_rt_group_limits(self, pod_id: str, period_us: int, runtime_us: int) -> bool: ...


@dataclass(frozen=True)
class HostCall:
    time: float
    pod: str
    call: str
    pid: Optional[int]
    detail: str
    ok: bool


class SimulatedProcessHost:
    """Process host double: processes appear at scripted times and every
    call is recorded for assertions."""

    def __init__(self):
        self._procs: dict[str, list[tuple[float, int, str]]] = {}
        self._fail_pids: set[int] = set()
        self.calls: list[HostCall] = []
        self.now = 0.0

    def spawn(self, pod_id: str, pid: int, name: str, at: float = 0.0) -> None:
        self._procs.setdefault(pod_id, []).append((at, pid, name))

    def fail_pid(self, pid: int) -> None:
        self._fail_pids.add(pid)

    def list_processes(self, pod_id: str) -> list[tuple[int, str]]:
        return [(pid, name) for at, pid, name in self._procs.get(pod_id, ())
                if at <= self.now]

    def set_policy(self, pod_id: str, pid: int, policy) -> bool:
        ok = pid not in self._fail_pids
        self.calls.append(HostCall(self.now, pod_id, "set_policy", pid,
                                   _policy_text(policy), ok))
        return ok

    def set_rt_group_limits(self, pod_id: str, period_us: int, runtime_us: int) -> bool:
        self.calls.append(HostCall(self.now, pod_id, "set_rt_group_limits", None,
                                   f"{period_us}:{runtime_us}", True))
        return True

    def policy_calls(self, pod_id: Optional[str] = None) -> list[HostCall]:
        return [c for c in self.calls if c.call == "set_policy"
                and (pod_id is None or c.pod == pod_id)]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "pod", "call", "pid", "detail", "ok"])
            for c in self.calls:
                writer.writerow([repr(c.time), c.pod, c.call,
                                 "" if c.pid is None else c.pid, c.detail, int(c.ok)])


def _policy_text(policy) -> str:
    if isinstance(policy, DeadlinePolicy):
        return f"deadline:{policy.runtime_us}:{policy.period_us}:{policy.deadline_us}"
    return f"fifo:{policy.priority}:{policy.cpu_request}"


class RecordingRuntime:
    """Lifecycle recorder standing in for a concrete runtime backend."""

    def __init__(self, kind: str):
        self.kind = kind
        self.events: list[tuple[str, str]] = []

    def create(self, pod: PodInstance) -> None:
        self.events.append(("create", pod.id))

    def start(self, pod: PodInstance) -> None:
        self.events.append(("start", pod.id))

    def stop(self, pod: PodInstance) -> None:
        self.events.append(("stop", pod.id))

    def status(self, pod: PodInstance) -> str:
        return pod.status.value


class RuntimeDispatcher:
    """Route lifecycle calls to the container or legacy runtime by the pod's
    runtime class; pods without one are treated as containerised."""

    def __init__(self):
        self.container = RecordingRuntime(RUNTIME_CONTAINER)
        self.legacy = RecordingRuntime(RUNTIME_LEGACY)

    def runtime_for(self, pod: PodInstance) -> RecordingRuntime:
        runtime_class = pod.runtime_class or RUNTIME_CONTAINER
        if runtime_class == RUNTIME_LEGACY:
            return self.legacy
        if runtime_class == RUNTIME_CONTAINER:
            return self.container
        raise ValueError(f"unknown runtime class: {runtime_class}")

    def create(self, pod: PodInstance) -> RecordingRuntime:
        runtime = self.runtime_for(pod)
        runtime.create(pod)
        return runtime


@dataclass
class PendingAssignment:
    pod_id: str
    unmatched: list[int]  # indexes into the pod's rt_processes
    next_retry: float


class RtPriorityManager:
    """Apply RT process policies on pod start, retrying unmatched processes
    on a fixed 30-second cadence until every spec has been applied."""

    def __init__(self, host: ProcessHost, retry_interval_s: float = RETRY_INTERVAL_S):
        self.host = host
        self.retry_interval_s = retry_interval_s
        self.pending: dict[str, PendingAssignment] = {}
        self._applied: set[tuple[str, int, int]] = set()  # (pod, spec index, pid)

    def assign_priorities(self, pod: PodInstance,
                          now: float = 0.0) -> tuple[list[tuple[int, int]], Optional[PendingAssignment]]:
        """Match and apply the pod's RT process specs.

        Returns the (spec index, pid) pairs applied now and the pending
        entry created for unmatched specs, if any.  Specs are applied in
        declaration order.
        """
        applied, unmatched = self._try_apply(pod, range(len(pod.rt_processes)), now)
        entry = None
        if unmatched:
            entry = PendingAssignment(pod.id, unmatched, now + self.retry_interval_s)
            self.pending[pod.id] = entry
        return applied, entry

    def tick(self, pod_lookup, now: float) -> list[tuple[str, int, int]]:
        """Revisit the pending queue; returns (pod, spec index, pid) applied."""
        applied_now = []
        for pod_id in sorted(self.pending):
            entry = self.pending[pod_id]
            if now < entry.next_retry:
                continue
            pod = pod_lookup(pod_id)
            applied, unmatched = self._try_apply(pod, entry.unmatched, now)
            applied_now.extend((pod_id, idx, pid) for idx, pid in applied)
            if unmatched:
                entry.unmatched = unmatched
                entry.next_retry = now + self.retry_interval_s
            else:
                del self.pending[pod_id]
        return applied_now

    def _try_apply(self, pod: PodInstance, spec_indexes, now: float):
        processes = self.host.list_processes(pod.id)
        applied = []
        unmatched = []
        for idx in spec_indexes:
            spec = pod.rt_processes[idx]
            matches = _match(spec, processes)
            if not matches:
                unmatched.append(idx)
                continue
            all_ok = True
            for pid in matches:
                key = (pod.id, idx, pid)
                if key in self._applied:
                    continue
                if self.host.set_policy(pod.id, pid, spec.policy):
                    self._applied.add(key)
                    applied.append((idx, pid))
                else:
                    log.error("set_policy failed for pod %s pid %d", pod.id, pid)
                    all_ok = False
            if not all_ok:
                unmatched.append(idx)
        return applied, unmatched


def _match(spec: RtProcessSpec, processes: list[tuple[int, str]]) -> list[int]:
    if spec.pid is not None:
        return [pid for pid, _ in processes if pid == spec.pid]
    if spec.name_substring is not None:
        return [pid for pid, name in processes if spec.name_substring in name]
    return []


def rt_group_limits(spec: FogServiceSpec) -> tuple[int, int]:
    """RT group quota for a service: a fixed period and the runtime derived
    from its RT limit.  Regular CPU limits are untouched; budgeting the RT
    share separately avoids double-counting mixed pods."""
    runtime_us = int(round(spec.rt_limit * RT_GROUP_PERIOD_US))
    return RT_GROUP_PERIOD_US, runtime_us


def rt_group_limits_for_node(spec: FogServiceSpec, node: Node) -> tuple[int, int]:
    """Like :func:`rt_group_limits` but clamped to the node's RT quota."""
    period_us, runtime_us = rt_group_limits(spec)
    quota = rt_capacity(node) / node.cores
    ceiling = int(round(quota * RT_GROUP_PERIOD_US))
    if runtime_us > ceiling:
        log.warning("service %s rt_limit %.3f exceeds node %s quota %.3f; clamping",
                    spec.name, spec.rt_limit, node.id, quota)
        runtime_us = ceiling
    return period_us, runtime_us


def apply_rt_limits(pod: PodInstance, spec: FogServiceSpec, node: Node,
                    host: ProcessHost) -> tuple[int, int]:
    period_us, runtime_us = rt_group_limits_for_node(spec, node)
    host.set_rt_group_limits(pod.id, period_us, runtime_us)
    return period_us, runtime_us
