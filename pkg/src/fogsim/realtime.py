"""Real-time aware scheduling: utilization accounting, quota feasibility,
interference-minimizing scores, and lowest-priority preemption.

A pod's RT utilization is the sum of its reservation-based process budgets
(`runtime/period` per deadline-policy process) plus the declared core
fractions of its fixed-priority processes.  A node can host an RT task set
only while the aggregate utilization stays within `cores * rt_runtime_us /
rt_period_us`, the kernel-enforced share of CPU time available to RT
scheduling classes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cluster import (DEFAULT_RT_PERIOD_US, DEFAULT_RT_RUNTIME_US,
                      RT_PERIOD_LABEL, RT_RUNTIME_LABEL, ClusterSnapshot,
                      DeadlinePolicy, FifoPolicy, Node, PodInstance)

FEASIBILITY_EPS = 1e-9


@dataclass(frozen=True)
class RtUtilization:
    deadline_sum: float = 0.0
    fifo_sum: float = 0.0

    @property
    def value(self) -> float:
        return self.deadline_sum + self.fifo_sum

    def __add__(self, other: "RtUtilization") -> "RtUtilization":
        return RtUtilization(self.deadline_sum + other.deadline_sum,
                             self.fifo_sum + other.fifo_sum)


def pod_rt_utilization(pod: PodInstance) -> RtUtilization:
    deadline_sum = 0.0
    fifo_sum = 0.0
    for proc in pod.rt_processes:
        if isinstance(proc.policy, DeadlinePolicy):
            deadline_sum += proc.policy.utilization
        elif isinstance(proc.policy, FifoPolicy):
            fifo_sum += proc.policy.cpu_request
    return RtUtilization(deadline_sum, fifo_sum)


def node_rt_utilization(node_id: str, snapshot: ClusterSnapshot) -> RtUtilization:
    total = RtUtilization()
    for pod in snapshot.running_on(node_id):
        total = total + pod_rt_utilization(pod)
    return total


def rt_capacity(node: Node) -> float:
    """Node-level RT quota in core-fractions, read from the node labels."""
    period = int(node.labels.get(RT_PERIOD_LABEL, DEFAULT_RT_PERIOD_US))
    runtime = int(node.labels.get(RT_RUNTIME_LABEL, DEFAULT_RT_RUNTIME_US))
    return node.cores * runtime / period


@dataclass(frozen=True)
class PreemptionPlan:
    node: str
    victims: tuple[str, ...]
    freed_utilization: float


class RealtimePlugin:
    """Filter / Score / PostFilter extension points for RT workloads."""

    name = "realtime"

    def filter(self, pod: PodInstance, node_id: str, snapshot: ClusterSnapshot):
        """Admit the pod only if the node's RT quota can absorb it."""
        demand = pod_rt_utilization(pod).value
        if demand == 0:
            return None
        node = snapshot.nodes[node_id]
        current = node_rt_utilization(node_id, snapshot).value
        capacity = rt_capacity(node)
        if current + demand <= capacity + FEASIBILITY_EPS:
            return None
        deficit = current + demand - capacity
        return f"rt quota exceeded by {deficit:.3f}"

    def score(self, pod: PodInstance, node_id: str, snapshot: ClusterSnapshot) -> float:
        """Prefer nodes with the smallest share of CPU claimed by RT tasks.

        Applies to RT and regular candidates alike, steering regular pods
        away from RT-heavy nodes.
        """
        node = snapshot.nodes[node_id]
        utilization = node_rt_utilization(node_id, snapshot).value
        score = 1.0 - utilization / rt_capacity(node)
        return min(max(score, 0.0), 1.0)

    def post_filter(self, pod: PodInstance, snapshot: ClusterSnapshot):
        """Plan the cheapest eviction of strictly lower-priority RT pods that
        frees enough quota (and CPU) to admit the candidate.

        Per node, victims are taken greedily in ascending (priority,
        utilization) order.  Across nodes the plan with the fewest victims
        wins, then the one freeing the least utilization, then node id.
        """
        demand = pod_rt_utilization(pod).value
        if demand == 0:
            return None
        best = None
        for node_id in sorted(snapshot.nodes):
            plan = self._plan_for_node(pod, node_id, snapshot, demand)
            if plan is None:
                continue
            key = (len(plan.victims), plan.freed_utilization, plan.node)
            if best is None or key < best[0]:
                best = (key, plan)
        return best[1] if best else None

    def _plan_for_node(self, pod, node_id, snapshot, demand):
        node = snapshot.nodes[node_id]
        capacity = rt_capacity(node)
        running = snapshot.running_on(node_id)
        current = sum(pod_rt_utilization(p).value for p in running)
        allocated = snapshot.allocated_m[node_id]
        candidates = [p for p in running
                      if p.priority_class < pod.priority_class
                      and pod_rt_utilization(p).value > 0]
        candidates.sort(key=lambda p: (p.priority_class,
                                       pod_rt_utilization(p).value, p.id))
        victims = []
        freed_util = 0.0
        freed_cpu = 0
        for victim in candidates:
            if self._admits(current - freed_util, demand, capacity,
                            allocated - freed_cpu, pod, node):
                break
            victims.append(victim.id)
            freed_util += pod_rt_utilization(victim).value
            freed_cpu += victim.cpu_request
        if not victims:
            return None
        if not self._admits(current - freed_util, demand, capacity,
                            allocated - freed_cpu, pod, node):
            return None
        return PreemptionPlan(node_id, tuple(victims), freed_util)

    @staticmethod
    def _admits(current_util, demand, capacity, allocated, pod, node):
        return (current_util + demand <= capacity + FEASIBILITY_EPS
                and allocated + pod.cpu_request <= node.cpu_capacity)
