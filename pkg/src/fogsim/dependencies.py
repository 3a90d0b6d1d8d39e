"""Dependency-aware node scoring.

For each dependency of a candidate pod, every running replica gets a quality
score combining normalized latency (from the candidate node) and normalized
application metrics.  The balancer sends each replica a share of requests
equal to its normalized score, which we model as a Markov chain over the
replicas whose stationary distribution gives the long-run request shares.
The node score is then the dependency-weighted average of each dependency's
expected per-request quality.
"""

from __future__ import annotations

import logging

import numpy as np

from .cluster import ClusterSnapshot, DependencyRef, PodInstance
from .telemetry import LOWER_IS_BETTER, metric_scores, normalize, path_latency

log = logging.getLogger(__name__)

SMOOTHING_EPS = 1e-9
POWER_ITER_TOL = 1e-10
POWER_ITER_MAX = 10_000


def markov_matrix(scores: list[float]) -> np.ndarray:
    """Transition matrix of the balancer's selection chain.

    The balancer picks each request's destination independently of the
    previous one, so every row is the same selection vector: the scores
    normalized to sum 1 (uniform when all scores are zero).  The stationary
    distribution of this rank-1 chain is exactly the per-request selection
    frequency.
    """
    if not scores:
        raise ValueError("need at least one replica")
    if any(s < 0 for s in scores):
        raise ValueError("scores must be non-negative")
    q = np.asarray(scores, dtype=float)
    total = q.sum()
    if total <= 0:
        q = np.full(len(scores), 1.0 / len(scores))
    else:
        q = q / total
    return np.tile(q, (len(scores), 1))


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix by power iteration.

    Zero entries are smoothed with a tiny epsilon first so the chain is
    irreducible; iteration stops once the residual drops below 1e-10.
    """
    p = np.asarray(matrix, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(p < 0):
        raise ValueError("matrix entries must be non-negative")
    row_sums = p.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise ValueError("matrix rows must sum to 1")
    n = p.shape[0]
    if n == 1:
        return np.array([1.0])
    if np.any(p == 0):
        p = np.where(p == 0, SMOOTHING_EPS, p)
        p = p / p.sum(axis=1, keepdims=True)
    pi = np.full(n, 1.0 / n)
    for _ in range(POWER_ITER_MAX):
        nxt = pi @ p
        nxt = nxt / nxt.sum()
        residual = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if residual < POWER_ITER_TOL:
            return pi
    raise RuntimeError(f"power iteration did not converge (residual {residual:.3e})")


def replica_scores(pod: PodInstance, node_id: str, dep: DependencyRef,
                   snapshot: ClusterSnapshot) -> dict[str, float]:
    """Quality score in [0, 1] for each running replica of one dependency.

    Latencies from the candidate node are min-max normalized over the nodes
    hosting replicas of any of the pod's dependencies plus the candidate
    node itself; metric values are normalized over the dependency's replicas
    per the target service's metric direction.
    """
    replicas = snapshot.running_of_service(dep.target_service)
    if not replicas:
        return {}
    lat_nodes = {node_id}
    for d in pod.dependencies:
        for rep in snapshot.running_of_service(d.target_service):
            lat_nodes.add(rep.assignment)
    lat_norm = normalize(
        {n: path_latency(snapshot.topology, node_id, n) for n in lat_nodes},
        LOWER_IS_BETTER)

    replica_ids = [r.id for r in replicas]
    spec = snapshot.metric_specs.get(dep.target_service)
    if spec is None:
        mv = {r: 1.0 for r in replica_ids}
    else:
        samples = {p: s for (svc, p), s in snapshot.metrics_view.items()
                   if svc == dep.target_service}
        mv = metric_scores(samples, replica_ids, spec.direction,
                           snapshot.now, staleness_s=90.0)
    return {r.id: lat_norm[r.assignment] * dep.latency_weight
            + mv[r.id] * dep.metric_weight
            for r in replicas}


def score_dependencies(pod: PodInstance, node_id: str,
                       snapshot: ClusterSnapshot) -> float:
    """Dependency-weighted node score; 1.0 for pods without dependencies."""
    if not pod.dependencies:
        return 1.0
    total_weight = sum(d.dep_weight for d in pod.dependencies)
    node_score = 0.0
    for dep in pod.dependencies:
        weight = (dep.dep_weight / total_weight if total_weight > 0
                  else 1.0 / len(pod.dependencies))
        per_replica = replica_scores(pod, node_id, dep, snapshot)
        if not per_replica:
            log.warning("dependency %s of %s has no running replicas",
                        dep.target_service, pod.id)
            continue
        ordered = sorted(per_replica)
        scores = [per_replica[r] for r in ordered]
        pi = stationary_distribution(markov_matrix(scores))
        avg_score = float(pi @ np.asarray(scores))
        node_score += avg_score * weight
    return min(max(node_score, 0.0), 1.0)


class DependenciesPlugin:
    """Score extension point ranking nodes by dependency communication quality."""

    name = "dependencies"

    def score(self, pod: PodInstance, node_id: str, snapshot: ClusterSnapshot) -> float:
        return score_dependencies(pod, node_id, snapshot)
