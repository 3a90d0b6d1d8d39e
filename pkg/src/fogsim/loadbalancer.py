"""Latency/metric-weighted replica selection through a sequential rule chain.

Replica scores are turned into a chain of probabilistic rules evaluated in
ascending score order.  Rule `i` accepts with probability `P_i`, chosen so
that the overall chance of selecting replica `i` equals its normalized
score; the last rule always accepts.  This reproduces how a packet-filter
rule list realizes a weighted distribution: each rule's probability must be
conditioned on every earlier rule having declined.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .telemetry import (MetricStore, ReplicaScoreBoard, path_latency,
                        refresh_scoreboard)

POLICY_WEIGHTED = "weighted"
POLICY_UNIFORM = "uniform"


def replica_score(mv: float, lv: float, mw: float, lw: float) -> float:
    """Combine a replica's normalized metric and latency values."""
    if abs(mw + lw - 1.0) > 1e-9:
        raise ValueError("metric and latency weights must sum to 1")
    return mv * mw + lv * lw


@dataclass(frozen=True)
class RuleChain:
    """Replicas in ascending score order with per-rule accept probabilities."""

    replicas: tuple[str, ...]
    accept_probabilities: tuple[float, ...]
    selection_probabilities: tuple[float, ...]
    refreshed_at: float = 0.0


def chain_probabilities(scores: Mapping[str, float], now: float = 0.0) -> RuleChain:
    """Build the rule chain for a replica score map.

    Scores are normalized to sum 1 first (an all-zero vector falls back to
    the uniform distribution).  With replicas sorted ascending, the rules
    are `P_1 = s_1`, `P_i = s_i / prod_{j<i}(1 - P_j)` and `P_N = 1`, which
    makes replica `i`'s selection probability exactly `s_i`.
    """
    if not scores:
        raise ValueError("cannot build a chain without replicas")
    if any(s < 0 for s in scores.values()):
        raise ValueError("scores must be non-negative")
    ordered = sorted(scores, key=lambda r: (scores[r], r))
    total = sum(scores.values())
    if total <= 0:
        share = {r: 1.0 / len(scores) for r in scores}
    else:
        share = {r: scores[r] / total for r in scores}
    probs = []
    remaining = 1.0
    for i, rep in enumerate(ordered):
        if i == len(ordered) - 1:
            probs.append(1.0)
            break
        p = share[rep] / remaining if remaining > 0 else 1.0
        assert p <= 1.0 + 1e-12, "rule probability exceeded 1 for normalized scores"
        p = min(p, 1.0)
        probs.append(p)
        remaining *= 1.0 - p
    return RuleChain(tuple(ordered), tuple(probs),
                     tuple(share[r] for r in ordered), now)


def select_replica(chain: RuleChain, rng: random.Random) -> str:
    """Walk the rules in order; each accepts with its own probability."""
    if not chain.replicas:
        raise ValueError("empty rule chain")
    for rep, p in zip(chain.replicas, chain.accept_probabilities):
        if rng.random() < p:
            return rep
    return chain.replicas[-1]


def uniform_chain(replicas: Sequence[str], now: float = 0.0) -> RuleChain:
    """Maximum-fairness baseline: every replica equally likely."""
    if not replicas:
        raise ValueError("cannot build a chain without replicas")
    return chain_probabilities({r: 1.0 for r in replicas}, now)


class LoadBalancer:
    """Per-client-node balancer.

    Each refresh cycle pulls the service's replica scores (recomputed from
    this client's vantage point into the shared score board, then read back
    in one lookup) and rebuilds the rule chains.  Chains are immutable;
    request handling always sees either the old or the new chain, never a
    partial one.
    """

    def __init__(self, client_node: str, policy: str = POLICY_WEIGHTED,
                 refresh_period_s: float = 30.0, staleness_s: float = 90.0):
        if policy not in (POLICY_WEIGHTED, POLICY_UNIFORM):
            raise ValueError(f"unknown balancing policy: {policy}")
        self.client_node = client_node
        self.policy = policy
        self.refresh_period_s = refresh_period_s
        self.staleness_s = staleness_s
        self.board = ReplicaScoreBoard()
        self.chains: dict[str, RuleChain] = {}

    def refresh(self, snapshot, now: float) -> dict[str, RuleChain]:
        """Rebuild every service's chain from the current cluster snapshot."""
        services = sorted({p.service for p in snapshot.pods.values()})
        store = MetricStore.from_view(snapshot.metrics_view)
        for service in services:
            replica_nodes = {p.id: p.assignment
                             for p in snapshot.running_of_service(service)}
            if not replica_nodes:
                self.board.remove(service)
                self.chains.pop(service, None)
                continue
            if self.policy == POLICY_UNIFORM:
                self.chains[service] = uniform_chain(sorted(replica_nodes), now)
                continue
            entry = refresh_scoreboard(
                self.board, service, replica_nodes,
                lambda node: path_latency(snapshot.topology, self.client_node, node),
                store, snapshot.metric_specs.get(service), now, self.staleness_s)
            self.chains[service] = chain_probabilities(entry.scores, now)
        for service in list(self.chains):
            if service not in services:
                self.chains.pop(service)
                self.board.remove(service)
        return dict(self.chains)

    def chain_for(self, service: str) -> Optional[RuleChain]:
        return self.chains.get(service)

    def select(self, service: str, rng: random.Random) -> str:
        chain = self.chains.get(service)
        if chain is None:
            raise KeyError(f"no chain for service {service}")
        return select_replica(chain, rng)
