"""Latency view, application metric store, and the per-service score board."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .cluster import Topology

LOWER_IS_BETTER = "lower-is-better"
HIGHER_IS_BETTER = "higher-is-better"

DEFAULT_STALENESS_PERIODS = 3


@dataclass(frozen=True)
class MetricSpec:
    """Application metric exposed by a service, plus the weights used to
    trade it off against network latency when scoring replicas."""

    name: str
    direction: str = LOWER_IS_BETTER
    metric_weight: float = 0.5
    latency_weight: float = 0.5


def path_latency(topology: Topology, a: str, b: str) -> float:
    """One-way latency between two nodes on the star topology.

    Same node: the intra-node base.  Same zone: base plus one zone-switch
    hop.  Different zones: the sum of both zones' core-switch uplinks.
    """
    for n in (a, b):
        if n not in topology.zone_of:
            raise KeyError(f"unknown node: {n}")
    if a == b:
        return topology.intra_node_ms
    zone_a, zone_b = topology.zone_of[a], topology.zone_of[b]
    if zone_a == zone_b:
        return topology.intra_node_ms + topology.intra_zone_ms
    return topology.uplinks_ms[zone_a] + topology.uplinks_ms[zone_b]


def normalize(values: Mapping, direction: str) -> dict:
    """Min-max normalize to [0, 1] with the best key mapped to 1.0.

    For lower-is-better metrics the scale is inverted.  Degenerate input
    (all values equal) maps everything to 1.0.
    """
    if not values:
        raise ValueError("cannot normalize an empty map")
    lo, hi = min(values.values()), max(values.values())
    span = hi - lo
    if span == 0:
        return {k: 1.0 for k in values}
    if direction == LOWER_IS_BETTER:
        return {k: (hi - v) / span for k, v in values.items()}
    if direction == HIGHER_IS_BETTER:
        return {k: (v - lo) / span for k, v in values.items()}
    raise ValueError(f"unknown direction: {direction}")


@dataclass(frozen=True)
class MetricSample:
    value: float
    timestamp: float


class MetricStore:
    """Latest application-level sample per (service, pod)."""

    def __init__(self):
        self._samples: dict[tuple[str, str], MetricSample] = {}

    @classmethod
    def from_view(cls, view: Mapping) -> "MetricStore":
        store = cls()
        store._samples = dict(view)
        return store

    def ingest(self, service: str, pod: str, value: float, timestamp: float) -> None:
        key = (service, pod)
        prev = self._samples.get(key)
        if prev is not None and timestamp < prev.timestamp:
            raise ValueError(f"timestamp went backwards for {key}")
        self._samples[key] = MetricSample(value, timestamp)

    def latest(self, service: str, pod: str) -> Optional[MetricSample]:
        return self._samples.get((service, pod))

    def service_samples(self, service: str) -> dict[str, MetricSample]:
        return {pod: s for (svc, pod), s in self._samples.items() if svc == service}

    def drop_pod(self, service: str, pod: str) -> None:
        self._samples.pop((service, pod), None)

    def view(self) -> dict:
        return dict(self._samples)


def metric_scores(samples: Mapping[str, MetricSample], replicas: list[str],
                  direction: str, now: float, staleness_s: float) -> dict[str, float]:
    """Normalized metric score per replica.

    Replicas whose sample is stale or missing score 0 so that degraded or
    invisible replicas lose traffic instead of vanishing.  A service with no
    samples at all has no exporter; its metric carries no information and
    every replica scores 1.
    """
    known = {pod: s for pod, s in samples.items() if pod in replicas}
    if not known:
        return {pod: 1.0 for pod in replicas}
    fresh = {pod: s.value for pod, s in known.items()
             if now - s.timestamp <= staleness_s}
    if not fresh:
        return {pod: 0.0 for pod in replicas}
    norm = normalize(fresh, direction)
    return {pod: norm.get(pod, 0.0) for pod in replicas}


@dataclass(frozen=True)
class ScoreboardEntry:
    scores: Mapping[str, float]
    refreshed_at: float


class ReplicaScoreBoard:
    """Per-service normalized replica scores, refreshed periodically."""

    def __init__(self):
        self._entries: dict[str, ScoreboardEntry] = {}

    def get(self, service: str) -> Optional[ScoreboardEntry]:
        return self._entries.get(service)

    def remove(self, service: str) -> None:
        self._entries.pop(service, None)

    def services(self) -> list[str]:
        return sorted(self._entries)

    def view(self) -> dict:
        return dict(self._entries)

    def put(self, service: str, scores: Mapping[str, float], now: float) -> ScoreboardEntry:
        entry = ScoreboardEntry(dict(scores), now)
        self._entries[service] = entry
        return entry

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["service", "pod", "score", "timestamp"])
            for service in self.services():
                entry = self._entries[service]
                for pod in sorted(entry.scores):
                    writer.writerow([service, pod, repr(entry.scores[pod]),
                                     repr(entry.refreshed_at)])


def refresh_scoreboard(board: ReplicaScoreBoard, service: str,
                       replica_nodes: Mapping[str, str],
                       latency_of: Callable[[str], float],
                       store: MetricStore, spec: Optional[MetricSpec],
                       now: float, staleness_s: float = 90.0) -> Optional[ScoreboardEntry]:
    """Recompute one service's replica scores from a reference point.

    `replica_nodes` maps the service's running replicas to their nodes and
    `latency_of` gives the one-way latency from the reference point to a
    node.  Scores combine the normalized metric and latency values with the
    service's configured weights; with no metric configured the score is the
    latency component alone.  A service without running replicas is dropped
    from the board.
    """
    if not replica_nodes:
        board.remove(service)
        return None
    replicas = sorted(replica_nodes)
    lat = normalize({pod: latency_of(replica_nodes[pod]) for pod in replicas},
                    LOWER_IS_BETTER)
    if spec is None:
        mv = {pod: 1.0 for pod in replicas}
        mw, lw = 0.0, 1.0
    else:
        mv = metric_scores(store.service_samples(service), replicas,
                           spec.direction, now, staleness_s)
        mw, lw = spec.metric_weight, spec.latency_weight
    scores = {pod: mv[pod] * mw + lat[pod] * lw for pod in replicas}
    return board.put(service, scores, now)
