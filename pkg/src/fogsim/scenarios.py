"""Bundled experiment scenarios and programmatic variants."""

from __future__ import annotations

from dataclasses import replace
from importlib import resources
from pathlib import Path

from .cluster import DeadlinePolicy, RtProcessSpec
from .fogservice import FogServiceSpec
from .scenario_io import load_scenario, parse_scenario
from .simulator import ScenarioConfig, WorkloadEvent

BUNDLED = (
    "fig5-dependencies",
    "fig6-realtime",
    "fig6-deadline",
    "fig7-monitor",
    "fig9-loadbalancer",
)


def _bundled_text(name: str) -> str:
    ref = resources.files(__package__) / "scenarios" / f"{name}.ini"
    return ref.read_text()


def load_bundled(name: str) -> ScenarioConfig:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled scenario: {name}")
    return parse_scenario(_bundled_text(name), name_hint=name)


def list_scenarios() -> list[tuple[str, str]]:
    """(name, description) for every bundled scenario."""
    return [(name, load_bundled(name).description) for name in BUNDLED]


def resolve(name_or_path: str) -> ScenarioConfig:
    """Load a bundled scenario by name, or any scenario file by path."""
    if name_or_path in BUNDLED:
        return load_bundled(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise FileNotFoundError(f"scenario not found: {name_or_path}")
    return load_scenario(path)


def deadline_preemption_variant() -> ScenarioConfig:
    """fig6-deadline with priorities: the final high-utilization pod arrives
    after the cluster has filled up and must preempt low-priority RT pods.

    Seven high-utilization pods (priority 10) and eight low ones (priority
    0) deploy first; the trailing high pod arrives at t=5 when every node
    already carries at least 0.6 of RT utilization, so only eviction of two
    low pods can admit it.
    """
    base = load_bundled("fig6-deadline")
    services = []
    for spec in base.services:
        if spec.name == "high":
            services.append(replace(spec, replicas=7, priority_class=10))
        else:
            services.append(spec)
    services.append(FogServiceSpec(
        name="high-last", replicas=1, cpu_request=100, cpu_limit=100,
        priority_class=10,
        rt_processes=(RtProcessSpec(policy=DeadlinePolicy(600_000, 1_000_000),
                                    name_substring="worker"),)))
    workload = (
        WorkloadEvent(0.0, "deploy", (("high", "low"), None)),
        WorkloadEvent(5.0, "deploy", (("high-last",), None)),
    )
    return replace(base, name="fig6-deadline-preemption",
                   description="fig6-deadline variant with priorities: the last "
                               "high-utilization pod preempts two low-priority pods.",
                   services=tuple(services), workload=workload,
                   repetitions=5, ci_repetitions=5)
