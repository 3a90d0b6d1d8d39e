"""Scenario files: INI-style sections describing topology, services,
scheduler arms, monitor/balancer settings, and a timed workload script.

Sections: [scenario], [topology], [nodes], one [service <name>] per
service, one [arm <name>] per scheduler configuration to run, optional
[config <name>] entries for deploy-time overrides, [monitor],
[loadbalancer], and [workload] with one directive per line:

    at <t> deploy <service...> [using=<config>]
    at <t> pin <pod> <node>
    at <t> metric <service> <pod> <value>
    at <t> requests client=<node> service=<name> rate_hz=<hz> count=<n>
    at <t> link <zone> <one-way-ms>
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .cluster import DeadlinePolicy, DependencyRef, FifoPolicy, RtProcessSpec
from .fogservice import FogServiceSpec, LocationScope, validate
from .simulator import (ArmSpec, LbSettings, MonitorSettings, NodeSettings,
                        ScenarioConfig, TopologySpec, WorkloadEvent)
from .telemetry import MetricSpec


class ScenarioParseError(ValueError):
    pass


def _tokens_to_kwargs(tokens: list[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioParseError(f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        out[key] = value
    return out


def _parse_rt_process(line: str) -> RtProcessSpec:
    tokens = line.split()
    kind, kwargs = tokens[0], _tokens_to_kwargs(tokens[1:])
    pid = int(kwargs["pid"]) if "pid" in kwargs else None
    name = kwargs.get("name")
    if kind == "deadline":
        policy = DeadlinePolicy(int(kwargs["runtime_us"]), int(kwargs["period_us"]),
                                int(kwargs.get("deadline_us", 0)))
    elif kind == "fifo":
        policy = FifoPolicy(int(kwargs["priority"]), float(kwargs["cpu"]))
    else:
        raise ScenarioParseError(f"unknown rt process kind: {kind}")
    if pid is None and name is None:
        name = ""  # matches any process
    return RtProcessSpec(policy=policy, pid=pid, name_substring=name)


def _parse_dependency(line: str) -> DependencyRef:
    tokens = line.split()
    kwargs = _tokens_to_kwargs(tokens[1:])
    return DependencyRef(
        target_service=tokens[0],
        dep_weight=float(kwargs.get("weight", 1.0)),
        latency_weight=float(kwargs.get("lw", 0.5)),
        metric_weight=float(kwargs.get("mw", 0.5)))


def _parse_metric(value: str) -> MetricSpec:
    tokens = value.split()
    if len(tokens) < 2:
        raise ScenarioParseError(f"metric needs a name and direction: {value!r}")
    kwargs = _tokens_to_kwargs(tokens[2:])
    return MetricSpec(name=tokens[0], direction=tokens[1],
                      metric_weight=float(kwargs.get("mw", 0.5)),
                      latency_weight=float(kwargs.get("lw", 0.5)))


def _parse_service(name: str, section) -> FogServiceSpec:
    locations = None
    if "locations" in section:
        locations = []
        for tok in section["locations"].split():
            loc, _, count = tok.partition(":")
            config = {}
            if "config." + loc in section:
                config = _tokens_to_kwargs(section["config." + loc].split())
            locations.append(LocationScope(loc, int(count) if count else 1, config))
    deps = tuple(_parse_dependency(line)
                 for line in section.get("depends_on", "").splitlines() if line.strip())
    procs = tuple(_parse_rt_process(line)
                  for line in section.get("rt_processes", "").splitlines() if line.strip())
    metric = _parse_metric(section["metric"]) if "metric" in section else None
    spec = FogServiceSpec(
        name=name,
        replicas=section.getint("replicas", 1),
        locations=locations,
        cpu_request=section.getint("cpu_request", 100),
        cpu_limit=section.getint("cpu_limit", section.getint("cpu_request", 100)),
        rt_limit=section.getfloat("rt_limit", 0.0),
        rt_processes=procs,
        priority_class=section.getint("priority_class", 0),
        dependencies=deps,
        metric=metric,
        runtime_class=section.get("runtime_class", "container"))
    problems = validate(spec)
    if problems:
        raise ScenarioParseError(f"service {name}: " + "; ".join(problems))
    return spec


def _parse_arm(name: str, section) -> ArmSpec:
    plugins = []
    for tok in section.get("plugins", "baseline:1.0").split():
        pname, _, weight = tok.partition(":")
        plugins.append((pname, float(weight) if weight else 1.0))
    return ArmSpec(name=name, plugins=tuple(plugins),
                   tie_break=section.get("tie_break", "lexicographic"),
                   lb_policy=section.get("lb_policy", "weighted"))


def _parse_workload_line(line: str) -> WorkloadEvent:
    tokens = line.split()
    if len(tokens) < 3 or tokens[0] != "at":
        raise ScenarioParseError(f"workload line must start with 'at <t>': {line!r}")
    at = float(tokens[1])
    action = tokens[2]
    rest = tokens[3:]
    if action == "deploy":
        using = None
        names = []
        for tok in rest:
            if tok.startswith("using="):
                using = tok.split("=", 1)[1]
            else:
                names.append(tok)
        if not names:
            raise ScenarioParseError(f"deploy needs at least one service: {line!r}")
        return WorkloadEvent(at, "deploy", (tuple(names), using))
    if action == "pin":
        return WorkloadEvent(at, "pin", (rest[0], rest[1]))
    if action == "metric":
        return WorkloadEvent(at, "metric", (rest[0], rest[1], float(rest[2])))
    if action == "requests":
        kwargs = _tokens_to_kwargs(rest)
        return WorkloadEvent(at, "requests", (kwargs["client"], kwargs["service"],
                                              float(kwargs["rate_hz"]),
                                              int(kwargs["count"])))
    if action == "link":
        return WorkloadEvent(at, "link", (rest[0], float(rest[1])))
    raise ScenarioParseError(f"unknown workload action: {action}")


def parse_scenario(text: str, name_hint: str = "") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # zone and node names are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioParseError(str(exc)) from None

    for required in ("scenario", "topology", "workload"):
        if required not in parser:
            raise ScenarioParseError(f"missing [{required}] section")

    meta = parser["scenario"]
    topo = parser["topology"]
    zones = {}
    uplinks = {}
    for key, value in topo.items():
        if key.startswith("zone."):
            zones[key[5:]] = tuple(value.split())
        elif key.startswith("uplink."):
            uplinks[key[7:]] = float(value)
    if not zones:
        raise ScenarioParseError("topology defines no zones")
    topology = TopologySpec(zones=zones, uplinks_ms=uplinks,
                            intra_node_ms=topo.getfloat("intra_node_ms", 0.02),
                            intra_zone_ms=topo.getfloat("intra_zone_ms", 0.01))

    nodes = NodeSettings()
    if "nodes" in parser:
        sect = parser["nodes"]
        overrides = {}
        for key, value in sect.items():
            if key.startswith("override."):
                _, node_id, attr = key.split(".", 2)
                overrides.setdefault(node_id, {})[attr] = int(value)
        nodes = NodeSettings(cores=sect.getint("cores", 4),
                             cpu_capacity=sect.getint("cpu_capacity", 4000),
                             rt_period_us=sect.getint("rt_period_us", 1_000_000),
                             rt_runtime_us=sect.getint("rt_runtime_us", 950_000),
                             overrides=overrides)

    services = []
    arms = []
    named = []
    for section_name in parser.sections():
        if section_name.startswith("service "):
            services.append(_parse_service(section_name.split(" ", 1)[1],
                                           parser[section_name]))
        elif section_name.startswith("arm "):
            arms.append(_parse_arm(section_name.split(" ", 1)[1],
                                   parser[section_name]))
        elif section_name.startswith("config "):
            named.append(_parse_arm(section_name.split(" ", 1)[1],
                                    parser[section_name]))

    monitor = MonitorSettings()
    if "monitor" in parser:
        sect = parser["monitor"]
        monitor = MonitorSettings(enabled=sect.getboolean("enabled", False),
                                  loop_period_s=sect.getfloat("loop_period_s", 10.0),
                                  grace_s=sect.getfloat("grace_s", 120.0),
                                  backoff_s=sect.getfloat("backoff_s", 120.0))

    lb = LbSettings()
    if "loadbalancer" in parser:
        sect = parser["loadbalancer"]
        lb = LbSettings(refresh_period_s=sect.getfloat("refresh_period_s", 30.0),
                        processing_delay_ms=sect.getfloat("processing_delay_ms", 0.005),
                        staleness_periods=sect.getint("staleness_periods", 3))

    workload = tuple(_parse_workload_line(line)
                     for line in parser["workload"].get("events", "").splitlines()
                     if line.strip())

    config = ScenarioConfig(
        name=meta.get("name", name_hint or "scenario"),
        description=meta.get("description", ""),
        seed=meta.getint("seed", 42),
        duration_s=meta.getfloat("duration_s", 10.0),
        repetitions=meta.getint("repetitions", 1),
        ci_repetitions=meta.getint("ci_repetitions", meta.getint("repetitions", 1)),
        sample_period_s=meta.getfloat("sample_period_s", 0.0),
        topology=topology, nodes=nodes, services=tuple(services),
        arms=tuple(arms), named_configs=tuple(named),
        monitor=monitor, lb=lb, workload=workload)
    problems = config.validate()
    if problems:
        raise ScenarioParseError("; ".join(problems))
    return config


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(), name_hint=path.stem)
