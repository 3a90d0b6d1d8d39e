"""Deterministic edge-cluster orchestration engine and discrete-event simulator."""

from .cluster import (ClusterSnapshot, ClusterState, DeadlinePolicy,
                      DependencyRef, FifoPolicy, Node, PodInstance, PodStatus,
                      RtProcessSpec, Topology)
from .dependencies import (markov_matrix, replica_scores, score_dependencies,
                           stationary_distribution)
from .fogservice import FogServiceSpec, LocationScope, expand, validate
from .loadbalancer import (LoadBalancer, RuleChain, chain_probabilities,
                           replica_score, select_replica, uniform_chain)
from .monitor import ClusterMonitor, MonitorConfig, simulate_scheduling
from .realtime import (RealtimePlugin, RtUtilization, node_rt_utilization,
                       pod_rt_utilization, rt_capacity)
from .runtime import (RtPriorityManager, RuntimeDispatcher,
                      SimulatedProcessHost, rt_group_limits)
from .scheduling import (Assigned, Preempted, SchedulerConfig, Unschedulable,
                         run_queue, schedule_one)
from .simulator import (ArmSpec, ScenarioConfig, generate_requests,
                        inject_link_latency, run_scenario)
from .telemetry import (MetricSpec, MetricStore, ReplicaScoreBoard, normalize,
                        path_latency, refresh_scoreboard)

__version__ = "0.1.0"
