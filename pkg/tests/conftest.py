import numpy as np
import pytest

from fogsim.cluster import ClusterState, Node, Topology

# Table-style topology used across the suite: four zones of two workers
# hanging off one core switch.
ZONES = {"P1": ("P1-A", "P1-B"), "P2": ("P2-A", "P2-B"),
         "P3": ("P3-A", "P3-B"), "P4": ("P4-A", "P4-B")}
UPLINKS = {"P1": 0.5, "P2": 0.8, "P3": 1.0, "P4": 1.2}


def make_topology(**kwargs) -> Topology:
    return Topology(ZONES, UPLINKS, **kwargs)


def make_state(cores: int = 4, cpu_capacity: int = 4000,
               rt_runtime_us: int = 950_000) -> ClusterState:
    topology = make_topology()
    nodes = [Node(id=n, zone=z, cores=cores, cpu_capacity=cpu_capacity,
                  rt_runtime_us=rt_runtime_us)
             for z, ns in ZONES.items() for n in ns]
    return ClusterState(nodes, topology)


@pytest.fixture
def topology() -> Topology:
    return make_topology()


@pytest.fixture
def state() -> ClusterState:
    return make_state()


def walk_frequencies(chain, draws: int, seed: int) -> np.ndarray:
    """Monte-Carlo oracle for rule chains: simulate the sequential walk
    (rule i accepts with its own probability, last rule always accepts)
    independently of the chain algebra, and return selection frequencies."""
    rng = np.random.default_rng(seed)
    n = len(chain.replicas)
    accept = rng.random((draws, n)) < np.asarray(chain.accept_probabilities)
    accept[:, -1] = True
    first = np.argmax(accept, axis=1)
    return np.bincount(first, minlength=n) / draws
