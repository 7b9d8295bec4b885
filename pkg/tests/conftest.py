"""Shared fixtures and the independent routing oracle used by several suites."""

from __future__ import annotations

import numpy as np
import pytest

from routesim import Algorithm, NetworkTopology, RunRNG, StatsTable


def make_topology(adjacency) -> NetworkTopology:
    return NetworkTopology(adjacency)


def brute_force_next_hop(
    node: int,
    dest: int,
    topology: NetworkTopology,
    table: StatsTable,
    algorithm: Algorithm,
    now: int,
    rng: RunRNG,
    bootstrap: bool = True,
) -> int:
    """Naive re-evaluation of the selection rule, written independently of
    routesim.routing: recompute every neighbor score from the raw statistics,
    list the candidates explicitly, and consume the shared RNG stream exactly
    once when a uniform/tie choice is made."""
    neighbors = list(topology.adjacency[node])
    if algorithm is Algorithm.RANDOM_WALK:
        return neighbors[rng.randint(len(neighbors))]

    def raw(v):
        return table.edge_stats(node, v)

    def score(v) -> float:
        st = raw(v)
        k = topology.degrees[v]
        dt = max(1, now - st.last_tx)
        mean_time = 0.0 if st.n_p == 0 else (st.t_p / st.n_p) / dt
        if algorithm is Algorithm.ST:
            return mean_time
        if algorithm is Algorithm.STD:
            return mean_time * k
        if algorithm is Algorithm.CD:
            return st.c * k
        time_element = 1.0 if st.n_p == 0 else mean_time
        return time_element * (st.c * k)

    if algorithm in (Algorithm.STD, Algorithm.CDT):
        candidates = [v for v in neighbors if topology.degrees[v] > 1 or v == dest]
        if not candidates:
            candidates = neighbors
    else:
        candidates = neighbors

    if bootstrap and algorithm in (Algorithm.ST, Algorithm.STD):
        if any(score(v) == 0 for v in candidates):
            return candidates[rng.randint(len(candidates))]

    scores = [score(v) for v in candidates]
    best = min(scores)
    ties = [v for v, s in zip(candidates, scores) if s == best]
    if len(ties) == 1:
        return ties[0]
    return ties[rng.randint(len(ties))]


def random_selection_instance(rng: np.random.Generator):
    """A randomized (topology, table, node, dest, algorithm, now, bootstrap)
    instance around a hub node 0 with <= 10 neighbors of assorted degrees."""
    k = int(rng.integers(1, 11))
    adjacency = [list(range(1, k + 1))]
    for _ in range(k):
        adjacency.append([0])
    for i in range(1, k + 1):
        for _ in range(int(rng.integers(0, 4))):
            adjacency[i].append(len(adjacency))
            adjacency.append([i])
    topo = NetworkTopology(adjacency)

    algorithm = list(Algorithm)[int(rng.integers(len(Algorithm)))]
    table = StatsTable.for_algorithm(topo, algorithm)
    now = int(rng.integers(1, 60))
    for s in range(table.n_slots):
        table.c[s] = int(rng.integers(0, 8))
        n_p = int(rng.integers(0, 4))
        table.n_p[s] = n_p
        table.t_p[s] = n_p * int(rng.integers(1, 9))
        table.last_tx[s] = int(rng.integers(0, now + 1))

    # destination: sometimes a neighbor of 0 (possibly degree-1), sometimes a
    # far leaf, never 0 itself
    far = [v for v in range(1, topo.node_count) if v not in set(adjacency[0])]
    if far and rng.random() < 0.5:
        dest = int(far[int(rng.integers(len(far)))])
    else:
        dest = int(adjacency[0][int(rng.integers(k))])
    bootstrap = bool(rng.random() < 0.8)
    return topo, table, 0, dest, algorithm, now, bootstrap


@pytest.fixture(scope="session")
def small_ba():
    from routesim import generate_ba

    return generate_ba(50, 2, seed=7)
