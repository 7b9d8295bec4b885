"""Next-hop selection from per-neighbor statistics.

Each node scores every neighbor from purely local information and forwards the
head-of-queue packet down the minimum-score edge. Five policies:

    RANDOM_WALK  uniform neighbor choice (baseline)
    ST           mean delivery time per edge, damped by time-since-last-use
    STD          ST weighted by neighbor degree (avoids crowded hubs)
    CD           link load times neighbor degree
    CDT          CD with the ST time element mixed in

Selection is destination-blind: the scores carry no information about where a
packet is going, and a packet reaches its destination when a neighbor's policy
happens to pick it (the destination then absorbs it from its own queue). The
one destination-aware detail is the degree-1 rule for STD/CDT: a leaf neighbor
is excluded from candidacy unless it is the packet's destination, since a leaf
can only ever absorb its own traffic.

ST and STD start blind (their statistic only updates on a delivery), so until
every candidate at a node has a positive score the node forwards uniformly at
random (the bootstrap). CD and CDT need no bootstrap: the all-zero start state
falls through to the uniform tie-break, which behaves the same way.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .rng import RunRNG
from .topology import NetworkTopology


class Algorithm(Enum):
    RANDOM_WALK = "rw"
    ST = "st"
    STD = "std"
    CD = "cd"
    CDT = "cdt"

    @classmethod
    def parse(cls, token: str) -> "Algorithm":
        t = token.strip().lower()
        for algo in cls:
            if t == algo.value or t == algo.name.lower():
                return algo
        raise ValueError(f"unknown algorithm {token!r} (choose from rw, st, std, cd, cdt)")


#: algorithms whose flow statistic is the link load (updates on every send);
#: the others learn only when a delivery credits the edge
SEND_LEARNING = frozenset({Algorithm.CD, Algorithm.CDT, Algorithm.RANDOM_WALK})


@dataclass
class EdgeStats:
    """Statistics a node keeps about one directed edge to a neighbor.

    c: packets successfully sent down the edge (link load).
    n_p / t_p: count and summed delivery times of delivered packets that
        traversed the edge.
    last_tx: time step of the most recent successful send (0 before any).
    learned: whether the edge's flow statistic has left its initial value.
    """

    c: int = 0
    n_p: int = 0
    t_p: int = 0
    last_tx: int = 0
    learned: bool = False


def delta_t(stats: EdgeStats, now: int) -> int:
    """Steps since the edge last transmitted, clamped to >= 1."""
    dt = now - stats.last_tx
    return dt if dt >= 1 else 1


def score_st(stats: EdgeStats, now: int) -> float:
    """Mean delivery time over the edge divided by time since last use.

    Zero until the first delivery credits the edge (n_p == 0). Computed as
    (t_p / n_p) / dt; the selection fast path uses the identical expression.
    """
    if stats.n_p == 0:
        return 0.0
    return (stats.t_p / stats.n_p) / delta_t(stats, now)


def score_std(stats: EdgeStats, now: int, degree: int) -> float:
    """ST score weighted by the neighbor's degree.

    Callers must keep degree-1 neighbors out of the candidate set unless the
    packet is addressed to them (a leaf can only absorb its own packets).
    """
    return score_st(stats, now) * degree


def score_cd(stats: EdgeStats, degree: int) -> int:
    """Link load times neighbor degree."""
    return stats.c * degree


def score_cdt(stats: EdgeStats, now: int, degree: int) -> float:
    """CD score scaled by the ST time element.

    The time element starts at 1 (not 0) so the product stays meaningful
    before any delivery feedback; degree-1 exclusion applies as for STD.
    """
    if stats.n_p == 0:
        te = 1.0
    else:
        te = (stats.t_p / stats.n_p) / delta_t(stats, now)
    return te * (stats.c * degree)


class StatsTable:
    """Flat per-directed-edge statistics for every node of a topology.

    Directed edge u -> v occupies slot s with indptr[u] <= s < indptr[u+1]
    and nbr[s] == v (the CSR layout of the topology). Plain Python lists keep
    scalar access cheap in the simulation loop.
    """

    __slots__ = (
        "topology", "indptr", "nbr", "nbr_deg", "c", "n_p", "t_p", "last_tx",
        "learned", "learn_on_send", "learned_count", "slot_maps", "n_slots",
    )

    def __init__(self, topology: NetworkTopology, learn_on_send: bool):
        self.topology = topology
        self.indptr = topology.indptr.tolist()
        self.nbr = topology.flat_neighbors.tolist()
        self.nbr_deg = [topology.degrees[v] for v in self.nbr]
        self.n_slots = len(self.nbr)
        self.c = [0] * self.n_slots
        self.n_p = [0] * self.n_slots
        self.t_p = [0] * self.n_slots
        self.last_tx = [0] * self.n_slots
        self.learned = bytearray(self.n_slots)
        self.learn_on_send = learn_on_send
        self.learned_count = 0
        self.slot_maps = [
            {self.nbr[s]: s for s in range(self.indptr[u], self.indptr[u + 1])}
            for u in range(topology.node_count)
        ]

    @classmethod
    def for_algorithm(cls, topology: NetworkTopology, algorithm: Algorithm) -> "StatsTable":
        return cls(topology, learn_on_send=algorithm in SEND_LEARNING)

    def slot(self, u: int, v: int) -> int:
        s = self.slot_maps[u].get(v, -1)
        if s < 0:
            raise KeyError(f"{v} is not a neighbor of {u}")
        return s

    def edge_stats(self, u: int, v: int) -> EdgeStats:
        """Copy of the stats node u keeps about neighbor v."""
        s = self.slot(u, v)
        return EdgeStats(
            c=self.c[s], n_p=self.n_p[s], t_p=self.t_p[s],
            last_tx=self.last_tx[s], learned=bool(self.learned[s]),
        )

    def record_send(self, u: int, v: int, now: int) -> int:
        """Account a successful send on u -> v; returns the transmission gap
        (now - previous last_tx) sampled for the waiting-interval distribution."""
        s = self.slot_maps[u][v]
        gap = now - self.last_tx[s]
        self.c[s] += 1
        self.last_tx[s] = now
        if self.learn_on_send and not self.learned[s]:
            self.learned[s] = 1
            self.learned_count += 1
        return gap

    def record_delivery(self, u: int, v: int, duration: int) -> None:
        """Credit a delivered packet that traversed u -> v with its delivery time."""
        s = self.slot_maps[u][v]
        self.n_p[s] += 1
        self.t_p[s] += duration
        if not self.learn_on_send and not self.learned[s]:
            self.learned[s] = 1
            self.learned_count += 1

    def learned_fraction(self) -> float:
        return self.learned_count / self.n_slots


def select_next_hop(
    node: int,
    dest: int,
    topology: NetworkTopology,
    table: StatsTable,
    algorithm: Algorithm,
    now: int,
    rng: RunRNG,
    bootstrap: bool = True,
) -> int:
    """Choose the neighbor to forward a packet to. Returns the neighbor index.

    Selection order:
      1. candidates = all neighbors, minus degree-1 neighbors for STD/CDT
         unless such a neighbor is the packet's destination (falling back to
         all neighbors if the exclusion empties the set);
      2. ST/STD with bootstrap on: any zero-score candidate -> uniform draw
         over the candidates;
      3. otherwise argmin of the score, ties broken by one uniform draw over
         the tied candidates in adjacency order.

    RANDOM_WALK makes a single uniform draw over all neighbors. Consumes
    exactly one `rng` draw when a uniform/tie choice happens and none
    otherwise.
    """
    indptr = table.indptr
    nbr = table.nbr
    lo = indptr[node]
    hi = indptr[node + 1]
    count = hi - lo
    if count == 0:
        raise RuntimeError(f"node {node} has no neighbors")

    if algorithm is Algorithm.RANDOM_WALK:
        return nbr[lo + rng.randint(count)]

    nbr_deg = table.nbr_deg
    exclude_leaves = algorithm is Algorithm.STD or algorithm is Algorithm.CDT
    if exclude_leaves:
        cand = [s for s in range(lo, hi) if nbr_deg[s] > 1 or nbr[s] == dest]
        if not cand:
            cand = list(range(lo, hi))
    else:
        cand = list(range(lo, hi))

    n_p = table.n_p
    if bootstrap and (algorithm is Algorithm.ST or algorithm is Algorithm.STD):
        for s in cand:
            if n_p[s] == 0:  # zero score; fall back to a random walk step
                return nbr[cand[rng.randint(len(cand))]]

    c = table.c
    t_p = table.t_p
    last_tx = table.last_tx
    best = None
    ties: list[int] = []
    for s in cand:
        if algorithm is Algorithm.CD:
            sc = c[s] * nbr_deg[s]
        elif algorithm is Algorithm.CDT:
            if n_p[s] == 0:
                te = 1.0
            else:
                dt = now - last_tx[s]
                te = (t_p[s] / n_p[s]) / (dt if dt >= 1 else 1)
            sc = te * (c[s] * nbr_deg[s])
        else:  # ST or STD
            if n_p[s] == 0:
                sc = 0.0
            else:
                dt = now - last_tx[s]
                sc = (t_p[s] / n_p[s]) / (dt if dt >= 1 else 1)
            if algorithm is Algorithm.STD:
                sc = sc * nbr_deg[s]
        if best is None or sc < best:
            best = sc
            ties = [s]
        elif sc == best:
            ties.append(s)

    if len(ties) == 1:
        return nbr[ties[0]]
    return nbr[ties[rng.randint(len(ties))]]
