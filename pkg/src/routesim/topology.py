"""Network construction: scale-free generation, adjacency-matrix ingestion, queries.

The simulator only ever sees a validated, immutable `NetworkTopology`; every
constructor enforces symmetry, no self-loops, no duplicate neighbors, and
connectedness (a packet addressed to an unreachable node would never leave the
network, so disconnected inputs are rejected outright).
"""

from __future__ import annotations

from collections import deque
from typing import Iterator, Sequence

import numpy as np


class TopologyError(ValueError):
    """Base class for invalid graph construction input."""


class ParameterError(TopologyError):
    """Invalid generator parameters (e.g. n <= m or m = 0)."""


class NonSquareMatrixError(TopologyError):
    """Adjacency matrix rows do not form an N x N grid."""


class NonBinaryEntryError(TopologyError):
    """Adjacency matrix contains an entry other than 0 or 1."""


class AsymmetricMatrixError(TopologyError):
    """Entry (i, j) disagrees with entry (j, i)."""


class SelfLoopError(TopologyError):
    """Nonzero diagonal entry / node listed as its own neighbor."""


class DuplicateNeighborError(TopologyError):
    """A node's neighbor list names the same node twice."""


class DisconnectedGraphError(TopologyError):
    """Graph is not connected (or has an isolated node)."""


class NetworkTopology:
    """Immutable undirected graph with ordered adjacency lists.

    Attributes:
        node_count: number of nodes N (indices 0..N-1).
        adjacency: per-node tuple of neighbor indices, in insertion order.
        degrees: per-node degree, always len(adjacency[i]).
        indptr, flat_neighbors: CSR view of the adjacency used by the hot
            simulation loop; directed edge "slot" s covers the edge
            (u -> flat_neighbors[s]) for indptr[u] <= s < indptr[u+1].
    """

    __slots__ = ("node_count", "adjacency", "degrees", "indptr", "flat_neighbors")

    def __init__(self, adjacency: Sequence[Sequence[int]]):
        adj = tuple(tuple(int(v) for v in row) for row in adjacency)
        _validate(adj)
        self.node_count = len(adj)
        self.adjacency = adj
        self.degrees = tuple(len(row) for row in adj)
        self.indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=self.indptr[1:])
        self.flat_neighbors = np.fromiter(
            (v for row in adj for v in row), dtype=np.int64, count=int(self.indptr[-1])
        )

    def neighbors(self, node: int) -> tuple[int, ...]:
        """Ordered neighbor list of `node`; stable across calls."""
        if not 0 <= node < self.node_count:
            raise IndexError(f"node {node} out of range [0, {self.node_count})")
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        if not 0 <= node < self.node_count:
            raise IndexError(f"node {node} out of range [0, {self.node_count})")
        return self.degrees[node]

    @property
    def edge_count(self) -> int:
        return sum(self.degrees) // 2

    @property
    def directed_edge_count(self) -> int:
        return sum(self.degrees)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Undirected edges as (i, j) with i < j, ascending."""
        for i, row in enumerate(self.adjacency):
            for j in row:
                if i < j:
                    yield (i, j)

    def edge_list_text(self) -> str:
        """Edge-list export, one "i j" pair per line with i < j."""
        return "".join(f"{i} {j}\n" for i, j in self.edges())


def _validate(adj: tuple[tuple[int, ...], ...]) -> None:
    n = len(adj)
    if n == 0:
        raise ParameterError("graph must have at least one node")
    sets: list[set[int]] = []
    for i, row in enumerate(adj):
        if not row:
            raise DisconnectedGraphError(f"node {i} is isolated")
        seen = set(row)
        if len(seen) != len(row):
            raise DuplicateNeighborError(f"node {i} lists a neighbor twice")
        if i in seen:
            raise SelfLoopError(f"node {i} is its own neighbor")
        for j in row:
            if not 0 <= j < n:
                raise TopologyError(f"node {i} has out-of-range neighbor {j}")
        sets.append(seen)
    for i, seen in enumerate(sets):
        for j in seen:
            if i not in sets[j]:
                raise AsymmetricMatrixError(f"edge {i}->{j} has no reverse {j}->{i}")
    # connectivity (also rejects isolated nodes for n > 1)
    if n > 1:
        visited = bytearray(n)
        visited[0] = 1
        frontier = deque([0])
        count = 1
        while frontier:
            u = frontier.popleft()
            for v in adj[u]:
                if not visited[v]:
                    visited[v] = 1
                    count += 1
                    frontier.append(v)
        if count != n:
            raise DisconnectedGraphError(f"graph is disconnected ({count}/{n} reachable from node 0)")


def generate_ba(n: int, m: int, seed: int | np.random.Generator = 0) -> NetworkTopology:
    """Grow a preferential-attachment graph: complete core of m+1 nodes, then each
    new node attaches m edges to distinct existing nodes drawn with probability
    proportional to degree (resampling duplicates).

    Total edge count is exactly (m+1)m/2 + m*(n-m-1). Deterministic for a fixed
    (n, m, seed).
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ParameterError(f"n must exceed m, got n={n}, m={m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    adj: list[list[int]] = [[] for _ in range(n)]
    # each node appears once per incident edge; uniform draws from this list
    # realize degree-proportional selection
    repeated: list[int] = []
    for i in range(m + 1):
        for j in range(i + 1, m + 1):
            adj[i].append(j)
            adj[j].append(i)
            repeated.append(i)
            repeated.append(j)

    for new in range(m + 1, n):
        pool_size = len(repeated)  # snapshot: this node's own edges don't feed back
        targets: list[int] = []
        chosen: set[int] = set()
        while len(targets) < m:
            u = rng.random()
            t = repeated[int(u * pool_size)]
            if t not in chosen:
                chosen.add(t)
                targets.append(t)
        for t in targets:
            adj[new].append(t)
            adj[t].append(new)
            repeated.append(new)
            repeated.append(t)

    return NetworkTopology(adj)


def load_adjacency_matrix(text: str) -> NetworkTopology:
    """Parse a whitespace-separated 0/1 adjacency matrix, one row per line.

    Raises a distinct error for each way the matrix can be malformed:
    non-square shape, non-binary entries, asymmetry, nonzero diagonal,
    disconnected graph.
    """
    rows: list[list[int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        entries = []
        for tok in stripped.split():
            if tok == "0":
                entries.append(0)
            elif tok == "1":
                entries.append(1)
            else:
                raise NonBinaryEntryError(f"line {lineno}: entry {tok!r} is not 0 or 1")
        rows.append(entries)
    n = len(rows)
    if n == 0:
        raise NonSquareMatrixError("empty matrix")
    for lineno, row in enumerate(rows, start=1):
        if len(row) != n:
            raise NonSquareMatrixError(f"row {lineno} has {len(row)} entries, expected {n}")
    for i in range(n):
        if rows[i][i] != 0:
            raise SelfLoopError(f"nonzero diagonal at ({i}, {i})")
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                raise AsymmetricMatrixError(f"entry ({i}, {j}) != entry ({j}, {i})")
    adjacency = [[j for j, bit in enumerate(row) if bit] for row in rows]
    return NetworkTopology(adjacency)
