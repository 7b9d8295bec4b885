"""Discrete-time transport engine.

Each time step, every node in ascending index order (a) generates a new packet
with probability rate/N, (b) removes and accounts every packet in its queue
addressed to itself, and (c) forwards its head-of-queue packet to the neighbor
picked by the routing policy. Sends land in the receiver's inbox and inboxes
merge into queue tails only after the node loop, so a packet moves at most one
hop per step and results do not depend on iteration order except through the
order random draws are consumed.

Queues are FIFO with a hard capacity: a send to a full neighbor blocks (the
packet stays at the sender's head and retries), and generation into a full
queue is suppressed and counted. Nothing is ever dropped, so the in-flight
load is exactly created - delivered at all times.
"""

from __future__ import annotations

from array import array
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import metrics
from .metrics import Counters, RunReport
from .rng import RunRNG
from .routing import Algorithm, StatsTable, select_next_hop
from .topology import NetworkTopology, generate_ba


class DeliveryMode(Enum):
    # duration credited to each edge of a delivered packet's path:
    # the packet's whole source-to-destination time, or only the remainder
    # downstream of the hop
    TOTAL = "total"
    REMAINING = "remaining"


@dataclass
class SimConfig:
    steps: int
    algorithm: Algorithm
    n: int = 1000
    m: int = 2
    rate: float = 0.1
    queue_cap: int = 1000
    seed: int = 0
    delivery_mode: DeliveryMode = DeliveryMode.TOTAL
    jam_threshold: float = 0.25
    bootstrap: bool = True
    learning_interval: int = 100
    # observability hooks used by validation tests
    keep_paths: bool = False
    keep_event_log: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")
        if not 0 <= self.rate <= self.n:
            raise ValueError(f"rate must lie in [0, n], got {self.rate}")
        if self.queue_cap < 1:
            raise ValueError(f"queue_cap must be >= 1, got {self.queue_cap}")
        if not 0 < self.jam_threshold <= 1:
            raise ValueError(f"jam_threshold must lie in (0, 1], got {self.jam_threshold}")
        if self.learning_interval < 1:
            raise ValueError(f"learning_interval must be >= 1, got {self.learning_interval}")


@dataclass(slots=True)
class Packet:
    id: int
    source: int
    dest: int
    created_at: int
    path: array  # node indices visited, starting at source
    hop_times: array | None = None  # forward times, only in REMAINING mode


@dataclass
class StepEvents:
    generated: int = 0
    delivered: int = 0
    forwarded: int = 0
    blocked: int = 0
    suppressed: int = 0


class SimState:
    """Mutable per-run state: queues, stats, clock, RNG, collected series."""

    def __init__(self, config: SimConfig, topology: NetworkTopology, run_seed):
        n = topology.node_count
        self.config = config
        self.topology = topology
        self.rng = RunRNG(run_seed)
        self.stats = StatsTable.for_algorithm(topology, config.algorithm)
        self.clock = 0
        self.queues: list[deque[Packet]] = [deque() for _ in range(n)]
        self.inboxes: list[list[Packet]] = [[] for _ in range(n)]
        self.counters = Counters()
        self.next_packet_id = 0
        # deliveries: parallel arrays (created_at, delivered_at, hops)
        self.delivery_created: list[int] = []
        self.delivery_completed: list[int] = []
        self.delivery_hops: list[int] = []
        self.load_series = np.zeros(config.steps, dtype=np.int64)
        self.dt_counts = np.zeros(config.steps + 1, dtype=np.int64)
        self.learning_steps: list[int] = [0]
        self.learning_fractions: list[float] = [0.0]
        # per-node count of queued packets addressed to the node itself;
        # lets the deliver phase skip scanning untouched queues
        self._self_pending = [0] * n
        self._has_packets = np.zeros(n, dtype=bool)
        self._touched_inboxes: list[int] = []
        self.delivered_packets: list[Packet] = []  # only if keep_paths
        self.forward_log: list[tuple[int, int, int]] = []  # only if keep_event_log

    def in_flight(self) -> int:
        return self.counters.created - self.counters.delivered


def init(config: SimConfig, topology: NetworkTopology | None = None) -> SimState:
    """Fresh state: empty queues, zeroed statistics, clock 0, seeded RNG.

    The topology and run streams are spawned from config.seed, so the same
    (config, topology) pair always yields bit-identical states.
    """
    topo_ss, run_ss = np.random.SeedSequence(config.seed).spawn(2)
    if topology is None:
        topology = generate_ba(config.n, config.m, np.random.default_rng(topo_ss))
    elif topology.node_count != config.n:
        raise ValueError(
            f"topology has {topology.node_count} nodes but config.n = {config.n}"
        )
    return SimState(config, topology, run_ss)


def inject_packet(state: SimState, source: int, dest: int) -> Packet:
    """Append a fresh packet to `source`'s queue (test/demo hook).

    Counts against capacity and conservation exactly like a generated packet.
    """
    if source == dest:
        raise ValueError("packet destination must differ from its source")
    if len(state.queues[source]) + len(state.inboxes[source]) >= state.config.queue_cap:
        raise ValueError(f"queue at node {source} is full")
    pkt = Packet(
        id=state.next_packet_id,
        source=source,
        dest=dest,
        created_at=state.clock,
        path=array("i", (source,)),
        hop_times=array("i") if state.config.delivery_mode is DeliveryMode.REMAINING else None,
    )
    state.next_packet_id += 1
    state.queues[source].append(pkt)
    state.counters.created += 1
    state._has_packets[source] = True
    return pkt


def update_on_delivery(
    table: StatsTable, packet: Packet, delivered_at: int, mode: DeliveryMode
) -> None:
    """Credit n_p and t_p on every directed edge of the delivered packet's path."""
    path = packet.path
    if len(path) == 0 or path[-1] != packet.dest:
        raise ValueError(f"packet {packet.id}: path does not end at its destination")
    if mode is DeliveryMode.TOTAL:
        d = delivered_at - packet.created_at
        for i in range(len(path) - 1):
            table.record_delivery(path[i], path[i + 1], d)
    else:
        hop_times = packet.hop_times
        if hop_times is None or len(hop_times) != len(path) - 1:
            raise ValueError(f"packet {packet.id}: missing per-hop timestamps")
        for i in range(len(path) - 1):
            table.record_delivery(path[i], path[i + 1], delivered_at - hop_times[i])


def step(state: SimState) -> StepEvents:
    """Advance the simulation one time step; returns this step's event counts."""
    cfg = state.config
    now = state.clock
    if now >= cfg.steps:
        raise RuntimeError(f"simulation already ran its configured {cfg.steps} steps")

    topo = state.topology
    table = state.stats
    rng = state.rng
    queues = state.queues
    inboxes = state.inboxes
    self_pending = state._self_pending
    has_packets = state._has_packets
    touched = state._touched_inboxes
    counters = state.counters
    n = topo.node_count
    cap = cfg.queue_cap
    algorithm = cfg.algorithm
    bootstrap = cfg.bootstrap
    remaining_mode = cfg.delivery_mode is DeliveryMode.REMAINING
    dt_counts = state.dt_counts
    ev = StepEvents()

    # one generation draw per node, consumed as a block
    draws = rng.uniforms(n)
    gen_mask = draws < (cfg.rate / n)
    active = np.flatnonzero(has_packets | gen_mask)

    for u in active.tolist():
        q = queues[u]

        # (a) generate
        if gen_mask[u]:
            if len(q) + len(inboxes[u]) < cap:
                d = rng.randint(n - 1)
                if d >= u:
                    d += 1
                pkt = Packet(
                    id=state.next_packet_id,
                    source=u,
                    dest=d,
                    created_at=now,
                    path=array("i", (u,)),
                    hop_times=array("i") if remaining_mode else None,
                )
                state.next_packet_id += 1
                q.append(pkt)
                counters.created += 1
                ev.generated += 1
                has_packets[u] = True
            else:
                counters.suppressed += 1
                ev.suppressed += 1

        # (b) deliver: remove every packet addressed to this node
        if self_pending[u]:
            kept = deque()
            for pkt in q:
                if pkt.dest != u:
                    kept.append(pkt)
                    continue
                update_on_delivery(table, pkt, now, cfg.delivery_mode)
                state.delivery_created.append(pkt.created_at)
                state.delivery_completed.append(now)
                state.delivery_hops.append(len(pkt.path) - 1)
                counters.delivered += 1
                ev.delivered += 1
                if cfg.keep_paths:
                    state.delivered_packets.append(pkt)
            queues[u] = q = kept
            self_pending[u] = 0

        # (c) forward the head packet, if any
        if q:
            pkt = q[0]
            v = select_next_hop(u, pkt.dest, topo, table, algorithm, now, rng, bootstrap)
            ib = inboxes[v]
            if len(queues[v]) + len(ib) < cap:
                q.popleft()
                pkt.path.append(v)
                if remaining_mode:
                    pkt.hop_times.append(now)
                gap = table.record_send(u, v, now)
                dt_counts[gap] += 1
                if not ib:
                    touched.append(v)
                ib.append(pkt)
                counters.forwarded += 1
                ev.forwarded += 1
                if cfg.keep_event_log:
                    state.forward_log.append((now, u, v))
                if not q:
                    has_packets[u] = False
            else:
                counters.blocked += 1
                ev.blocked += 1
        else:
            has_packets[u] = False

    # merge inboxes into queue tails
    for v in touched:
        ib = inboxes[v]
        sp = 0
        for pkt in ib:
            if pkt.dest == v:
                sp += 1
        queues[v].extend(ib)
        ib.clear()
        if sp:
            self_pending[v] += sp
        has_packets[v] = True
    touched.clear()

    state.load_series[now] = counters.created - counters.delivered
    state.clock = now + 1
    if state.clock % cfg.learning_interval == 0 or state.clock == cfg.steps:
        state.learning_steps.append(state.clock)
        state.learning_fractions.append(table.learned_fraction())
    return ev


def run(config: SimConfig, topology: NetworkTopology | None = None) -> RunReport:
    """Execute a full simulation and package the observables."""
    state = init(config, topology)
    for _ in range(config.steps):
        step(state)
    return build_report(state)


def build_report(state: SimState) -> RunReport:
    """Assemble the RunReport for a (fully or partially) advanced state."""
    cfg = state.config
    steps_done = state.clock
    load = state.load_series[:steps_done]
    dt_values = np.flatnonzero(state.dt_counts)
    jam = metrics.detect_jam(load, cfg.n, cfg.queue_cap, cfg.jam_threshold)
    return RunReport(
        algorithm=cfg.algorithm,
        seed=cfg.seed,
        steps=steps_done,
        node_count=cfg.n,
        queue_cap=cfg.queue_cap,
        load_series=load.copy(),
        delivery_created=np.asarray(state.delivery_created, dtype=np.int64),
        delivery_completed=np.asarray(state.delivery_completed, dtype=np.int64),
        delivery_hops=np.asarray(state.delivery_hops, dtype=np.int64),
        dt_values=dt_values.astype(np.int64),
        dt_counts=state.dt_counts[dt_values].copy(),
        learning_steps=np.asarray(state.learning_steps, dtype=np.int64),
        learning_fractions=np.asarray(state.learning_fractions, dtype=np.float64),
        jam=jam,
        counters=state.counters,
    )
