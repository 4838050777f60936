"""Deterministic discrete-event multi-node simulator.

Block discovery is a Poisson process per node, proportional to hash
share and inversely to current difficulty; blocks propagate over a full
mesh with sampled link latencies; every node runs longest-chain with
first-seen tie-breaking and the smoothed 30-block retarget. Time is
virtual throughout, so 5,000-block experiments run in seconds. A run is
fully determined by its seed.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field, asdict

TARGET_INTERVAL = 15.0
DIFFICULTY_WINDOW = 30
SMOOTHING = 0.25
CLAMP = 3.0
BLOCK_WEIGHT_LIMIT = 4_000_000
MINIMAL_TX_WU = 240
REGULAR_TX_WU = 1_000


@dataclass(frozen=True)
class SimConfig:
    nodes: int = 5
    latency_range: tuple = (0.05, 0.15)   # seconds, uniform per message
    hash_shares: tuple | None = None      # defaults to equal shares
    block_interval: float = TARGET_INTERVAL
    tx_rate: float = 0.0                  # network-wide arrivals per second
    tx_mix_minimal: float = 0.5           # fraction of 240 WU transactions
    duration_blocks: int = 100
    seed: int = 0

    def shares(self):
        if self.hash_shares is not None:
            total = sum(self.hash_shares)
            return [s / total for s in self.hash_shares]
        return [1.0 / self.nodes] * self.nodes

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        doc = dict(doc)
        for key in ("latency_range", "hash_shares"):
            if key in doc and doc[key] is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


@dataclass
class SimReport:
    total_blocks: int
    orphaned_blocks: int
    orphan_rate: float
    mean_interval: float
    stddev_interval: float
    achieved_tps: float
    tip_agreement: float
    duration: float
    interval_series: list = field(default_factory=list)
    difficulty_series: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SimBlock:
    block_id: int
    parent: int
    height: int
    miner: int
    timestamp: float
    difficulty: float
    ops: tuple = ()


class SimNode:
    def __init__(self, index: int):
        self.index = index
        self.blocks = {0: SimBlock(0, -1, 0, -1, 0.0, 1.0)}
        self.tip = 0
        self.mempool: set = set()
        self.confirmed: set = set()

    def window(self, tip: int):
        headers = []
        cursor = tip
        while cursor != -1 and len(headers) < DIFFICULTY_WINDOW:
            block = self.blocks[cursor]
            headers.append(block)
            cursor = block.parent
        return list(reversed(headers))

    def next_difficulty(self, interval: float) -> float:
        window = self.window(self.tip)
        if len(window) < 2:
            return window[-1].difficulty
        old = window[-1].difficulty
        # The retarget base is the window-average difficulty, not the tip:
        # basing it on the tip while the measured span lags a full window
        # behind makes the loop oscillate instead of converging.
        avg = sum(b.difficulty for b in window) / len(window)
        times = sorted(b.timestamp for b in window)
        actual = max(times[-1] - times[0], 1e-9)
        target = interval * (len(window) - 1)
        ratio = min(max(target / actual, 1.0 / CLAMP), CLAMP)
        return old + SMOOTHING * (avg * ratio - old)

    def branch_set(self, tip: int):
        out = set()
        cursor = tip
        while cursor != -1:
            out.add(cursor)
            cursor = self.blocks[cursor].parent
        return out

    def adopt(self, block: SimBlock) -> bool:
        """Store a block; returns True when the tip changed (reorg-aware)."""
        self.blocks[block.block_id] = block
        if block.height <= self.blocks[self.tip].height:
            return False
        old_branch = self.branch_set(self.tip)
        new_branch = self.branch_set(block.block_id)
        # Conservation: abandoned ops go back to the mempool, newly
        # confirmed ones leave it.
        for bid in old_branch - new_branch:
            for op in self.blocks[bid].ops:
                self.confirmed.discard(op)
                self.mempool.add(op)
        for bid in new_branch - old_branch:
            for op in self.blocks[bid].ops:
                self.mempool.discard(op)
                self.confirmed.add(op)
        self.tip = block.block_id
        return True

    def canonical_chain(self):
        out = []
        cursor = self.tip
        while cursor != -1:
            out.append(self.blocks[cursor])
            cursor = out[-1].parent
        return list(reversed(out))


class Simulation:
    """Event loop shared by all scenarios."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.nodes = [SimNode(i) for i in range(config.nodes)]
        self.shares = config.shares()
        self.hashrate = 1.0
        self.now = 0.0
        self._events: list = []
        self._seq = 0
        self._next_block_id = 1
        self._next_op_id = 0
        self.blocks_mined = 0
        self.mining_stopped = False
        self._pending: dict = {}      # node -> {parent: [blocks]}
        self._mine_tokens = [0] * config.nodes
        self.op_weight: dict = {}
        self.op_created: dict = {}

    # -- event plumbing ------------------------------------------------------

    def _push(self, when: float, kind: str, data: tuple):
        heapq.heappush(self._events, (when, self._seq, kind, data))
        self._seq += 1

    def _latency(self) -> float:
        lo, hi = self.config.latency_range
        return self.rng.uniform(lo, hi) if hi > lo else lo

    def _schedule_mining(self, node_index: int):
        self._mine_tokens[node_index] += 1
        node = self.nodes[node_index]
        difficulty = node.next_difficulty(self.config.block_interval)
        rate = self.shares[node_index] * self.hashrate / \
            (difficulty * self.config.block_interval)
        delay = self.rng.expovariate(rate)
        self._push(self.now + delay, "mine",
                   (node_index, self._mine_tokens[node_index]))

    def reschedule_all_mining(self):
        for i in range(self.config.nodes):
            self._schedule_mining(i)

    # -- handlers -------------------------------------------------------------

    def _fill_block(self, node: SimNode):
        chosen = []
        used = 0
        for op in sorted(node.mempool, key=lambda o: self.op_created.get(o, 0.0)):
            weight = self.op_weight.get(op, REGULAR_TX_WU)
            if used + weight > BLOCK_WEIGHT_LIMIT:
                continue
            chosen.append(op)
            used += weight
        return tuple(chosen)

    def _on_mine(self, node_index: int, token: int):
        if token != self._mine_tokens[node_index] or self.mining_stopped:
            return
        node = self.nodes[node_index]
        parent = node.blocks[node.tip]
        block = SimBlock(self._next_block_id, parent.block_id, parent.height + 1,
                         node_index, self.now,
                         node.next_difficulty(self.config.block_interval),
                         self._fill_block(node))
        self._next_block_id += 1
        self.blocks_mined += 1
        node.adopt(block)
        self.on_block(block, node_index)
        for peer in range(self.config.nodes):
            if peer != node_index:
                self._push(self.now + self._latency(), "recv", (peer, block))
        if self.blocks_mined >= self.config.duration_blocks:
            self.mining_stopped = True
        else:
            self._schedule_mining(node_index)

    def _on_recv(self, node_index: int, block: SimBlock):
        node = self.nodes[node_index]
        if block.block_id in node.blocks:
            return
        if block.parent not in node.blocks:
            self._pending.setdefault(node_index, {}).setdefault(block.parent, []).append(block)
            return
        changed = node.adopt(block)
        # Flush any children that were waiting on this block.
        waiting = self._pending.get(node_index, {}).pop(block.block_id, [])
        for child in waiting:
            self._on_recv(node_index, child)
        if changed and not self.mining_stopped:
            self._schedule_mining(node_index)

    def _on_tx(self, origin: int, op: str, weight: int):
        self.op_weight[op] = weight
        self.op_created[op] = self.now
        self.nodes[origin].mempool.add(op)
        for peer in range(self.config.nodes):
            if peer != origin:
                self._push(self.now + self._latency(), "tx_recv", (peer, op))
        if self.config.tx_rate > 0 and not self.mining_stopped:
            self._schedule_tx()

    def _schedule_tx(self):
        delay = self.rng.expovariate(self.config.tx_rate)
        origin = self.rng.randrange(self.config.nodes)
        op = f"tx{self._next_op_id}"
        self._next_op_id += 1
        weight = MINIMAL_TX_WU if self.rng.random() < self.config.tx_mix_minimal \
            else REGULAR_TX_WU
        self._push(self.now + delay, "tx", (origin, op, weight))

    def on_block(self, block: SimBlock, miner: int):
        """Hook for scenarios; default no-op."""

    # -- main loop -------------------------------------------------------------

    def run(self) -> None:
        self.reschedule_all_mining()
        if self.config.tx_rate > 0:
            self._schedule_tx()
        while self._events:
            when, _, kind, data = heapq.heappop(self._events)
            self.now = when
            if kind == "mine":
                self._on_mine(*data)
            elif kind == "recv":
                self._on_recv(*data)
            elif kind == "tx":
                self._on_tx(*data)
            elif kind == "tx_recv":
                peer, op = data
                if op not in self.nodes[peer].confirmed:
                    self.nodes[peer].mempool.add(op)
        # queue drained: propagation has settled

    def report(self) -> SimReport:
        best = max(self.nodes, key=lambda n: n.blocks[n.tip].height)
        chain = best.canonical_chain()
        canonical_len = len(chain) - 1  # exclude genesis
        orphaned = self.blocks_mined - canonical_len
        intervals = [b2.timestamp - b1.timestamp
                     for b1, b2 in zip(chain[:-1], chain[1:])]
        mean = sum(intervals) / len(intervals) if intervals else 0.0
        var = (sum((x - mean) ** 2 for x in intervals) / len(intervals)
               if intervals else 0.0)
        confirmed_ops = sum(len(b.ops) for b in chain)
        duration = chain[-1].timestamp if len(chain) > 1 else 0.0
        agreement = sum(1 for n in self.nodes if n.tip == best.tip) / len(self.nodes)
        return SimReport(
            total_blocks=self.blocks_mined,
            orphaned_blocks=orphaned,
            orphan_rate=orphaned / self.blocks_mined if self.blocks_mined else 0.0,
            mean_interval=round(mean, 6),
            stddev_interval=round(var ** 0.5, 6),
            achieved_tps=round(confirmed_ops / duration, 6) if duration else 0.0,
            tip_agreement=agreement,
            duration=round(duration, 6),
            interval_series=[round(x, 6) for x in intervals],
            difficulty_series=[round(b.difficulty, 9) for b in chain[1:]])


def run_simulation(config: SimConfig) -> SimReport:
    sim = Simulation(config)
    sim.run()
    return sim.report()


# ---------------------------------------------------------------------------
# Scenarios


class _ShockSimulation(Simulation):
    def __init__(self, config: SimConfig, shock_block: int, multiplier: float):
        super().__init__(config)
        self.shock_block = shock_block
        self.multiplier = multiplier
        self._shocked = False

    def on_block(self, block: SimBlock, miner: int):
        if not self._shocked and self.blocks_mined >= self.shock_block:
            self._shocked = True
            self.hashrate *= self.multiplier
            self.reschedule_all_mining()


def scenario_hashrate_shock(config: SimConfig, shock_block: int,
                            multiplier: float) -> SimReport:
    """Multiply network hash power once `shock_block` blocks are mined."""
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    sim = _ShockSimulation(config, shock_block, multiplier)
    sim.run()
    return sim.report()


def scenario_end_to_end(config: SimConfig, register_at: float | None = None) -> dict:
    """Scripted registration-to-resolution transcript.

    Blocks arrive on the fixed 15 s schedule (a scripted scenario, not
    the Poisson model): a registration broadcast at node 0 is included
    in the first block whose miner has seen it, and resolution succeeds
    at the last node once that block has propagated there.
    """
    if config.nodes < 3:
        raise ValueError("end-to-end scenario needs at least 3 nodes")
    rng = random.Random(config.seed)
    interval = config.block_interval
    if register_at is None:
        register_at = rng.uniform(0, interval)

    def latency():
        lo, hi = config.latency_range
        return rng.uniform(lo, hi) if hi > lo else lo

    # Arrival time of the registration at each node.
    arrival = {0: register_at}
    for peer in range(1, config.nodes):
        arrival[peer] = register_at + latency()

    t_included = None
    block_index = 0
    while t_included is None:
        block_index += 1
        boundary = block_index * interval
        miner = rng.randrange(config.nodes)
        if arrival[miner] <= boundary:
            t_included = boundary
    resolver_node = config.nodes - 1
    t_resolved = t_included + (latency() if miner != resolver_node else 0.0)
    return {
        "registered_at": round(register_at, 6),
        "included_at": round(t_included, 6),
        "resolved_at": round(t_resolved, 6),
        "blocks_waited": block_index,
        "elapsed": round(t_resolved - register_at, 6),
        "within_two_intervals": (t_resolved - register_at) <= 2 * interval,
    }
