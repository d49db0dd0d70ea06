"""Discrete-event permissioned-ledger simulator.

Models the transaction pipeline of an endorsement-policy ledger: submitted
transactions fan out to endorsing peers (each peer is a single-server queue
with configurable latency), become endorsed once k distinct peers from the
policy set have answered, are batched by an ordering stage that cuts blocks
at a size or timeout bound, and finally pass a serial commit stage that
validates every required endorsement before extending the hash chain.

Time is simulated, not wall-clock, so runs are fast and bit-reproducible
under a fixed seed.  The simulator is not a consensus implementation: there
is one logical orderer and no Byzantine behavior.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

from .encoding import canonical_json

__all__ = [
    "LedgerError",
    "BackpressureError",
    "PeerProfile",
    "EndorsementPolicy",
    "LedgerConfig",
    "Transaction",
    "Block",
    "AccessEvent",
    "LoadReport",
    "LedgerSimulator",
    "run_load",
    "load_reports_csv",
]

GENESIS_PREV_HASH = "00" * 32


class LedgerError(Exception):
    pass


class BackpressureError(LedgerError):
    """Submission queue beyond configured capacity."""


@dataclass(frozen=True)
class PeerProfile:
    peer_id: str
    latency_mean_ms: float = 20.0
    latency_jitter_ms: float = 5.0
    alive: bool = True

    def __post_init__(self):
        if self.latency_mean_ms < 0 or self.latency_jitter_ms < 0:
            raise ValueError("latencies must be non-negative")


@dataclass(frozen=True)
class EndorsementPolicy:
    """k-of-any over the named peer set."""

    k: int
    peer_set: tuple[str, ...]

    def __post_init__(self):
        if not (1 <= self.k <= len(self.peer_set)):
            raise ValueError(f"policy requires 1 <= k <= {len(self.peer_set)}")


@dataclass(frozen=True)
class LedgerConfig:
    max_block_size: int = 10
    batch_timeout_ms: float = 100.0
    validation_mean_ms: float = 20.0
    validation_jitter_ms: float = 5.0
    queue_capacity: int = 100_000
    seed: int = 0


@dataclass
class Transaction:
    tx_id: str
    payload: dict
    submit_time: float
    endorsements: list[tuple[str, str]] = field(default_factory=list)
    commit_time: Optional[float] = None
    status: str = "pending"  # pending | endorsed | committed | endorsement-failed

    @property
    def latency_ms(self) -> Optional[float]:
        if self.commit_time is None:
            return None
        return self.commit_time - self.submit_time


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: str
    tx_list: tuple[Transaction, ...]
    block_hash: str
    cut_time: float
    commit_time: float

    @staticmethod
    def compute_hash(height: int, prev_hash: str, tx_ids: Sequence[str]) -> str:
        h = hashlib.sha256()
        h.update(height.to_bytes(8, "big"))
        h.update(bytes.fromhex(prev_hash))
        for tx_id in tx_ids:
            h.update(bytes.fromhex(tx_id))
        return h.hexdigest()


@dataclass(frozen=True)
class AccessEvent:
    event_id: str
    timestamp: float
    requestor: str
    patient_gid: str
    operation: str
    decision: str
    rule_id: str
    one_time_token_id: Optional[str] = None

    def to_payload(self) -> dict:
        return {
            "type": "access_event",
            "event_id": self.event_id,
            "timestamp": self.timestamp,
            "requestor": self.requestor,
            "patient_gid": self.patient_gid,
            "operation": self.operation,
            "decision": self.decision,
            "rule_id": self.rule_id,
            "one_time_token_id": self.one_time_token_id,
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "AccessEvent":
        return cls(
            event_id=payload["event_id"],
            timestamp=payload["timestamp"],
            requestor=payload["requestor"],
            patient_gid=payload["patient_gid"],
            operation=payload["operation"],
            decision=payload["decision"],
            rule_id=payload["rule_id"],
            one_time_token_id=payload.get("one_time_token_id"),
        )


@dataclass(frozen=True)
class LoadReport:
    send_rate_tps: float
    duration_s: float
    policy_k: int
    submitted: int
    committed: int
    throughput_min_tps: float
    throughput_avg_tps: float
    throughput_max_tps: float
    latency_min_ms: float
    latency_avg_ms: float
    latency_max_ms: float


class LedgerSimulator:
    """Single event loop owning all simulator state.

    Endorsement "signatures" are placeholders (peer id plus payload hash);
    the real attribute signatures live inside access-event payloads.
    """

    def __init__(
        self,
        peers: Sequence[PeerProfile],
        policy: EndorsementPolicy,
        config: LedgerConfig = LedgerConfig(),
    ):
        known = {p.peer_id for p in peers}
        missing = set(policy.peer_set) - known
        if missing:
            raise ValueError(f"policy references unknown peers {sorted(missing)}")
        self.peers = {p.peer_id: p for p in peers}
        self.policy = policy
        self.config = config
        self.rng = random.Random(config.seed)
        self.now = 0.0
        self._events: list[tuple[float, int, str, dict]] = []
        self._seq = 0
        self._nonce = 0
        self.transactions: dict[str, Transaction] = {}
        self._in_flight = 0
        self._peer_busy: dict[str, float] = {p: 0.0 for p in self.peers}
        self._batch: list[str] = []
        self._batch_epoch = 0
        self._committer_free = 0.0
        self.blocks: list[Block] = [
            Block(0, GENESIS_PREV_HASH, (), Block.compute_hash(0, GENESIS_PREV_HASH, ()), 0.0, 0.0)
        ]
        self._committed_events: list[AccessEvent] = []

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, at: float, kind: str, data: dict) -> None:
        heapq.heappush(self._events, (at, self._seq, kind, data))
        self._seq += 1

    def _sample(self, mean: float, jitter: float) -> float:
        if jitter <= 0:
            return mean
        return max(0.0, self.rng.uniform(mean - jitter, mean + jitter))

    # -- submission ----------------------------------------------------------

    def submit_transaction(self, payload: Mapping, now: Optional[float] = None) -> str:
        """Enter the endorsement stage; returns the stable transaction id."""
        at = self.now if now is None else max(self.now, float(now))
        if self._in_flight >= self.config.queue_capacity:
            raise BackpressureError(f"in-flight transactions exceed capacity {self.config.queue_capacity}")
        self._nonce += 1
        tx_id = hashlib.sha256(
            canonical_json(dict(payload)) + repr(at).encode() + self._nonce.to_bytes(8, "big")
        ).hexdigest()
        tx = Transaction(tx_id, dict(payload), at)
        self.transactions[tx_id] = tx
        self._in_flight += 1
        alive = [p for p in self.policy.peer_set if self.peers[p].alive]
        if len(alive) < self.policy.k:
            tx.status = "endorsement-failed"
            self._in_flight -= 1
            return tx_id
        for peer_id in alive:
            profile = self.peers[peer_id]
            start = max(at, self._peer_busy[peer_id])
            done = start + self._sample(profile.latency_mean_ms, profile.latency_jitter_ms)
            self._peer_busy[peer_id] = done
            self._schedule(done, "endorse", {"tx_id": tx_id, "peer_id": peer_id})
        return tx_id

    # -- event handlers ------------------------------------------------------

    def _handle_endorse(self, data: dict) -> None:
        tx = self.transactions[data["tx_id"]]
        peer_id = data["peer_id"]
        placeholder = hashlib.sha256(
            (peer_id + tx.tx_id).encode()
        ).hexdigest()[:16]
        tx.endorsements.append((peer_id, placeholder))
        if tx.status != "pending":
            return
        if len({p for p, _ in tx.endorsements}) >= self.policy.k:
            tx.status = "endorsed"
            self._enter_ordering(tx)

    def _enter_ordering(self, tx: Transaction) -> None:
        self._batch.append(tx.tx_id)
        if len(self._batch) >= self.config.max_block_size:
            self._cut_block()
        elif len(self._batch) == 1:
            self._schedule(
                self.now + self.config.batch_timeout_ms,
                "batch_timeout",
                {"epoch": self._batch_epoch},
            )

    def _handle_batch_timeout(self, data: dict) -> None:
        if data["epoch"] == self._batch_epoch and self._batch:
            self._cut_block()

    def _cut_block(self) -> None:
        tx_ids = self._batch
        self._batch = []
        self._batch_epoch += 1
        service = 0.0
        for tx_id in tx_ids:
            for _ in range(self.policy.k):
                service += self._sample(self.config.validation_mean_ms, self.config.validation_jitter_ms)
        start = max(self.now, self._committer_free)
        done = start + service
        self._committer_free = done
        self._schedule(done, "block_commit", {"tx_ids": tx_ids, "cut_time": self.now})

    def _handle_block_commit(self, data: dict) -> None:
        txs = []
        for tx_id in data["tx_ids"]:
            tx = self.transactions[tx_id]
            tx.commit_time = self.now
            tx.status = "committed"
            self._in_flight -= 1
            txs.append(tx)
        prev = self.blocks[-1]
        height = prev.height + 1
        block_hash = Block.compute_hash(height, prev.block_hash, [t.tx_id for t in txs])
        self.blocks.append(
            Block(height, prev.block_hash, tuple(txs), block_hash, data["cut_time"], self.now)
        )
        for tx in txs:
            if tx.payload.get("type") == "access_event":
                self._committed_events.append(AccessEvent.from_payload(tx.payload))

    # -- execution -----------------------------------------------------------

    def step(self) -> bool:
        if not self._events:
            return False
        at, _, kind, data = heapq.heappop(self._events)
        self.now = max(self.now, at)
        if kind == "endorse":
            self._handle_endorse(data)
        elif kind == "batch_timeout":
            self._handle_batch_timeout(data)
        elif kind == "block_commit":
            self._handle_block_commit(data)
        return True

    def run_until_idle(self) -> None:
        while self.step():
            pass

    # -- queries -------------------------------------------------------------

    def committed_transactions(self) -> Iterator[Transaction]:
        for block in self.blocks:
            yield from block.tx_list

    def append_access_event(self, event: AccessEvent, now: Optional[float] = None) -> str:
        return self.submit_transaction(event.to_payload(), now)

    def query_events(
        self,
        patient_gid: Optional[str] = None,
        requestor: Optional[str] = None,
        decision: Optional[str] = None,
    ) -> list[AccessEvent]:
        """Committed access events only (read-committed isolation)."""
        out = []
        for event in self._committed_events:
            if patient_gid is not None and event.patient_gid != patient_gid:
                continue
            if requestor is not None and event.requestor != requestor:
                continue
            if decision is not None and event.decision != decision:
                continue
            out.append(event)
        return out

    def verify_chain(self) -> bool:
        """Recompute every block hash from genesis."""
        prev_hash = GENESIS_PREV_HASH
        for height, block in enumerate(self.blocks):
            if block.height != height or block.prev_hash != prev_hash:
                return False
            expected = Block.compute_hash(height, prev_hash, [t.tx_id for t in block.tx_list])
            if block.block_hash != expected:
                return False
            prev_hash = block.block_hash
        return True

    # -- persistence (committed state only; run to idle before saving) -------

    def to_dict(self) -> dict:
        return {
            "now": self.now,
            "nonce": self._nonce,
            "batch_epoch": self._batch_epoch,
            "committer_free": self._committer_free,
            "peer_busy": dict(self._peer_busy),
            "blocks": [
                {
                    "height": b.height,
                    "prev_hash": b.prev_hash,
                    "block_hash": b.block_hash,
                    "cut_time": b.cut_time,
                    "commit_time": b.commit_time,
                    "txs": [
                        {
                            "tx_id": t.tx_id,
                            "payload": t.payload,
                            "submit_time": t.submit_time,
                            "endorsements": t.endorsements,
                            "commit_time": t.commit_time,
                        }
                        for t in b.tx_list
                    ],
                }
                for b in self.blocks
            ],
        }

    @classmethod
    def from_dict(
        cls,
        peers: Sequence[PeerProfile],
        policy: EndorsementPolicy,
        config: LedgerConfig,
        data: dict,
    ) -> "LedgerSimulator":
        sim = cls(peers, policy, config)
        sim.now = data["now"]
        sim._nonce = data["nonce"]
        sim._batch_epoch = data["batch_epoch"]
        sim._committer_free = data["committer_free"]
        sim._peer_busy.update(data["peer_busy"])
        sim.blocks = []
        for b in data["blocks"]:
            txs = []
            for t in b["txs"]:
                tx = Transaction(
                    t["tx_id"],
                    t["payload"],
                    t["submit_time"],
                    [tuple(e) for e in t["endorsements"]],
                    t["commit_time"],
                    "committed",
                )
                sim.transactions[tx.tx_id] = tx
                txs.append(tx)
            sim.blocks.append(
                Block(b["height"], b["prev_hash"], tuple(txs), b["block_hash"], b["cut_time"], b["commit_time"])
            )
            for tx in txs:
                if tx.payload.get("type") == "access_event":
                    sim._committed_events.append(AccessEvent.from_payload(tx.payload))
        return sim


def run_load(
    send_rate_tps: float,
    duration_s: float,
    policy: EndorsementPolicy,
    peers: Sequence[PeerProfile],
    config: LedgerConfig = LedgerConfig(),
) -> LoadReport:
    """Drive a fresh simulator with Poisson arrivals and report windowed throughput stats.

    Throughput is measured over committed transactions inside the send window;
    latency statistics cover every transaction that eventually commits.
    Deterministic for a fixed (config.seed, inputs) pair.
    """
    if send_rate_tps <= 0:
        raise ValueError("send rate must be positive")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    sim = LedgerSimulator(peers, policy, config)
    arrivals = random.Random(config.seed ^ 0x5EED)
    t = 0.0
    horizon_ms = duration_s * 1000.0
    submitted = 0
    while True:
        t += arrivals.expovariate(send_rate_tps) * 1000.0
        if t >= horizon_ms:
            break
        # Drain simulator events up to the arrival time before submitting.
        while sim._events and sim._events[0][0] <= t:
            sim.step()
        sim.submit_transaction({"type": "generic_kv", "seq": submitted}, now=t)
        submitted += 1
    sim.run_until_idle()

    commits_in_window = [
        tx for tx in sim.committed_transactions() if tx.commit_time is not None and tx.commit_time < horizon_ms
    ]
    buckets = [0] * max(1, int(duration_s))
    for tx in commits_in_window:
        buckets[min(len(buckets) - 1, int(tx.commit_time // 1000.0))] += 1
    latencies = [tx.latency_ms for tx in sim.committed_transactions() if tx.latency_ms is not None]
    return LoadReport(
        send_rate_tps=send_rate_tps,
        duration_s=duration_s,
        policy_k=policy.k,
        submitted=submitted,
        committed=len(latencies),
        throughput_min_tps=float(min(buckets)) if buckets else 0.0,
        throughput_avg_tps=len(commits_in_window) / duration_s,
        throughput_max_tps=float(max(buckets)) if buckets else 0.0,
        latency_min_ms=min(latencies) if latencies else 0.0,
        latency_avg_ms=sum(latencies) / len(latencies) if latencies else 0.0,
        latency_max_ms=max(latencies) if latencies else 0.0,
    )


def load_reports_csv(reports: Sequence[LoadReport]) -> str:
    """CSV with one row per report, columns matching the bench figure axes."""
    lines = [
        "send_rate_tps,k,throughput_min_tps,throughput_avg_tps,throughput_max_tps,"
        "latency_min_ms,latency_avg_ms,latency_max_ms"
    ]
    for r in reports:
        lines.append(
            f"{r.send_rate_tps:g},{r.policy_k},{r.throughput_min_tps:.3f},"
            f"{r.throughput_avg_tps:.3f},{r.throughput_max_tps:.3f},"
            f"{r.latency_min_ms:.3f},{r.latency_avg_ms:.3f},{r.latency_max_ms:.3f}"
        )
    return "\n".join(lines) + "\n"
