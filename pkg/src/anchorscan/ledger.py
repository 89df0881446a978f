"""Write-once hash ledger: backend interface plus a deterministic simulator.

The contract semantics are tiny and strict: one stored entry per hash,
forever; a second submission for the same hash reverts with
``"Hash already exists"``; every successful store appends a LogMinted event.
The simulated backend runs those semantics over a virtual clock with
latencies drawn from seeded truncated-normal distributions, so benches that
model 14-second confirmations finish in milliseconds and identical
(config, schedule) pairs yield byte-identical traces.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import json
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .report import Digest, canonical_json_bytes

DUPLICATE_REASON = "Hash already exists"


class LedgerError(Exception):
    pass


class LedgerUnavailableError(LedgerError):
    """Transport-level failure (connection, HTTP, RPC shape): retryable,
    and deliberately distinct from a contract revert."""


class TxStatus(enum.Enum):
    PENDING = "pending"
    PROPAGATED = "propagated"
    CONFIRMED = "confirmed"
    REVERTED = "reverted"


@dataclass
class LedgerTx:
    """Lifecycle record of one anchoring transaction."""

    tx_id: bytes  # 32 bytes
    payload_hash: Digest
    auditor: bytes  # 20-byte account id
    submitted_at_ms: int | None = None
    propagated_at_ms: int | None = None
    confirmed_at_ms: int | None = None
    status: TxStatus = TxStatus.PENDING
    revert_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id.hex(),
            "payload_hash": self.payload_hash.hex,
            "auditor": self.auditor.hex(),
            "submitted_at_ms": self.submitted_at_ms,
            "propagated_at_ms": self.propagated_at_ms,
            "confirmed_at_ms": self.confirmed_at_ms,
            "status": self.status.value,
            "revert_reason": self.revert_reason,
        }


@dataclass(frozen=True)
class LogEntry:
    """On-chain record for one report hash; timestamp 0 is the absent sentinel,
    so stored entries always carry a positive block time."""

    report_hash: Digest
    timestamp: int  # unix seconds (block time)
    auditor: bytes
    verified: bool = False

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise ValueError("stored log entries must have timestamp > 0")
        if len(self.auditor) != 20:
            raise ValueError("auditor must be a 20-byte account id")


@dataclass(frozen=True)
class LatencyDist:
    mean_ms: float
    std_ms: float

    def __post_init__(self) -> None:
        if self.mean_ms < 0 or self.std_ms < 0:
            raise ValueError("latency mean and std must be >= 0")


@dataclass(frozen=True)
class ChainConfig:
    propagation: LatencyDist = LatencyDist(2180.0, 450.0)
    confirmation: LatencyDist = LatencyDist(14200.0, 1800.0)
    block_interval_ms: int = 2000
    confirmations_required: int = 1
    rng_seed: int = 1337
    genesis_unix_s: int = 1_700_000_000

    def __post_init__(self) -> None:
        if self.block_interval_ms < 1:
            raise ValueError("block_interval_ms must be >= 1")
        if self.confirmations_required < 1:
            raise ValueError("confirmations_required must be >= 1")
        if self.genesis_unix_s <= 0:
            raise ValueError("genesis_unix_s must be > 0")

    def to_dict(self) -> dict:
        return {
            "propagation_ms": [self.propagation.mean_ms, self.propagation.std_ms],
            "confirmation_ms": [self.confirmation.mean_ms, self.confirmation.std_ms],
            "block_interval_ms": self.block_interval_ms,
            "confirmations_required": self.confirmations_required,
            "rng_seed": self.rng_seed,
            "genesis_unix_s": self.genesis_unix_s,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ChainConfig":
        def dist(key: str, default: LatencyDist) -> LatencyDist:
            if key not in obj:
                return default
            mean, std = obj[key]
            return LatencyDist(float(mean), float(std))

        return cls(
            propagation=dist("propagation_ms", LatencyDist(2180.0, 450.0)),
            confirmation=dist("confirmation_ms", LatencyDist(14200.0, 1800.0)),
            block_interval_ms=int(obj.get("block_interval_ms", 2000)),
            confirmations_required=int(obj.get("confirmations_required", 1)),
            rng_seed=int(obj.get("rng_seed", 1337)),
            genesis_unix_s=int(obj.get("genesis_unix_s", 1_700_000_000)),
        )


@dataclass(frozen=True)
class LifecycleEvent:
    at_ms: int
    kind: str  # propagated | confirmed | reverted
    tx_id: bytes

    def to_dict(self) -> dict:
        return {"at_ms": self.at_ms, "kind": self.kind, "tx_id": self.tx_id.hex()}


@dataclass(frozen=True)
class MintedEvent:
    seq: int
    report_hash: Digest
    auditor: bytes
    timestamp: int

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "report_hash": self.report_hash.hex,
            "auditor": self.auditor.hex(),
            "timestamp": self.timestamp,
        }


class Ledger:
    """Backend-neutral anchoring interface."""

    def submit_log(self, payload_hash: Digest, auditor: bytes) -> LedgerTx:
        raise NotImplementedError

    def settle_submission(self, tx: LedgerTx) -> LedgerTx:
        """Bring a freshly submitted tx to at least Propagated (or Reverted),
        surfacing the contract's execution outcome.  Never waits for block
        confirmation."""
        raise NotImplementedError

    def get_log(self, payload_hash: Digest) -> LogEntry | None:
        raise NotImplementedError

    def now_ms(self) -> int:
        raise NotImplementedError


_STAGE_PROPAGATE = 0
_STAGE_CONFIRM = 1


class SimChain(Ledger):
    """Deterministic discrete-event chain simulation.

    Virtual time only moves through :meth:`advance_time`.  Mempool admission
    is serialized under a lock and RNG draws happen at admission, so a fixed
    (config, submission schedule) pair fully determines every deadline,
    transition, and event, byte for byte.  Contract execution (the
    write-once check) runs when a tx's propagation deadline fires; pending
    transitions are processed in (deadline, tx_id) order.
    """

    def __init__(self, config: ChainConfig):
        self.config = config
        self._lock = threading.RLock()
        self._now_ms = config.genesis_unix_s * 1000
        self._rng = random.Random(config.rng_seed)
        self._seq = 0
        self._txs: dict[bytes, LedgerTx] = {}
        self._entries: dict[bytes, LogEntry] = {}
        self._minted: list[MintedEvent] = []
        self._queue: list[tuple[int, bytes, int]] = []  # (deadline, tx_id, stage)
        self._confirm_delay: dict[bytes, int] = {}
        self._trace: list[dict] = []

    # -- clock ---------------------------------------------------------------

    def now_ms(self) -> int:
        with self._lock:
            return self._now_ms

    def _sample_ms(self, dist: LatencyDist) -> int:
        # truncated at zero; rounded to whole virtual milliseconds
        return max(0, round(self._rng.gauss(dist.mean_ms, dist.std_ms)))

    # -- writes --------------------------------------------------------------

    def submit_log(self, payload_hash: Digest, auditor: bytes) -> LedgerTx:
        if len(auditor) != 20:
            raise ValueError("auditor must be a 20-byte account id")
        with self._lock:
            seq = self._seq
            self._seq += 1
            tx_id = hashlib.sha256(
                b"simtx" + seq.to_bytes(8, "big") + payload_hash.value + auditor
            ).digest()
            prop_delay = self._sample_ms(self.config.propagation)
            confirm_delay = sum(
                self._sample_ms(self.config.confirmation)
                for _ in range(self.config.confirmations_required)
            )
            tx = LedgerTx(
                tx_id=tx_id,
                payload_hash=payload_hash,
                auditor=auditor,
                submitted_at_ms=self._now_ms,
            )
            self._txs[tx_id] = tx
            self._confirm_delay[tx_id] = confirm_delay
            heapq.heappush(self._queue, (self._now_ms + prop_delay, tx_id, _STAGE_PROPAGATE))
            self._trace.append({
                "event": "submitted", "at_ms": self._now_ms, "seq": seq,
                "tx_id": tx_id.hex(), "payload_hash": payload_hash.hex,
                "auditor": auditor.hex(),
            })
            return tx

    def advance_time(self, delta_ms: int) -> list[LifecycleEvent]:
        """Advance the virtual clock, firing every transition due in the
        window.  Advancing by zero fires nothing."""
        if delta_ms < 0:
            raise ValueError("cannot advance time backwards")
        with self._lock:
            if delta_ms == 0:
                return []
            return self._run_until(self._now_ms + delta_ms)

    def _run_until(self, target_ms: int) -> list[LifecycleEvent]:
        """Fire every queued transition with deadline <= target_ms, in
        (deadline, tx_id) order, then move the clock to target_ms.  Unlike
        advance_time, deadlines at exactly the current instant do fire —
        settlement helpers need that for zero-latency configurations.
        Caller must hold the lock."""
        events: list[LifecycleEvent] = []
        while self._queue and self._queue[0][0] <= target_ms:
            deadline, tx_id, stage = heapq.heappop(self._queue)
            self._now_ms = max(self._now_ms, deadline)
            tx = self._txs[tx_id]
            if stage == _STAGE_PROPAGATE:
                events.append(self._execute(tx, deadline))
            else:
                tx.status = TxStatus.CONFIRMED
                tx.confirmed_at_ms = deadline
                events.append(LifecycleEvent(deadline, "confirmed", tx_id))
        self._now_ms = max(self._now_ms, target_ms)
        for event in events:
            self._trace.append({"event": event.kind, "at_ms": event.at_ms,
                                "tx_id": event.tx_id.hex()})
        return events

    def _execute(self, tx: LedgerTx, at_ms: int) -> LifecycleEvent:
        key = tx.payload_hash.value
        if key in self._entries:
            tx.status = TxStatus.REVERTED
            tx.revert_reason = DUPLICATE_REASON
            return LifecycleEvent(at_ms, "reverted", tx.tx_id)
        block_time = self._block_timestamp_s(at_ms)
        self._entries[key] = LogEntry(
            report_hash=tx.payload_hash, timestamp=block_time, auditor=tx.auditor
        )
        self._minted.append(MintedEvent(
            seq=len(self._minted), report_hash=tx.payload_hash,
            auditor=tx.auditor, timestamp=block_time,
        ))
        self._trace.append(self._minted[-1].to_dict() | {"event": "minted"})
        tx.status = TxStatus.PROPAGATED
        tx.propagated_at_ms = at_ms
        heapq.heappush(
            self._queue, (at_ms + self._confirm_delay[tx.tx_id], tx.tx_id, _STAGE_CONFIRM)
        )
        return LifecycleEvent(at_ms, "propagated", tx.tx_id)

    def _block_timestamp_s(self, at_ms: int) -> int:
        # first block boundary at or after the execution instant
        genesis_ms = self.config.genesis_unix_s * 1000
        interval = self.config.block_interval_ms
        blocks = -(-(at_ms - genesis_ms) // interval)  # ceil
        return (genesis_ms + blocks * interval) // 1000

    def settle_submission(self, tx: LedgerTx) -> LedgerTx:
        with self._lock:
            pending = [d for d, t, s in self._queue if t == tx.tx_id and s == _STAGE_PROPAGATE]
            if pending:
                self._run_until(pending[0])
        return tx

    def advance_until_quiescent(self) -> list[LifecycleEvent]:
        """Drain every scheduled transition (used to confirm stragglers)."""
        events: list[LifecycleEvent] = []
        with self._lock:
            while self._queue:
                horizon = max(d for d, _, _ in self._queue)
                events.extend(self._run_until(horizon))
        return events

    # -- reads ---------------------------------------------------------------

    def get_log(self, payload_hash: Digest) -> LogEntry | None:
        with self._lock:
            return self._entries.get(payload_hash.value)

    def get_tx(self, tx_id: bytes) -> LedgerTx | None:
        with self._lock:
            return self._txs.get(tx_id)

    @property
    def minted_events(self) -> tuple[MintedEvent, ...]:
        with self._lock:
            return tuple(self._minted)

    def trace_bytes(self) -> bytes:
        """Canonical serialization of the full event trace, for determinism
        comparisons."""
        with self._lock:
            return canonical_json_bytes(self._trace)

    # -- persistence ---------------------------------------------------------

    def to_state_dict(self) -> dict:
        with self._lock:
            version, internal, gauss_next = self._rng.getstate()
            return {
                "config": self.config.to_dict(),
                "now_ms": self._now_ms,
                "seq": self._seq,
                "rng_state": [version, list(internal), gauss_next],
                "txs": [self._txs[k].to_dict() for k in sorted(self._txs)],
                "entries": [
                    {
                        "report_hash": e.report_hash.hex,
                        "timestamp": e.timestamp,
                        "auditor": e.auditor.hex(),
                        "verified": e.verified,
                    }
                    for _, e in sorted(self._entries.items())
                ],
                "minted": [m.to_dict() for m in self._minted],
                "queue": [
                    {"deadline_ms": d, "tx_id": t.hex(), "stage": s}
                    for d, t, s in sorted(self._queue)
                ],
                "confirm_delay": {
                    t.hex(): d for t, d in sorted(self._confirm_delay.items())
                },
                "trace": list(self._trace),
            }

    @classmethod
    def from_state_dict(cls, state: dict) -> "SimChain":
        chain = cls(ChainConfig.from_dict(state["config"]))
        chain._now_ms = int(state["now_ms"])
        chain._seq = int(state["seq"])
        version, internal, gauss_next = state["rng_state"]
        chain._rng.setstate((version, tuple(internal), gauss_next))
        for t in state["txs"]:
            tx = LedgerTx(
                tx_id=bytes.fromhex(t["tx_id"]),
                payload_hash=Digest.from_hex(t["payload_hash"]),
                auditor=bytes.fromhex(t["auditor"]),
                submitted_at_ms=t["submitted_at_ms"],
                propagated_at_ms=t["propagated_at_ms"],
                confirmed_at_ms=t["confirmed_at_ms"],
                status=TxStatus(t["status"]),
                revert_reason=t["revert_reason"],
            )
            chain._txs[tx.tx_id] = tx
        for e in state["entries"]:
            entry = LogEntry(
                report_hash=Digest.from_hex(e["report_hash"]),
                timestamp=e["timestamp"],
                auditor=bytes.fromhex(e["auditor"]),
                verified=e["verified"],
            )
            chain._entries[entry.report_hash.value] = entry
        chain._minted = [
            MintedEvent(
                seq=m["seq"],
                report_hash=Digest.from_hex(m["report_hash"]),
                auditor=bytes.fromhex(m["auditor"]),
                timestamp=m["timestamp"],
            )
            for m in state["minted"]
        ]
        chain._queue = [
            (q["deadline_ms"], bytes.fromhex(q["tx_id"]), q["stage"])
            for q in state["queue"]
        ]
        heapq.heapify(chain._queue)
        chain._confirm_delay = {
            bytes.fromhex(t): d for t, d in state["confirm_delay"].items()
        }
        chain._trace = list(state["trace"])
        return chain

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(canonical_json_bytes(self.to_state_dict()))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "SimChain":
        with open(path, encoding="utf-8") as fh:
            return cls.from_state_dict(json.load(fh))


class SystemClock:
    """Wall-clock milliseconds; the non-simulated counterpart of virtual time."""

    @staticmethod
    def now_ms() -> int:
        return time.time_ns() // 1_000_000
