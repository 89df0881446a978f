"""Integrity verification: recompute, fetch the anchor, classify.

The verdict is three-way.  ``INTACT`` means the exact bytes on disk hash to
a digest the ledger has anchored.  ``TAMPERED`` means the bytes contradict
the store's claim (digest mismatch, or the file no longer parses as a
canonical report).  ``NOT_LOGGED`` means the bytes are a well-formed report
whose digest simply has no anchor — distinguished from tampering so that
deleting an anchor cannot masquerade as a clean file, and a clean-but-new
file cannot masquerade as an attack.

Verification is read-only: it hashes the raw file bytes exactly as stored
(never a re-serialization, which would mask canonical-form tampering) and
never mutates the store or the ledger.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

from .coordinator import ArtifactStore, StoreError
from .ledger import Ledger, LedgerUnavailableError
from .report import Digest, ReportError, digest_of_bytes, parse


class VerdictState(enum.Enum):
    INTACT = "intact"
    TAMPERED = "tampered"
    NOT_LOGGED = "not_logged"


@dataclass(frozen=True)
class Verdict:
    state: VerdictState
    expected: Digest | None  # digest the store index claims, if any claim exists
    actual: Digest  # digest recomputed from the exact bytes
    note: str
    checked_at_ms: int
    retrieval_ms: float
    recompute_ms: float

    def __post_init__(self) -> None:
        if self.state is VerdictState.TAMPERED:
            if self.expected is not None and self.expected == self.actual:
                raise ValueError("tampered verdict requires a contradicted claim")
        if self.state is VerdictState.INTACT and self.expected != self.actual:
            raise ValueError("intact verdict requires claim and recomputation to agree")

    def to_dict(self) -> dict:
        return {
            "state": self.state.value,
            "expected": self.expected.hex if self.expected else None,
            "actual": self.actual.hex,
            "note": self.note,
            "checked_at_ms": self.checked_at_ms,
            "retrieval_ms": round(self.retrieval_ms, 3),
            "recompute_ms": round(self.recompute_ms, 3),
        }


@dataclass(frozen=True)
class StoreVerdict:
    """One sweep result: either a verdict or the error that prevented one."""

    report_id: str
    verdict: Verdict | None
    error: str | None

    def __post_init__(self) -> None:
        if (self.verdict is None) == (self.error is None):
            raise ValueError("exactly one of verdict/error must be set")


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


def verify(data: bytes, ledger: Ledger, expected: Digest | None = None) -> Verdict:
    """Classify one report's bytes against the ledger.

    ``expected`` is the digest the caller's index claims for these bytes;
    pass None when there is no claim (ad-hoc file check).  Transport
    failures raise :class:`LedgerUnavailableError` — an unreachable ledger
    is *unverifiable*, never silently intact.
    """
    t0 = time.perf_counter_ns()
    actual = digest_of_bytes(data)
    recompute_ms = (time.perf_counter_ns() - t0) / 1e6

    if expected is not None and expected != actual:
        return Verdict(
            state=VerdictState.TAMPERED,
            expected=expected,
            actual=actual,
            note=f"stored bytes hash to {actual.hex}, index claims {expected.hex}",
            checked_at_ms=_now_ms(),
            retrieval_ms=0.0,
            recompute_ms=recompute_ms,
        )

    try:
        parse(data)
    except ReportError as exc:
        return Verdict(
            state=VerdictState.TAMPERED,
            expected=None,
            actual=actual,
            note=f"bytes are not a canonical report: {exc}",
            checked_at_ms=_now_ms(),
            retrieval_ms=0.0,
            recompute_ms=recompute_ms,
        )

    t1 = time.perf_counter_ns()
    entry = ledger.get_log(actual)
    retrieval_ms = (time.perf_counter_ns() - t1) / 1e6

    if entry is None:
        return Verdict(
            state=VerdictState.NOT_LOGGED,
            expected=expected if expected is not None else actual,
            actual=actual,
            note="well-formed report with no anchor for its digest",
            checked_at_ms=_now_ms(),
            retrieval_ms=retrieval_ms,
            recompute_ms=recompute_ms,
        )
    return Verdict(
        state=VerdictState.INTACT,
        expected=actual,
        actual=actual,
        note=f"digest anchored at ledger time {entry.timestamp}",
        checked_at_ms=_now_ms(),
        retrieval_ms=retrieval_ms,
        recompute_ms=recompute_ms,
    )


def verify_store(store: ArtifactStore, ledger: Ledger) -> list[StoreVerdict]:
    """Sweep every index entry, in report-id order, continuing past errors."""
    results: list[StoreVerdict] = []
    for report_id, entry in store.entries():
        try:
            data = store.load_report_bytes(entry)
            expected = Digest.from_hex(entry["digest"])
        except (StoreError, KeyError, ValueError) as exc:
            results.append(StoreVerdict(report_id, None, f"store error: {exc}"))
            continue
        try:
            verdict = verify(data, ledger, expected=expected)
        except LedgerUnavailableError as exc:
            results.append(StoreVerdict(report_id, None, f"unverifiable: {exc}"))
            continue
        results.append(StoreVerdict(report_id, verdict, None))
    return results
