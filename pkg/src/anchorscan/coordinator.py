"""Workflow coordination: analyze, build the report, anchor, persist.

The pipeline runs the five phases in order, derives the report fully from
(target, ruleset, analyzer identity, epoch) so re-running a target
reproduces identical bytes and digest, anchors the digest on the ledger,
and persists (report, digest, tx ref) in a content-addressed local store.
Anchoring is asynchronous with respect to block confirmation: a workflow
completes once its transaction is accepted and propagated, never waiting
out confirmation latency.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path

from .analyzer import Ruleset, TargetFixture, TargetKind, analyze
from .ledger import (
    DUPLICATE_REASON,
    Ledger,
    LedgerTx,
    LedgerUnavailableError,
    TxStatus,
)
from .report import (
    AnalysisReport,
    AnalyzerMeta,
    Digest,
    Finding,
    Phase,
    PhaseArtifact,
    canonical_json_bytes,
    canonicalize,
    digest_of_bytes,
    hash_report,
    report_to_dict,
)

DEFAULT_REPORT_EPOCH_S = 1_700_000_000

REFERENCE_ANALYZER = AnalyzerMeta(name="rule-engine", version="1.0.0", temperature_tenths=2)


class AnalysisError(Exception):
    """Analysis failed; nothing was submitted or persisted."""


class LedgerSubmitError(Exception):
    """Anchoring failed after retries; the report itself was persisted."""


@dataclass(frozen=True)
class WorkflowResult:
    report: AnalysisReport
    digest: Digest
    tx: LedgerTx
    completed_at_ms: int
    path: Path
    already_anchored: bool = False


def derive_report_id(target_ref: str, meta: AnalyzerMeta, created_at: int) -> str:
    """128-bit report id, a pure function of what the report is about."""
    material = "|".join(["report-id", target_ref, meta.name, meta.version, str(created_at)])
    return hashlib.sha256(material.encode("utf-8")).digest()[:16].hex()


def build_phase_artifacts(
    target: TargetFixture, findings: list[Finding]
) -> tuple[PhaseArtifact, ...]:
    """Digest the five phases' working artifacts.

    Each phase's raw artifact is a canonical JSON view of what that phase
    produced; only the digests and summaries are embedded in the report, so
    tampering with any phase view shows up through the single report anchor.
    """
    if target.kind is TargetKind.WEB_ENDPOINT_SET:
        assert target.endpoints is not None
        inventory = [e.path for e in target.endpoints]
        surface = [
            {"location": e.path, "signal": s}
            for e in target.endpoints for s in sorted(e.signals)
        ]
        unit = "endpoints"
    else:
        assert target.contract_ir is not None
        inventory = [f.name for f in target.contract_ir.functions]
        surface = [
            {"location": f.name, "signal": "ir:" + "/".join(op.kind.value for op in f.ops)}
            for f in target.contract_ir.functions
        ]
        unit = "functions"

    validated = [
        {"location": f.location, "vuln_class": f.vuln_class.value} for f in findings
    ]
    raw = {
        Phase.RECON_SCOPE: {"kind": target.kind.value, "target_id": target.target_id},
        Phase.DISCOVERY: {"inventory": inventory},
        Phase.ATTACK_SURFACE: {"candidates": surface},
        Phase.EXPLOITATION: {"validated": validated},
        Phase.REPORTING: {"findings": [
            {
                "confidence_hundredths": f.confidence_hundredths,
                "location": f.location,
                "remediation": f.remediation,
                "severity_tenths": f.severity_tenths,
                "vuln_class": f.vuln_class.value,
            }
            for f in findings
        ]},
    }
    summaries = {
        Phase.RECON_SCOPE: f"scoped target {target.target_id} ({target.kind.value})",
        Phase.DISCOVERY: f"enumerated {len(inventory)} {unit}",
        Phase.ATTACK_SURFACE: f"mapped {len(surface)} candidate vectors",
        Phase.EXPLOITATION: f"validated {len(validated)} findings",
        Phase.REPORTING: f"aggregated {len(findings)} findings",
    }
    return tuple(
        PhaseArtifact(
            phase=phase,
            artifact_digest=digest_of_bytes(canonical_json_bytes(raw[phase])),
            summary=summaries[phase],
        )
        for phase in Phase
    )


def build_report(
    target: TargetFixture,
    findings: list[Finding],
    meta: AnalyzerMeta = REFERENCE_ANALYZER,
    report_epoch_s: int = DEFAULT_REPORT_EPOCH_S,
) -> AnalysisReport:
    created_at = report_epoch_s
    return AnalysisReport(
        report_id=derive_report_id(target.target_id, meta, created_at),
        target_ref=target.target_id,
        phase_artifacts=build_phase_artifacts(target, findings),
        findings=tuple(findings),
        analyzer_meta=meta,
        created_at=created_at,
    )


# --- local artifact store ----------------------------------------------------

class StoreError(Exception):
    pass


class ArtifactStore:
    """Content-addressed report store with an atomically updated index.

    Layout: ``<root>/index.json`` plus one ``<digest-hex>.report.json`` per
    report.  All writes go through write-temp-then-rename, so a crash mid
    persist leaves the previous index intact and never a half-written file.
    """

    INDEX_NAME = "index.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def index_path(self) -> Path:
        return self.root / self.INDEX_NAME

    def report_path(self, digest: Digest) -> Path:
        return self.root / f"{digest.hex}.report.json"

    def load_index(self) -> dict:
        if not self.index_path.exists():
            return {"entries": {}}
        import json

        with open(self.index_path, encoding="utf-8") as fh:
            return json.load(fh)

    def _write_atomic(self, path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(path)

    def save_report_bytes(self, data: bytes, digest: Digest) -> Path:
        if digest_of_bytes(data) != digest:
            raise StoreError("report bytes do not hash to the claimed digest")
        path = self.report_path(digest)
        if path.exists():
            if path.read_bytes() != data:
                raise StoreError(f"store file {path.name} exists with different content")
            return path
        self._write_atomic(path, data)
        return path

    def record(self, report_id: str, entry: dict) -> None:
        """Insert or replace one index entry, re-checking the file on disk."""
        path = self.root / entry["path"]
        if not path.exists():
            raise StoreError(f"refusing to index missing file {entry['path']}")
        actual = digest_of_bytes(path.read_bytes()).hex
        if actual != entry["digest"]:
            raise StoreError(
                f"file {entry['path']} hashes to {actual}, index claims {entry['digest']}"
            )
        index = self.load_index()
        index["entries"][report_id] = entry
        self._write_atomic(self.index_path, canonical_json_bytes(index))

    def entries(self) -> list[tuple[str, dict]]:
        index = self.load_index()
        return sorted(index["entries"].items())

    def load_report_bytes(self, entry: dict) -> bytes:
        path = self.root / entry["path"]
        if not path.exists():
            raise StoreError(f"indexed report file missing: {entry['path']}")
        return path.read_bytes()

    def content_digest(self) -> str:
        """One digest over every stored file (index included), for
        whole-store determinism comparisons."""
        acc = hashlib.sha256()
        for path in sorted(self.root.glob("*.json")):
            acc.update(path.name.encode())
            acc.update(b"\x00")
            acc.update(path.read_bytes())
            acc.update(b"\x01")
        return acc.hexdigest()


# --- workflow ----------------------------------------------------------------

def persist(result: WorkflowResult, store: ArtifactStore) -> Path:
    """Write the canonical report bytes and the index entry for a result."""
    data = canonicalize(result.report)
    path = store.save_report_bytes(data, result.digest)
    store.record(result.report.report_id, _index_entry(result))
    return path


def _index_entry(result: WorkflowResult) -> dict:
    tx = result.tx
    return {
        "digest": result.digest.hex,
        "path": result.path.name,
        "target_ref": result.report.target_ref,
        "tx_id": tx.tx_id.hex(),
        "tx_status": tx.status.value,
        "revert_reason": tx.revert_reason,
        "anchored_at_ms": tx.propagated_at_ms,
        "already_anchored": result.already_anchored,
        "completed_at_ms": result.completed_at_ms,
    }


def run_workflow(
    target: TargetFixture,
    ruleset: Ruleset,
    ledger: Ledger,
    store: ArtifactStore,
    *,
    auditor: bytes,
    meta: AnalyzerMeta = REFERENCE_ANALYZER,
    report_epoch_s: int = DEFAULT_REPORT_EPOCH_S,
    submit_attempts: int = 3,
    retry_backoff_s: float = 0.5,
) -> WorkflowResult:
    """Run the full integrity-aware workflow for one target.

    Order matters: the canonical report bytes are finalized on disk before
    the digest is submitted, so the anchored value is always the hash of the
    exact stored bytes.  Completion means the anchoring tx was accepted and
    propagated; confirmation keeps running in the background (virtual or
    real) without blocking.
    """
    try:
        findings = analyze(target, ruleset)
    except Exception as exc:
        raise AnalysisError(f"analysis of {target.target_id!r} failed: {exc}") from exc

    report = build_report(target, findings, meta=meta, report_epoch_s=report_epoch_s)
    data = canonicalize(report)
    digest = digest_of_bytes(data)
    assert digest == hash_report(report)
    path = store.save_report_bytes(data, digest)

    tx: LedgerTx | None = None
    failure: Exception | None = None
    for attempt in range(submit_attempts):
        try:
            tx = ledger.submit_log(digest, auditor)
            ledger.settle_submission(tx)
            failure = None
            break
        except LedgerUnavailableError as exc:
            failure = exc
            if attempt + 1 < submit_attempts:
                time.sleep(retry_backoff_s)

    if tx is None or failure is not None:
        placeholder = LedgerTx(
            tx_id=bytes(32), payload_hash=digest, auditor=auditor,
            status=TxStatus.REVERTED, revert_reason=f"submission failed: {failure}",
        )
        result = WorkflowResult(
            report=report, digest=digest, tx=placeholder,
            completed_at_ms=ledger.now_ms(), path=path,
        )
        store.record(report.report_id, _index_entry(result))
        raise LedgerSubmitError(
            f"anchoring {digest.hex} failed after {submit_attempts} attempts: {failure}"
        )

    already_anchored = (
        tx.status is TxStatus.REVERTED and tx.revert_reason == DUPLICATE_REASON
    )
    if tx.status is TxStatus.REVERTED and not already_anchored:
        result = WorkflowResult(
            report=report, digest=digest, tx=tx,
            completed_at_ms=ledger.now_ms(), path=path,
        )
        store.record(report.report_id, _index_entry(result))
        raise LedgerSubmitError(f"anchoring reverted: {tx.revert_reason}")

    result = WorkflowResult(
        report=report,
        digest=digest,
        tx=tx,
        completed_at_ms=ledger.now_ms(),
        path=path,
        already_anchored=already_anchored,
    )
    store.record(report.report_id, _index_entry(result))
    return result
