"""Report artifact model: canonical serialization and SHA-256 digests.

The whole integrity scheme rests on one property: a report has exactly one
byte representation.  Canonical form is UTF-8 JSON with object keys sorted
bytewise ascending, no insignificant whitespace, integers only (fixed-point
fields instead of floats), lowercase hex for binary values, and the
mandatory JSON escape set.  ``parse`` is strict so that canonical bytes and
in-memory reports are in bijection: any byte-level alias of a report (odd
key order, uppercase hex, floats, unknown keys) is rejected rather than
silently normalized.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass


class ReportError(ValueError):
    """A report violates its structural invariants or cannot be parsed."""


_HEX32_RE = re.compile(r"^[0-9a-f]{32}$")
_HEX64_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class Digest:
    """A 32-byte SHA-256 digest."""

    value: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.value, bytes) or len(self.value) != 32:
            raise ReportError("digest must be exactly 32 bytes")

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        if not _HEX64_RE.match(text):
            raise ReportError(f"digest hex must be 64 lowercase hex chars, got {text!r}")
        return cls(bytes.fromhex(text))

    def __str__(self) -> str:
        return self.hex


def digest_of_bytes(data: bytes) -> Digest:
    """SHA-256 of a raw byte sequence."""
    return Digest(hashlib.sha256(data).digest())


class Phase(enum.Enum):
    """The five pipeline phases, in execution order."""

    RECON_SCOPE = "recon_scope"
    DISCOVERY = "discovery"
    ATTACK_SURFACE = "attack_surface"
    EXPLOITATION = "exploitation"
    REPORTING = "reporting"


PHASE_ORDER: tuple[Phase, ...] = tuple(Phase)


class VulnClass(enum.Enum):
    REENTRANCY = "reentrancy"
    XSS = "xss"
    SQLI = "sqli"
    IDOR = "idor"
    INFO_DISCLOSURE = "info_disclosure"
    OTHER = "other"


@dataclass(frozen=True)
class Finding:
    """One detected vulnerability.

    ``severity_tenths`` is a CVSS base score in tenths (0..100 for 0.0..10.0)
    and ``confidence_hundredths`` is in hundredths (0..100 for 0.00..1.00);
    integers keep the canonical form float-free.
    """

    vuln_class: VulnClass
    location: str
    severity_tenths: int
    confidence_hundredths: int
    remediation: str

    def __post_init__(self) -> None:
        if not self.location:
            raise ReportError("finding location must be non-empty")
        _check_int_range("severity_tenths", self.severity_tenths, 0, 100)
        _check_int_range("confidence_hundredths", self.confidence_hundredths, 0, 100)


@dataclass(frozen=True)
class PhaseArtifact:
    """Digest record of one phase's raw working artifact."""

    phase: Phase
    artifact_digest: Digest
    summary: str


@dataclass(frozen=True)
class AnalyzerMeta:
    name: str
    version: str
    temperature_tenths: int = 2

    def __post_init__(self) -> None:
        if not self.name or not self.version:
            raise ReportError("analyzer name and version must be non-empty")
        _check_int_range("temperature_tenths", self.temperature_tenths, 0, 20)


@dataclass(frozen=True)
class AnalysisReport:
    """The report artifact whose digest gets anchored on the ledger."""

    report_id: str  # 128-bit id as 32 lowercase hex chars
    target_ref: str
    phase_artifacts: tuple[PhaseArtifact, ...]
    findings: tuple[Finding, ...]
    analyzer_meta: AnalyzerMeta
    created_at: int  # unix seconds
    schema_version: int = 1

    def __post_init__(self) -> None:
        if not _HEX32_RE.match(self.report_id):
            raise ReportError("report_id must be 32 lowercase hex chars")
        if not self.target_ref:
            raise ReportError("target_ref must be non-empty")
        phases = tuple(p.phase for p in self.phase_artifacts)
        if phases != PHASE_ORDER:
            raise ReportError(
                "phase_artifacts must contain exactly the five phases in order, "
                f"got {[p.value for p in phases]}"
            )
        if not (isinstance(self.created_at, int) and self.created_at > 0):
            raise ReportError("created_at must be a positive unix timestamp")
        _check_int_range("schema_version", self.schema_version, 1, 2**31 - 1)


def _check_int_range(name: str, value: object, lo: int, hi: int) -> None:
    if type(value) is not int or not (lo <= value <= hi):
        raise ReportError(f"{name} must be an integer in [{lo}, {hi}], got {value!r}")


# --- canonical serialization -------------------------------------------------

def report_to_dict(report: AnalysisReport) -> dict:
    return {
        "analyzer": {
            "name": report.analyzer_meta.name,
            "temperature_tenths": report.analyzer_meta.temperature_tenths,
            "version": report.analyzer_meta.version,
        },
        "created_at": report.created_at,
        "findings": [
            {
                "confidence_hundredths": f.confidence_hundredths,
                "location": f.location,
                "remediation": f.remediation,
                "severity_tenths": f.severity_tenths,
                "vuln_class": f.vuln_class.value,
            }
            for f in report.findings
        ],
        "phase_artifacts": [
            {
                "artifact_digest": p.artifact_digest.hex,
                "phase": p.phase.value,
                "summary": p.summary,
            }
            for p in report.phase_artifacts
        ],
        "report_id": report.report_id,
        "schema_version": report.schema_version,
        "target_ref": report.target_ref,
    }


def canonical_json_bytes(obj: object) -> bytes:
    """Canonical JSON encoding of a plain int/str/bool/list/dict tree."""
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def canonicalize(report: AnalysisReport) -> bytes:
    """The unique canonical byte sequence for a report.

    Deterministic regardless of construction order; composing with ``parse``
    is a fixed point.  Reports violating invariants never reach this far
    because the dataclasses validate on construction.
    """
    return canonical_json_bytes(report_to_dict(report))


def hash_report(report: AnalysisReport) -> Digest:
    """SHA-256 digest of the canonical serialization."""
    return digest_of_bytes(canonicalize(report))


# --- strict parsing ----------------------------------------------------------

def _require_keys(obj: dict, keys: set[str], what: str) -> None:
    if not isinstance(obj, dict):
        raise ReportError(f"{what} must be a JSON object")
    if set(obj) != keys:
        missing = keys - set(obj)
        extra = set(obj) - keys
        raise ReportError(f"{what} keys mismatch: missing={sorted(missing)} extra={sorted(extra)}")


def _str(obj: dict, key: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise ReportError(f"{key} must be a string")
    return v


def _int(obj: dict, key: str) -> int:
    v = obj[key]
    if type(v) is not int:  # bool is an int subclass; floats are banned outright
        raise ReportError(f"{key} must be an integer")
    return v


def parse(data: bytes) -> AnalysisReport:
    """Parse canonical report JSON, enforcing every structural invariant."""
    try:
        root = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ReportError(f"not valid UTF-8 JSON: {exc}") from exc

    _require_keys(root, {
        "analyzer", "created_at", "findings", "phase_artifacts",
        "report_id", "schema_version", "target_ref",
    }, "report")

    meta_obj = root["analyzer"]
    _require_keys(meta_obj, {"name", "temperature_tenths", "version"}, "analyzer")
    meta = AnalyzerMeta(
        name=_str(meta_obj, "name"),
        version=_str(meta_obj, "version"),
        temperature_tenths=_int(meta_obj, "temperature_tenths"),
    )

    if not isinstance(root["findings"], list):
        raise ReportError("findings must be a list")
    findings = []
    for f_obj in root["findings"]:
        _require_keys(f_obj, {
            "confidence_hundredths", "location", "remediation",
            "severity_tenths", "vuln_class",
        }, "finding")
        try:
            vuln_class = VulnClass(_str(f_obj, "vuln_class"))
        except ValueError as exc:
            raise ReportError(f"unknown vuln_class {f_obj['vuln_class']!r}") from exc
        findings.append(Finding(
            vuln_class=vuln_class,
            location=_str(f_obj, "location"),
            severity_tenths=_int(f_obj, "severity_tenths"),
            confidence_hundredths=_int(f_obj, "confidence_hundredths"),
            remediation=_str(f_obj, "remediation"),
        ))

    if not isinstance(root["phase_artifacts"], list):
        raise ReportError("phase_artifacts must be a list")
    artifacts = []
    for p_obj in root["phase_artifacts"]:
        _require_keys(p_obj, {"artifact_digest", "phase", "summary"}, "phase artifact")
        try:
            phase = Phase(_str(p_obj, "phase"))
        except ValueError as exc:
            raise ReportError(f"unknown phase {p_obj['phase']!r}") from exc
        artifacts.append(PhaseArtifact(
            phase=phase,
            artifact_digest=Digest.from_hex(_str(p_obj, "artifact_digest")),
            summary=_str(p_obj, "summary"),
        ))

    return AnalysisReport(
        report_id=_str(root, "report_id"),
        target_ref=_str(root, "target_ref"),
        phase_artifacts=tuple(artifacts),
        findings=tuple(findings),
        analyzer_meta=meta,
        created_at=_int(root, "created_at"),
        schema_version=_int(root, "schema_version"),
    )
