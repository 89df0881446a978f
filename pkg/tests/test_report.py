"""Canonical serialization, digesting, and strict parsing of reports."""

from __future__ import annotations

import json
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorscan.report import (
    AnalysisReport,
    AnalyzerMeta,
    Digest,
    Finding,
    Phase,
    PhaseArtifact,
    ReportError,
    VulnClass,
    canonical_json_bytes,
    canonicalize,
    digest_of_bytes,
    hash_report,
    parse,
)
from tests.conftest import FIXTURES

GOLDEN = FIXTURES / "reports" / "vulnbank_reference.report.json"

# Published SHA-256 vectors (FIPS 180 examples).
SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
SHA256_ABC = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def _artifact(phase: Phase, fill: str) -> PhaseArtifact:
    return PhaseArtifact(
        phase=phase, artifact_digest=Digest.from_hex(fill * 32), summary=f"did {phase.value}"
    )


def _minimal_report(**overrides) -> AnalysisReport:
    kwargs = dict(
        report_id="00" * 16,
        target_ref="target-a",
        phase_artifacts=tuple(_artifact(p, "ab") for p in Phase),
        findings=(),
        analyzer_meta=AnalyzerMeta(name="engine", version="1.0.0"),
        created_at=1_700_000_000,
    )
    kwargs.update(overrides)
    return AnalysisReport(**kwargs)


# --- digest oracle -----------------------------------------------------------

class TestDigest:
    def test_sha256_reference_vectors(self):
        assert digest_of_bytes(b"").hex == SHA256_EMPTY
        assert digest_of_bytes(b"abc").hex == SHA256_ABC

    def test_from_hex_round_trip(self):
        d = Digest.from_hex("ab" * 32)
        assert d.hex == "ab" * 32
        assert Digest.from_hex(d.hex) == d

    @pytest.mark.parametrize("bad", ["AB" * 32, "ab" * 31, "ab" * 33, "zz" * 32, ""])
    def test_from_hex_rejects_aliases(self, bad):
        with pytest.raises(ReportError):
            Digest.from_hex(bad)

    def test_wrong_length_bytes_rejected(self):
        with pytest.raises(ReportError):
            Digest(b"\x00" * 31)


# --- golden bytes ------------------------------------------------------------

class TestGoldenReport:
    def test_reference_fixture_matches_checked_in_bytes(self, ruleset, vulnbank):
        from anchorscan.analyzer import analyze
        from anchorscan.coordinator import build_report

        report = build_report(vulnbank, analyze(vulnbank, ruleset))
        assert canonicalize(report) == GOLDEN.read_bytes()

    def test_golden_bytes_obey_canonical_form(self):
        data = GOLDEN.read_bytes()
        text = data.decode("utf-8")
        # no insignificant whitespace anywhere
        assert " " not in re.sub(r'"[^"]*"', '""', text)
        assert "\n" not in text and "\t" not in text
        # every object's keys sorted bytewise ascending
        def check(node):
            if isinstance(node, dict):
                keys = list(node)
                assert keys == sorted(keys)
                for v in node.values():
                    check(v)
            elif isinstance(node, list):
                for v in node:
                    check(v)
            elif isinstance(node, float):
                raise AssertionError("float leaked into canonical form")
        check(json.loads(text))
        # hex fields all lowercase
        for match in re.finditer(r'"[0-9a-fA-F]{64}"', text):
            assert match.group(0).lower() == match.group(0)

    def test_golden_round_trip_is_fixed_point(self):
        data = GOLDEN.read_bytes()
        assert canonicalize(parse(data)) == data

    def test_golden_digest_stable(self):
        assert hash_report(parse(GOLDEN.read_bytes())) == digest_of_bytes(GOLDEN.read_bytes())


# --- construction-order independence ----------------------------------------

def test_field_order_at_construction_is_irrelevant():
    a = AnalysisReport(
        report_id="11" * 16, target_ref="t",
        phase_artifacts=tuple(_artifact(p, "cd") for p in Phase),
        findings=(), analyzer_meta=AnalyzerMeta(name="e", version="2"),
        created_at=42,
    )
    b = AnalysisReport(
        created_at=42, analyzer_meta=AnalyzerMeta(version="2", name="e"),
        findings=(), phase_artifacts=tuple(_artifact(p, "cd") for p in Phase),
        target_ref="t", report_id="11" * 16,
    )
    assert canonicalize(a) == canonicalize(b)
    assert hash_report(a) == hash_report(b)


# --- hypothesis strategies ---------------------------------------------------

_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=0, max_size=40
)
_nonempty_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
)
_hex32 = st.binary(min_size=16, max_size=16).map(bytes.hex)
_digests = st.binary(min_size=32, max_size=32).map(Digest)

_findings = st.builds(
    Finding,
    vuln_class=st.sampled_from(VulnClass),
    location=_nonempty_text,
    severity_tenths=st.integers(0, 100),
    confidence_hundredths=st.integers(0, 100),
    remediation=_text,
)

_artifacts = st.tuples(*[
    st.builds(PhaseArtifact, phase=st.just(p), artifact_digest=_digests, summary=_text)
    for p in Phase
])

reports = st.builds(
    AnalysisReport,
    report_id=_hex32,
    target_ref=_nonempty_text,
    phase_artifacts=_artifacts,
    findings=st.lists(_findings, max_size=4).map(tuple),
    analyzer_meta=st.builds(
        AnalyzerMeta, name=_nonempty_text, version=_nonempty_text,
        temperature_tenths=st.integers(0, 20),
    ),
    created_at=st.integers(1, 2**40),
    schema_version=st.integers(1, 2**31 - 1),
)


class TestRoundTripProperties:
    @given(reports)
    @settings(max_examples=150, deadline=None)
    def test_parse_inverts_canonicalize(self, report):
        assert parse(canonicalize(report)) == report

    @given(reports)
    @settings(max_examples=100, deadline=None)
    def test_canonicalize_parse_fixed_point(self, report):
        data = canonicalize(report)
        assert canonicalize(parse(data)) == data

    @given(reports)
    @settings(max_examples=100, deadline=None)
    def test_hashing_is_pure(self, report):
        assert hash_report(report) == hash_report(report)
        assert hash_report(report) == digest_of_bytes(canonicalize(report))

    @given(reports, st.text(min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_remediation_change_changes_digest(self, report, suffix):
        if not report.findings:
            return
        f0 = report.findings[0]
        changed = Finding(
            vuln_class=f0.vuln_class, location=f0.location,
            severity_tenths=f0.severity_tenths,
            confidence_hundredths=f0.confidence_hundredths,
            remediation=f0.remediation + suffix,
        )
        mutated = AnalysisReport(
            report_id=report.report_id, target_ref=report.target_ref,
            phase_artifacts=report.phase_artifacts,
            findings=(changed,) + report.findings[1:],
            analyzer_meta=report.analyzer_meta, created_at=report.created_at,
            schema_version=report.schema_version,
        )
        assert hash_report(mutated) != hash_report(report)


# --- mutation / aliasing -----------------------------------------------------

def test_single_byte_mutations_never_alias():
    """Any mutated byte string that still parses must denote a different
    report — no two distinct canonical byte strings collapse to one value."""
    original = GOLDEN.read_bytes()
    rng = random.Random(0xA11A5)
    parsed_ok = 0
    for _ in range(1000):
        pos = rng.randrange(len(original))
        flip = rng.randrange(1, 256)
        mutated = bytearray(original)
        mutated[pos] ^= flip
        mutated = bytes(mutated)
        try:
            report = parse(mutated)
        except ReportError:
            continue
        parsed_ok += 1
        assert canonicalize(report) != original
        assert digest_of_bytes(mutated) != digest_of_bytes(original)
    # the property must actually have been exercised
    assert parsed_ok > 0


class TestStrictParse:
    def _case(self, transform):
        obj = json.loads(GOLDEN.read_bytes())
        transform(obj)
        return canonical_json_bytes(obj)

    def test_unknown_top_level_key_rejected(self):
        data = self._case(lambda o: o.__setitem__("extra", 1))
        with pytest.raises(ReportError, match="extra"):
            parse(data)

    def test_missing_key_rejected(self):
        data = self._case(lambda o: o.pop("created_at"))
        with pytest.raises(ReportError, match="created_at"):
            parse(data)

    def test_float_rejected(self):
        data = self._case(lambda o: o.__setitem__("created_at", 1.5))
        with pytest.raises(ReportError, match="integer"):
            parse(data)

    def test_bool_not_accepted_as_int(self):
        data = self._case(lambda o: o.__setitem__("schema_version", True))
        with pytest.raises(ReportError, match="integer"):
            parse(data)

    def test_uppercase_digest_rejected(self):
        data = self._case(
            lambda o: o["phase_artifacts"][0].__setitem__(
                "artifact_digest", o["phase_artifacts"][0]["artifact_digest"].upper()
            )
        )
        with pytest.raises(ReportError):
            parse(data)

    def test_phase_out_of_order_rejected(self):
        def swap(o):
            pa = o["phase_artifacts"]
            pa[0], pa[1] = pa[1], pa[0]
        with pytest.raises(ReportError, match="phases"):
            parse(self._case(swap))

    def test_duplicate_phase_rejected(self):
        def dup(o):
            o["phase_artifacts"][1] = dict(o["phase_artifacts"][0])
        with pytest.raises(ReportError):
            parse(self._case(dup))

    def test_unknown_vuln_class_rejected(self):
        def bad(o):
            o["findings"][0]["vuln_class"] = "spectre"
        with pytest.raises(ReportError, match="vuln_class"):
            parse(self._case(bad))

    def test_not_json_rejected(self):
        with pytest.raises(ReportError):
            parse(b"\xff\xfe not json")
        with pytest.raises(ReportError):
            parse(b"[1, 2, 3]")


class TestConstructionInvariants:
    def test_bad_report_id(self):
        with pytest.raises(ReportError, match="report_id"):
            _minimal_report(report_id="XYZ")

    def test_empty_target_ref(self):
        with pytest.raises(ReportError, match="target_ref"):
            _minimal_report(target_ref="")

    def test_nonpositive_created_at(self):
        with pytest.raises(ReportError, match="created_at"):
            _minimal_report(created_at=0)

    def test_missing_phase(self):
        with pytest.raises(ReportError, match="phases"):
            _minimal_report(
                phase_artifacts=tuple(_artifact(p, "ab") for p in list(Phase)[:-1])
            )

    def test_severity_range(self):
        with pytest.raises(ReportError, match="severity"):
            Finding(
                vuln_class=VulnClass.XSS, location="/x", severity_tenths=101,
                confidence_hundredths=50, remediation="",
            )

    def test_temperature_range(self):
        with pytest.raises(ReportError, match="temperature"):
            AnalyzerMeta(name="e", version="1", temperature_tenths=21)

    def test_nan_banned_from_canonical_json(self):
        with pytest.raises(ValueError):
            canonical_json_bytes({"x": float("nan")})
