"""Rule engine, reentrancy detection, and detection-metric arithmetic."""

from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorscan.analyzer import (
    ContractFunction,
    ContractIR,
    DetectionMetrics,
    Endpoint,
    FixtureError,
    GroundTruth,
    IrOp,
    OpKind,
    Ruleset,
    TargetFixture,
    TargetKind,
    TargetMismatchError,
    analyze,
    default_ruleset,
    fixture_from_dict,
    harmonic_f1,
    has_call_before_write,
    score_detections,
)
from anchorscan.report import VulnClass


def _op(kind: OpKind) -> IrOp:
    if kind in (OpKind.STATE_READ, OpKind.STATE_WRITE):
        return IrOp(kind, "x")
    return IrOp(kind)


def _contract(name: str, kinds: tuple[OpKind, ...]) -> TargetFixture:
    fn = ContractFunction(name=name, ops=tuple(_op(k) for k in kinds))
    return TargetFixture(
        target_id="c", kind=TargetKind.SMART_CONTRACT,
        contract_ir=ContractIR(functions=(fn,)),
    )


# --- reentrancy rule vs. brute-force oracle ----------------------------------

def _oracle_call_before_write(kinds: tuple[OpKind, ...]) -> bool:
    """Independent definition: exists i < j with ops[i] an external call and
    ops[j] a state write.  Checked by explicit pair enumeration."""
    return any(
        kinds[i] is OpKind.EXTERNAL_CALL and kinds[j] is OpKind.STATE_WRITE
        for i in range(len(kinds))
        for j in range(i + 1, len(kinds))
    )


def test_rule_equals_oracle_over_all_sequences_up_to_length_5():
    checked = 0
    for length in range(1, 6):
        for kinds in itertools.product(OpKind, repeat=length):
            ops = tuple(_op(k) for k in kinds)
            assert has_call_before_write(ops) == _oracle_call_before_write(kinds), kinds
            checked += 1
    assert checked == 5 + 25 + 125 + 625 + 3125


def test_vulnerable_withdraw_flagged(ruleset, vulnbank):
    findings = analyze(vulnbank, ruleset)
    assert len(findings) == 1
    f = findings[0]
    assert f.vuln_class is VulnClass.REENTRANCY
    assert f.location == "withdraw"
    assert "checks-effects-interactions" in f.remediation


def test_write_before_call_is_safe(ruleset, safevault):
    assert analyze(safevault, ruleset) == []


def test_single_op_functions_never_flag(ruleset):
    for kind in OpKind:
        target = _contract("f", (kind,))
        findings = analyze(target, ruleset)
        assert findings == []


# --- web signal rules --------------------------------------------------------

def test_storefront_findings(ruleset, storefront):
    findings = analyze(storefront, ruleset)
    got = {(f.vuln_class, f.location) for f in findings}
    assert got == {
        (VulnClass.XSS, "/search"),
        (VulnClass.SQLI, "/product"),
        (VulnClass.INFO_DISCLOSURE, "/product"),
        (VulnClass.IDOR, "/account/orders"),
    }


def test_benign_signals_produce_nothing(ruleset):
    target = TargetFixture(
        target_id="t", kind=TargetKind.WEB_ENDPOINT_SET,
        endpoints=(Endpoint("/a", frozenset({"static_content", "rate_limited"})),),
    )
    assert analyze(target, ruleset) == []


def test_findings_order_is_deterministic(ruleset):
    target = TargetFixture(
        target_id="t", kind=TargetKind.WEB_ENDPOINT_SET,
        endpoints=(
            Endpoint("/b", frozenset({"sql_error_on_quote", "reflects_input"})),
            Endpoint("/a", frozenset({"verbose_stacktrace"})),
        ),
    )
    locations = [(f.location, f.vuln_class.value) for f in analyze(target, ruleset)]
    # endpoint order first, then sorted signal order within an endpoint
    assert locations == [
        ("/b", "xss"), ("/b", "sqli"), ("/a", "info_disclosure"),
    ]


def test_analysis_is_pure(ruleset, storefront):
    assert analyze(storefront, ruleset) == analyze(storefront, ruleset)


# --- fixture validation ------------------------------------------------------

class TestFixtureValidation:
    def test_unknown_signal_rejected_at_load(self, ruleset):
        with pytest.raises(FixtureError, match="unknown signal"):
            fixture_from_dict({
                "target_id": "t", "kind": "web_endpoint_set",
                "endpoints": [{"path": "/a", "signals": ["made_up_signal"]}],
            }, ruleset)

    def test_exactly_one_payload(self):
        with pytest.raises(FixtureError):
            TargetFixture(target_id="t", kind=TargetKind.WEB_ENDPOINT_SET)
        with pytest.raises(FixtureError):
            TargetFixture(target_id="t", kind=TargetKind.SMART_CONTRACT)

    def test_var_op_rules(self):
        with pytest.raises(FixtureError, match="requires a variable"):
            IrOp(OpKind.STATE_WRITE)
        with pytest.raises(FixtureError, match="takes no variable"):
            IrOp(OpKind.EMIT, "x")

    def test_empty_function_rejected(self):
        with pytest.raises(FixtureError, match="empty op list"):
            ContractFunction(name="f", ops=())

    def test_bad_kind_rejected(self, ruleset):
        with pytest.raises(FixtureError, match="kind"):
            fixture_from_dict({"target_id": "t", "kind": "firmware"}, ruleset)

    def test_malformed_ruleset_rejected(self):
        with pytest.raises(FixtureError, match="ruleset"):
            Ruleset.from_dict({"version": 1})


# --- metric arithmetic -------------------------------------------------------

class TestMetrics:
    def test_reference_counts_give_exact_ratios(self):
        m = DetectionMetrics.from_counts(tp=1599, fp=451, fn=351)
        assert (m.precision, m.recall, m.f1) == (7800, 8200, 7995)
        assert m.as_floats() == {"precision": 0.78, "recall": 0.82, "f1": 0.7995}

    def test_f1_is_harmonic_mean(self):
        # F1 of P=0.78, R=0.82 is 2PR/(P+R) = 0.79950 exactly
        f1 = harmonic_f1(Fraction(78, 100), Fraction(82, 100))
        assert f1 == Fraction(2 * 78 * 82, 100 * (78 + 82))
        assert abs(float(f1) - 0.7995) < 1e-12

    def test_undefined_cases_are_none(self):
        empty = DetectionMetrics.from_counts(tp=0, fp=0, fn=0)
        assert (empty.precision, empty.recall, empty.f1) == (None, None, None)
        no_truth = DetectionMetrics.from_counts(tp=0, fp=5, fn=0)
        assert no_truth.precision == 0
        assert no_truth.recall is None and no_truth.f1 is None
        all_zero = DetectionMetrics.from_counts(tp=0, fp=5, fn=5)
        assert (all_zero.precision, all_zero.recall) == (0, 0)
        assert all_zero.f1 is None  # P + R == 0

    def test_perfect_detection(self):
        m = DetectionMetrics.from_counts(tp=7, fp=0, fn=0)
        assert (m.precision, m.recall, m.f1) == (10_000, 10_000, 10_000)

    def test_rounding_is_half_up(self):
        # precision = 1/20000 → 0.5 ten-thousandths → rounds up to 1
        assert DetectionMetrics.from_counts(tp=1, fp=19_999, fn=0).precision == 1
        # precision = 1/30000 → 0.33… → rounds down to 0
        assert DetectionMetrics.from_counts(tp=1, fp=29_999, fn=0).precision == 0

    @given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
    @settings(max_examples=200, deadline=None)
    def test_f1_between_min_and_max_of_p_r(self, tp, fp, fn):
        precision = Fraction(tp, tp + fp) if tp + fp else None
        recall = Fraction(tp, tp + fn) if tp + fn else None
        f1 = harmonic_f1(precision, recall)
        if f1 is None:
            assert precision is None or recall is None or precision + recall == 0
        else:
            assert min(precision, recall) <= f1 <= max(precision, recall)
            assert f1 <= 2 * precision and f1 <= 2 * recall

    @given(st.integers(0, 300), st.integers(0, 300))
    @settings(max_examples=100, deadline=None)
    def test_f1_symmetry(self, a, b):
        pa = Fraction(a, 301)
        pb = Fraction(b, 301)
        assert harmonic_f1(pa, pb) == harmonic_f1(pb, pa)


# --- scoring -----------------------------------------------------------------

class TestScoring:
    def _truth(self, *labels):
        return GroundTruth(target_id="t", labels=frozenset(labels))

    def _finding(self, vuln_class, location):
        from anchorscan.report import Finding

        return Finding(
            vuln_class=vuln_class, location=location, severity_tenths=50,
            confidence_hundredths=50, remediation="fix",
        )

    def test_exact_match_is_tp(self):
        m = score_detections(
            [self._finding(VulnClass.XSS, "/a")],
            self._truth((VulnClass.XSS, "/a")), target_id="t",
        )
        assert (m.tp, m.fp, m.fn) == (1, 0, 0)

    def test_wrong_class_same_location_is_fp_and_fn(self):
        m = score_detections(
            [self._finding(VulnClass.SQLI, "/a")],
            self._truth((VulnClass.XSS, "/a")), target_id="t",
        )
        assert (m.tp, m.fp, m.fn) == (0, 1, 1)

    def test_label_consumed_once(self):
        findings = [self._finding(VulnClass.XSS, "/a"), self._finding(VulnClass.XSS, "/a")]
        m = score_detections(findings, self._truth((VulnClass.XSS, "/a")), target_id="t")
        assert (m.tp, m.fp, m.fn) == (1, 1, 0)

    def test_missed_label_is_fn(self):
        m = score_detections(
            [], self._truth((VulnClass.IDOR, "/x"), (VulnClass.XSS, "/y")), target_id="t"
        )
        assert (m.tp, m.fp, m.fn) == (0, 0, 2)

    def test_target_mismatch_raises(self):
        with pytest.raises(TargetMismatchError):
            score_detections([], self._truth(), target_id="other")

    @given(
        st.lists(
            st.tuples(st.sampled_from(VulnClass), st.sampled_from(["/a", "/b", "/c"])),
            max_size=8,
        ),
        st.sets(
            st.tuples(st.sampled_from(VulnClass), st.sampled_from(["/a", "/b", "/c"])),
            max_size=8,
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_count_conservation(self, finding_keys, labels):
        findings = [self._finding(vc, loc) for vc, loc in finding_keys]
        m = score_detections(
            findings, GroundTruth(target_id="t", labels=frozenset(labels)), target_id="t"
        )
        assert m.tp + m.fp == len(findings)
        assert m.tp + m.fn == len(labels)
        assert m.tp <= min(len(findings), len(labels))


def test_default_ruleset_loads_and_knows_all_fixture_signals():
    rs = default_ruleset()
    assert "reflects_input" in rs.known_signals
    assert "static_content" in rs.known_signals
    assert rs.reentrancy_rule.vuln_class is VulnClass.REENTRANCY
