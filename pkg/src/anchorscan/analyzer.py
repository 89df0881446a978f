"""Deterministic rule-based analysis engine and detection scoring.

The engine is a pure function from (fixture, ruleset) to findings: web
endpoints are matched against a signal->rule table, smart-contract IR is
checked structurally (an external call followed by a state write flags
reentrancy).  Rule tables live in a versioned JSON config so corpora and
severities can be tuned without code changes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .report import Finding, VulnClass


class FixtureError(ValueError):
    """A target fixture or ruleset file is malformed."""


class TargetMismatchError(ValueError):
    """Findings were scored against ground truth for a different target."""


class TargetKind(enum.Enum):
    WEB_ENDPOINT_SET = "web_endpoint_set"
    SMART_CONTRACT = "smart_contract"


class OpKind(enum.Enum):
    EXTERNAL_CALL = "external_call"
    STATE_WRITE = "state_write"
    STATE_READ = "state_read"
    REQUIRE = "require"
    EMIT = "emit"


_VAR_OPS = {OpKind.STATE_WRITE, OpKind.STATE_READ}


@dataclass(frozen=True)
class IrOp:
    kind: OpKind
    var: str | None = None

    def __post_init__(self) -> None:
        if self.kind in _VAR_OPS and not self.var:
            raise FixtureError(f"{self.kind.value} op requires a variable name")
        if self.kind not in _VAR_OPS and self.var is not None:
            raise FixtureError(f"{self.kind.value} op takes no variable")


@dataclass(frozen=True)
class ContractFunction:
    name: str
    ops: tuple[IrOp, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise FixtureError("contract function name must be non-empty")
        if not self.ops:
            raise FixtureError(f"function {self.name!r} has an empty op list")


@dataclass(frozen=True)
class ContractIR:
    functions: tuple[ContractFunction, ...]


@dataclass(frozen=True)
class Endpoint:
    path: str
    signals: frozenset[str]

    def __post_init__(self) -> None:
        if not self.path:
            raise FixtureError("endpoint path must be non-empty")


@dataclass(frozen=True)
class TargetFixture:
    target_id: str
    kind: TargetKind
    endpoints: tuple[Endpoint, ...] | None = None
    contract_ir: ContractIR | None = None

    def __post_init__(self) -> None:
        if not self.target_id:
            raise FixtureError("target_id must be non-empty")
        if self.kind is TargetKind.WEB_ENDPOINT_SET:
            if self.endpoints is None or self.contract_ir is not None:
                raise FixtureError("web fixture must carry endpoints and no contract IR")
        else:
            if self.contract_ir is None or self.endpoints is not None:
                raise FixtureError("contract fixture must carry contract IR and no endpoints")

    def locations(self) -> frozenset[str]:
        """All endpoint paths / function names this fixture defines."""
        if self.kind is TargetKind.WEB_ENDPOINT_SET:
            assert self.endpoints is not None
            return frozenset(e.path for e in self.endpoints)
        assert self.contract_ir is not None
        return frozenset(f.name for f in self.contract_ir.functions)


@dataclass(frozen=True)
class GroundTruth:
    target_id: str
    labels: frozenset[tuple[VulnClass, str]]


# --- ruleset -----------------------------------------------------------------

@dataclass(frozen=True)
class SignalRule:
    vuln_class: VulnClass
    severity_tenths: int
    confidence_hundredths: int
    remediation: str


@dataclass(frozen=True)
class Ruleset:
    """Versioned rule table driving the reference engine.

    ``known_signals`` is the full signal vocabulary; fixtures using anything
    outside it are rejected at load time, before analysis ever runs.
    """

    version: int
    signal_rules: dict[str, SignalRule]
    reentrancy_rule: SignalRule
    benign_signals: frozenset[str]

    @property
    def known_signals(self) -> frozenset[str]:
        return frozenset(self.signal_rules) | self.benign_signals

    @classmethod
    def from_dict(cls, obj: dict) -> "Ruleset":
        try:
            signal_rules = {
                sig: SignalRule(
                    vuln_class=VulnClass(rule["vuln_class"]),
                    severity_tenths=int(rule["severity_tenths"]),
                    confidence_hundredths=int(rule["confidence_hundredths"]),
                    remediation=str(rule["remediation"]),
                )
                for sig, rule in obj["signal_rules"].items()
            }
            reentrancy = obj["contract_rules"]["reentrancy"]
            reentrancy_rule = SignalRule(
                vuln_class=VulnClass.REENTRANCY,
                severity_tenths=int(reentrancy["severity_tenths"]),
                confidence_hundredths=int(reentrancy["confidence_hundredths"]),
                remediation=str(reentrancy["remediation"]),
            )
            return cls(
                version=int(obj["version"]),
                signal_rules=signal_rules,
                reentrancy_rule=reentrancy_rule,
                benign_signals=frozenset(obj.get("benign_signals", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FixtureError(f"malformed ruleset: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Ruleset":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


DEFAULT_RULESET_DICT: dict = {
    "version": 1,
    "signal_rules": {
        "reflects_input": {
            "vuln_class": "xss",
            "severity_tenths": 61,
            "confidence_hundredths": 85,
            "remediation": "encode user-controlled output before rendering",
        },
        "sql_error_on_quote": {
            "vuln_class": "sqli",
            "severity_tenths": 82,
            "confidence_hundredths": 90,
            "remediation": "use parameterized queries for all database access",
        },
        "direct_object_reference": {
            "vuln_class": "idor",
            "severity_tenths": 64,
            "confidence_hundredths": 80,
            "remediation": "enforce object-level authorization on every lookup",
        },
        "verbose_stacktrace": {
            "vuln_class": "info_disclosure",
            "severity_tenths": 33,
            "confidence_hundredths": 75,
            "remediation": "disable debug error pages outside development",
        },
    },
    "contract_rules": {
        "reentrancy": {
            "severity_tenths": 91,
            "confidence_hundredths": 90,
            "remediation": (
                "reorder to checks-effects-interactions: update balances "
                "before the external call, or add a reentrancy guard"
            ),
        },
    },
    "benign_signals": ["static_content", "rate_limited", "cached_response"],
}


def default_ruleset() -> Ruleset:
    """The packaged reference rule table used when no ruleset file is given."""
    return Ruleset.from_dict(DEFAULT_RULESET_DICT)


# --- fixture loading ---------------------------------------------------------

def fixture_from_dict(obj: dict, ruleset: Ruleset) -> TargetFixture:
    try:
        kind = TargetKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise FixtureError(f"bad or missing fixture kind: {exc}") from exc
    target_id = obj.get("target_id")
    if not isinstance(target_id, str) or not target_id:
        raise FixtureError("fixture target_id must be a non-empty string")

    if kind is TargetKind.WEB_ENDPOINT_SET:
        endpoints = []
        for e_obj in obj.get("endpoints", []):
            signals = frozenset(e_obj.get("signals", []))
            unknown = signals - ruleset.known_signals
            if unknown:
                raise FixtureError(
                    f"unknown signal tags {sorted(unknown)} on endpoint {e_obj.get('path')!r}"
                )
            endpoints.append(Endpoint(path=e_obj["path"], signals=signals))
        return TargetFixture(target_id=target_id, kind=kind, endpoints=tuple(endpoints))

    functions = []
    for f_obj in obj.get("functions", []):
        ops = []
        for op_obj in f_obj.get("ops", []):
            try:
                op_kind = OpKind(op_obj["op"])
            except (KeyError, ValueError) as exc:
                raise FixtureError(f"bad IR op in {f_obj.get('name')!r}: {exc}") from exc
            ops.append(IrOp(kind=op_kind, var=op_obj.get("var")))
        functions.append(ContractFunction(name=f_obj["name"], ops=tuple(ops)))
    return TargetFixture(
        target_id=target_id, kind=kind, contract_ir=ContractIR(functions=tuple(functions))
    )


def load_fixture(path: str | Path, ruleset: Ruleset) -> TargetFixture:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FixtureError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return fixture_from_dict(obj, ruleset)
    except FixtureError as exc:
        raise FixtureError(f"{path}: {exc}") from exc


def load_truth(path: str | Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        labels = frozenset(
            (VulnClass(lbl["vuln_class"]), str(lbl["location"])) for lbl in obj["labels"]
        )
        return GroundTruth(target_id=str(obj["target_id"]), labels=labels)
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"{path}: malformed ground truth: {exc}") from exc


# --- analysis ----------------------------------------------------------------

def has_call_before_write(ops: tuple[IrOp, ...]) -> bool:
    """True iff some external call precedes a state write in the op list."""
    seen_call = False
    for op in ops:
        if op.kind is OpKind.EXTERNAL_CALL:
            seen_call = True
        elif op.kind is OpKind.STATE_WRITE and seen_call:
            return True
    return False


def analyze(target: TargetFixture, ruleset: Ruleset) -> list[Finding]:
    """Run the reference engine over one fixture.

    Pure and deterministic: endpoints in fixture order, signals in sorted
    order, contract functions in fixture order.
    """
    findings: list[Finding] = []
    if target.kind is TargetKind.WEB_ENDPOINT_SET:
        assert target.endpoints is not None
        for endpoint in target.endpoints:
            for signal in sorted(endpoint.signals):
                rule = ruleset.signal_rules.get(signal)
                if rule is None:
                    continue
                findings.append(Finding(
                    vuln_class=rule.vuln_class,
                    location=endpoint.path,
                    severity_tenths=rule.severity_tenths,
                    confidence_hundredths=rule.confidence_hundredths,
                    remediation=rule.remediation,
                ))
    else:
        assert target.contract_ir is not None
        rule = ruleset.reentrancy_rule
        for fn in target.contract_ir.functions:
            if has_call_before_write(fn.ops):
                findings.append(Finding(
                    vuln_class=VulnClass.REENTRANCY,
                    location=fn.name,
                    severity_tenths=rule.severity_tenths,
                    confidence_hundredths=rule.confidence_hundredths,
                    remediation=rule.remediation,
                ))
    return findings


# --- detection metrics -------------------------------------------------------

@dataclass(frozen=True)
class DetectionMetrics:
    """TP/FP/FN counts with precision/recall/F1 in ten-thousandths.

    Ratios with zero denominators are None (undefined), never 0: an empty
    corpus has no precision, rather than a terrible one.
    """

    tp: int
    fp: int
    fn: int
    precision: int | None
    recall: int | None
    f1: int | None

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "DetectionMetrics":
        precision = Fraction(tp, tp + fp) if tp + fp > 0 else None
        recall = Fraction(tp, tp + fn) if tp + fn > 0 else None
        f1 = harmonic_f1(precision, recall)
        return cls(
            tp=tp, fp=fp, fn=fn,
            precision=_ten_thousandths(precision),
            recall=_ten_thousandths(recall),
            f1=_ten_thousandths(f1),
        )

    def as_floats(self) -> dict[str, float | None]:
        return {
            "precision": None if self.precision is None else self.precision / 10_000,
            "recall": None if self.recall is None else self.recall / 10_000,
            "f1": None if self.f1 is None else self.f1 / 10_000,
        }


def harmonic_f1(precision: Fraction | None, recall: Fraction | None) -> Fraction | None:
    """F1 = 2PR/(P+R); undefined when either ratio is, or when P+R == 0."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def _ten_thousandths(value: Fraction | None) -> int | None:
    if value is None:
        return None
    scaled = value * 10_000
    floor = scaled.numerator // scaled.denominator
    # round half up
    if (scaled - floor) * 2 >= 1:
        floor += 1
    return int(floor)


def score_detections(
    findings: list[Finding], truth: GroundTruth, *, target_id: str
) -> DetectionMetrics:
    """Score findings against ground truth for one target.

    A finding is a true positive iff its (class, location) pair exactly
    matches a label; labels are consumed at most once, greedily in finding
    order.  Leftover findings are false positives, leftover labels false
    negatives.
    """
    if target_id != truth.target_id:
        raise TargetMismatchError(
            f"findings for {target_id!r} scored against truth for {truth.target_id!r}"
        )
    unmatched = set(truth.labels)
    tp = fp = 0
    for finding in findings:
        key = (finding.vuln_class, finding.location)
        if key in unmatched:
            unmatched.remove(key)
            tp += 1
        else:
            fp += 1
    return DetectionMetrics.from_counts(tp=tp, fp=fp, fn=len(unmatched))
