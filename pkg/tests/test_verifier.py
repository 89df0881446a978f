"""Verification verdicts: intact, tampered, not-logged, unverifiable."""

from __future__ import annotations

import json
import random

import pytest

from anchorscan.coordinator import run_workflow
from anchorscan.ledger import LedgerUnavailableError
from anchorscan.report import Digest, canonical_json_bytes, digest_of_bytes
from anchorscan.verifier import (
    StoreVerdict,
    Verdict,
    VerdictState,
    verify,
    verify_store,
)
from tests.conftest import AUDITOR


class CountingLedger:
    """Delegating wrapper that counts getter calls."""

    def __init__(self, inner):
        self.inner = inner
        self.get_calls = 0

    def get_log(self, payload_hash):
        self.get_calls += 1
        return self.inner.get_log(payload_hash)

    def __getattr__(self, name):
        return getattr(self.inner, name)


class UnreachableLedger:
    def get_log(self, payload_hash):
        raise LedgerUnavailableError("node unreachable")


@pytest.fixture()
def anchored(vulnbank, ruleset, chain, store):
    """One report anchored on the sim chain and persisted in the store."""
    result = run_workflow(vulnbank, ruleset, chain, store, auditor=AUDITOR)
    return result, result.path.read_bytes()


# --- single-file verdicts ----------------------------------------------------

class TestVerify:
    def test_intact_round_trip(self, anchored, chain):
        result, data = anchored
        verdict = verify(data, chain, expected=result.digest)
        assert verdict.state is VerdictState.INTACT
        assert verdict.expected == verdict.actual == result.digest
        assert "anchored" in verdict.note

    def test_byte_flip_is_tampered_without_a_ledger_call(self, anchored, chain):
        result, data = anchored
        flipped = bytearray(data)
        flipped[10] ^= 0x01
        counting = CountingLedger(chain)
        verdict = verify(bytes(flipped), counting, expected=result.digest)
        assert verdict.state is VerdictState.TAMPERED
        assert counting.get_calls == 0
        assert verdict.retrieval_ms == 0.0
        assert result.digest.hex in verdict.note

    def test_every_single_byte_mutation_is_caught(self, anchored, chain):
        result, data = anchored
        rng = random.Random(4242)
        for _ in range(50):
            mutated = bytearray(data)
            pos = rng.randrange(len(mutated))
            mutated[pos] ^= 1 << rng.randrange(8)
            verdict = verify(bytes(mutated), chain, expected=result.digest)
            assert verdict.state is VerdictState.TAMPERED

    def test_index_forged_to_match_garbage_is_still_tampered(self, chain):
        # attacker replaces the file AND rewrites the claim to match it:
        # the digest agrees, but the bytes are no canonical report
        garbage = b'{"report": "trust me"}'
        verdict = verify(garbage, chain, expected=digest_of_bytes(garbage))
        assert verdict.state is VerdictState.TAMPERED
        assert verdict.expected is None  # no agreeing-claim contradiction
        assert "not a canonical report" in verdict.note

    def test_whitespace_reformatting_never_verifies_intact(self, anchored, chain):
        # same JSON data, pretty-printed: raw bytes are hashed, so a
        # formatting-level rewrite can never reach INTACT.  Against the
        # original claim it is an outright digest contradiction; even with a
        # forged claim the rewritten digest has no anchor.
        result, data = anchored
        pretty = json.dumps(json.loads(data), indent=2).encode()
        assert pretty != data
        against_original = verify(pretty, chain, expected=result.digest)
        assert against_original.state is VerdictState.TAMPERED
        with_forged_claim = verify(pretty, chain, expected=digest_of_bytes(pretty))
        assert with_forged_claim.state is VerdictState.NOT_LOGGED

    def test_unanchored_report_is_not_logged(self, anchored, chain):
        # a well-formed report whose digest was never submitted
        _, data = anchored
        obj = json.loads(data)
        obj["target_ref"] = obj["target_ref"] + "-fork"
        fresh = canonical_json_bytes(obj)
        verdict = verify(fresh, chain, expected=digest_of_bytes(fresh))
        assert verdict.state is VerdictState.NOT_LOGGED
        assert "no anchor" in verdict.note

    def test_mutation_without_claim_downgrades_to_not_logged(self, anchored, chain):
        # with no index claim, a rewrite that still parses canonically is
        # indistinguishable from a new unanchored report
        _, data = anchored
        obj = json.loads(data)
        obj["target_ref"] = obj["target_ref"] + "-fork"
        verdict = verify(canonical_json_bytes(obj), chain, expected=None)
        assert verdict.state is VerdictState.NOT_LOGGED

    def test_unreachable_ledger_raises_instead_of_intact(self, anchored):
        _, data = anchored
        with pytest.raises(LedgerUnavailableError):
            verify(data, UnreachableLedger(), expected=digest_of_bytes(data))

    def test_verify_is_read_only(self, anchored, chain, store):
        result, data = anchored
        before_store = store.content_digest()
        before_events = chain.minted_events
        verify(data, chain, expected=result.digest)
        assert store.content_digest() == before_store
        assert chain.minted_events == before_events

    def test_to_dict_rounds_timings(self, anchored, chain):
        result, data = anchored
        verdict = verify(data, chain, expected=result.digest)
        d = verdict.to_dict()
        assert d["state"] == "intact"
        assert d["expected"] == d["actual"] == result.digest.hex
        assert d["retrieval_ms"] == round(d["retrieval_ms"], 3)
        assert d["recompute_ms"] == round(d["recompute_ms"], 3)


# --- verdict invariants ------------------------------------------------------

class TestVerdictInvariants:
    def _mk(self, state, expected, actual):
        return Verdict(
            state=state, expected=expected, actual=actual, note="",
            checked_at_ms=0, retrieval_ms=0.0, recompute_ms=0.0,
        )

    def test_intact_requires_agreement(self):
        a = digest_of_bytes(b"a")
        b = digest_of_bytes(b"b")
        with pytest.raises(ValueError, match="agree"):
            self._mk(VerdictState.INTACT, a, b)

    def test_tampered_forbids_agreeing_claim(self):
        a = digest_of_bytes(b"a")
        with pytest.raises(ValueError, match="contradicted"):
            self._mk(VerdictState.TAMPERED, a, a)

    def test_store_verdict_is_exclusive(self):
        a = digest_of_bytes(b"a")
        ok = self._mk(VerdictState.INTACT, a, a)
        with pytest.raises(ValueError, match="exactly one"):
            StoreVerdict("rid", ok, "also an error")
        with pytest.raises(ValueError, match="exactly one"):
            StoreVerdict("rid", None, None)


# --- whole-store sweeps ------------------------------------------------------

class TestVerifyStore:
    def test_sweep_continues_past_errors(self, vulnbank, safevault, storefront,
                                         ruleset, chain, store):
        r1 = run_workflow(vulnbank, ruleset, chain, store, auditor=AUDITOR)
        r2 = run_workflow(safevault, ruleset, chain, store, auditor=AUDITOR)
        r3 = run_workflow(storefront, ruleset, chain, store, auditor=AUDITOR)

        # corrupt r2's file after indexing; delete r3's file entirely
        r2.path.write_bytes(r2.path.read_bytes() + b" ")
        r3.path.unlink()

        results = verify_store(store, chain)
        assert [r.report_id for r in results] == sorted(
            [r1.report.report_id, r2.report.report_id, r3.report.report_id]
        )
        by_id = {r.report_id: r for r in results}
        assert by_id[r1.report.report_id].verdict.state is VerdictState.INTACT
        assert by_id[r2.report.report_id].verdict.state is VerdictState.TAMPERED
        missing = by_id[r3.report.report_id]
        assert missing.verdict is None
        assert missing.error.startswith("store error:")

    def test_sweep_flags_unreachable_ledger_per_entry(self, anchored, store):
        results = verify_store(store, UnreachableLedger())
        assert len(results) == 1
        assert results[0].verdict is None
        assert results[0].error.startswith("unverifiable:")

    def test_sweep_rejects_bad_index_digests(self, anchored, chain, store):
        result, _ = anchored
        index = store.load_index()
        index["entries"]["zz-bad"] = {
            "path": result.path.name, "digest": "not-hex",
        }
        store._write_atomic(store.index_path, canonical_json_bytes(index))
        by_id = {r.report_id: r for r in verify_store(store, chain)}
        assert by_id["zz-bad"].error.startswith("store error:")
        assert by_id[result.report.report_id].verdict.state is VerdictState.INTACT

    def test_clean_store_is_fully_intact(self, vulnbank, safevault, ruleset,
                                         chain, store):
        run_workflow(vulnbank, ruleset, chain, store, auditor=AUDITOR)
        run_workflow(safevault, ruleset, chain, store, auditor=AUDITOR)
        results = verify_store(store, chain)
        assert len(results) == 2
        assert all(r.verdict.state is VerdictState.INTACT for r in results)
