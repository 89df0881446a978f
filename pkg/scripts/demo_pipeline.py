#!/usr/bin/env python3
"""End-to-end walkthrough on a throwaway store.

Scans the shipped fixtures, verifies the store, then flips one byte in a
stored report and shows the verifier catching it.
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from anchorscan.analyzer import default_ruleset, load_fixture
from anchorscan.coordinator import ArtifactStore, run_workflow
from anchorscan.ledger import ChainConfig, SimChain
from anchorscan.verifier import verify_store

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "targets"
AUDITOR = bytes.fromhex("a0dec0de" + "00" * 14 + "0001")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=1337)
    args = parser.parse_args()

    ruleset = default_ruleset()
    with tempfile.TemporaryDirectory(prefix="anchorscan-demo-") as tmp:
        store = ArtifactStore(tmp)
        chain = SimChain(ChainConfig(rng_seed=args.seed))

        print("== scan ==")
        results = []
        for fixture_path in sorted(FIXTURES.glob("*.json")):
            target = load_fixture(fixture_path, ruleset)
            result = run_workflow(target, ruleset, chain, store, auditor=AUDITOR)
            results.append(result)
            print(f"{target.target_id:12s} findings={len(result.report.findings)} "
                  f"digest={result.digest.hex[:16]}… tx={result.tx.status.value}")

        print("\n== verify (clean) ==")
        for item in verify_store(store, chain):
            print(f"{item.report_id} -> {item.verdict.state.value}")

        victim = results[0]
        raw = bytearray(victim.path.read_bytes())
        raw[len(raw) // 2] ^= 0x01
        victim.path.write_bytes(bytes(raw))
        print(f"\n== verify (after flipping one byte in {victim.path.name[:20]}…) ==")
        for item in verify_store(store, chain):
            state = item.verdict.state.value
            marker = "  <-- detected" if state == "tampered" else ""
            print(f"{item.report_id} -> {state}{marker}")


if __name__ == "__main__":
    main()
