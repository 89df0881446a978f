#!/usr/bin/env python3
"""Generate the synthetic evaluation corpus.

Emits 50 targets (45 web endpoint sets, 5 contract IR fixtures) with ground
truth engineered so the reference ruleset aggregates to exactly

    tp=1599  fp=451  fn=351

giving precision 1599/2050 = 0.7800 and recall 1599/1950 = 0.8200 on the
nose.  Each endpoint/function plays one detection role:

    tp — carries a rule-bearing signal and a matching truth label
    fp — carries a rule-bearing signal but no label
    fn — carries no rule-bearing signal but does carry a label
    tn — benign signals only, no label (metrics-neutral padding)

The generator is deterministic for a given seed; the checked-in corpus
under fixtures/corpus was produced with the default seed.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

from anchorscan.analyzer import DEFAULT_RULESET_DICT

# Aggregate role quotas (web + contract must sum to these).
TP_TOTAL, FP_TOTAL, FN_TOTAL = 1599, 451, 351
CONTRACT_TP, CONTRACT_FP, CONTRACT_FN = 24, 6, 6
WEB_TARGETS, CONTRACT_TARGETS = 45, 5
TN_WEB = 230  # padding endpoints that produce neither findings nor labels

SIGNAL_RULES = DEFAULT_RULESET_DICT["signal_rules"]
RULE_SIGNALS = sorted(SIGNAL_RULES)
BENIGN_SIGNALS = sorted(DEFAULT_RULESET_DICT["benign_signals"])
WEB_CLASSES = sorted({rule["vuln_class"] for rule in SIGNAL_RULES.values()})

VULN_OPS = [
    {"op": "state_read", "var": "balances"},
    {"op": "require"},
    {"op": "external_call"},
    {"op": "state_write", "var": "balances"},
]
SAFE_OPS = [
    {"op": "state_read", "var": "balances"},
    {"op": "require"},
    {"op": "state_write", "var": "balances"},
    {"op": "external_call"},
]


def chunk_roles(rng: random.Random, roles: list[str], n_chunks: int) -> list[list[str]]:
    rng.shuffle(roles)
    chunks: list[list[str]] = [[] for _ in range(n_chunks)]
    for i, role in enumerate(roles):
        chunks[i % n_chunks].append(role)
    return chunks


def class_for_signal(signal: str) -> str:
    return SIGNAL_RULES[signal]["vuln_class"]


def make_web_target(rng: random.Random, idx: int, roles: list[str]) -> tuple[dict, dict]:
    target_id = f"web{idx:03d}"
    endpoints, labels = [], []
    for e_idx, role in enumerate(roles):
        path = f"/t{idx}/e{e_idx}"
        signals: list[str] = []
        if role in ("tp", "fp"):
            signal = rng.choice(RULE_SIGNALS)
            signals.append(signal)
            if role == "tp":
                labels.append({"vuln_class": class_for_signal(signal), "location": path})
        elif role == "fn":
            labels.append({"vuln_class": rng.choice(WEB_CLASSES), "location": path})
        if rng.random() < 0.3:
            signals.append(rng.choice(BENIGN_SIGNALS))
        endpoints.append({"path": path, "signals": sorted(set(signals))})
    target = {"target_id": target_id, "kind": "web_endpoint_set", "endpoints": endpoints}
    truth = {"target_id": target_id, "labels": labels}
    return target, truth


def make_contract_target(rng: random.Random, idx: int, roles: list[str]) -> tuple[dict, dict]:
    target_id = f"contract{idx:03d}"
    functions, labels = [], []
    for f_idx, role in enumerate(roles):
        name = f"fn_{f_idx}"
        if role in ("tp", "fp"):
            ops = VULN_OPS
        else:
            ops = SAFE_OPS
        if role in ("tp", "fn"):
            labels.append({"vuln_class": "reentrancy", "location": name})
        functions.append({"name": name, "ops": ops})
    target = {"target_id": target_id, "kind": "smart_contract", "functions": functions}
    truth = {"target_id": target_id, "labels": labels}
    return target, truth


def build_corpus(seed: int) -> list[tuple[dict, dict]]:
    rng = random.Random(seed)
    web_roles = (
        ["tp"] * (TP_TOTAL - CONTRACT_TP)
        + ["fp"] * (FP_TOTAL - CONTRACT_FP)
        + ["fn"] * (FN_TOTAL - CONTRACT_FN)
        + ["tn"] * TN_WEB
    )
    contract_roles = (
        ["tp"] * CONTRACT_TP + ["fp"] * CONTRACT_FP + ["fn"] * CONTRACT_FN + ["tn"] * 4
    )
    out: list[tuple[dict, dict]] = []
    for idx, roles in enumerate(chunk_roles(rng, web_roles, WEB_TARGETS)):
        out.append(make_web_target(rng, idx, roles))
    for idx, roles in enumerate(chunk_roles(rng, contract_roles, CONTRACT_TARGETS)):
        out.append(make_contract_target(rng, idx, roles))
    return out


def write_corpus(corpus_dir: Path, pairs: list[tuple[dict, dict]]) -> None:
    targets_dir = corpus_dir / "targets"
    truth_dir = corpus_dir / "truth"
    targets_dir.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)
    for target, truth in pairs:
        tid = target["target_id"]
        (targets_dir / f"{tid}.json").write_text(
            json.dumps(target, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (truth_dir / f"{tid}.json").write_text(
            json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="fixtures/corpus", help="corpus output directory")
    parser.add_argument("--seed", type=int, default=20_240_501)
    args = parser.parse_args()

    pairs = build_corpus(args.seed)
    write_corpus(Path(args.out), pairs)

    n_web = sum(1 for t, _ in pairs if t["kind"] == "web_endpoint_set")
    n_contract = len(pairs) - n_web
    n_labels = sum(len(tr["labels"]) for _, tr in pairs)
    print(f"wrote {len(pairs)} targets ({n_web} web, {n_contract} contract), "
          f"{n_labels} truth labels to {args.out}")


if __name__ == "__main__":
    main()
