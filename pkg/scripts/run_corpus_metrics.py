#!/usr/bin/env python3
"""Score the reference analyzer over a corpus and print detection metrics."""

from __future__ import annotations

import argparse
import json

from anchorscan.analyzer import Ruleset, default_ruleset
from anchorscan.bench import run_corpus_metrics


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", default="fixtures/corpus")
    parser.add_argument("--ruleset", default=None, help="ruleset JSON (default: packaged rules)")
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()

    ruleset = default_ruleset() if args.ruleset is None else Ruleset.load(args.ruleset)
    metrics = run_corpus_metrics(args.corpus, ruleset)
    floats = metrics.as_floats()
    if args.json:
        print(json.dumps({"tp": metrics.tp, "fp": metrics.fp, "fn": metrics.fn, **floats},
                         indent=2, sort_keys=True))
    else:
        print(f"tp={metrics.tp} fp={metrics.fp} fn={metrics.fn}")
        for name in ("precision", "recall", "f1"):
            value = floats[name]
            print(f"{name}: {'undefined' if value is None else f'{value:.4f}'}")


if __name__ == "__main__":
    main()
