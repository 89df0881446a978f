"""Command-line entry point.

Subcommands: ``scan`` (analyze a target, anchor the report digest), ``log``
(anchor an existing canonical report file), ``verify`` (recompute digests
and classify against the ledger), ``bench`` (overhead / latency
accounting), ``metrics`` (corpus detection metrics), and ``ledger``
(inspect anchors, list mint events, advance simulated time).

Exit codes: 0 success / all intact; 1 analysis or input error;
2 any tampered report; 3 not logged / absent anchor; 4 unverifiable
(ledger unreachable); 5 ledger submission failure; 64 bad configuration;
75 store locked by another process.  When several apply to a verify sweep,
precedence is 2, then 4, then 3.

With ``--json``, every code path — including failures — emits exactly one
JSON object on stdout.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from .analyzer import FixtureError, Ruleset, default_ruleset, load_fixture
from .bench import (
    BenchConfig,
    BenchConfigError,
    MissingTruthError,
    run_corpus_metrics,
    run_latency_bench,
    run_overhead_bench,
)
from .config import CliConfig, ConfigError, load_config
from .coordinator import (
    AnalysisError,
    ArtifactStore,
    LedgerSubmitError,
    run_workflow,
)
from .ledger import (
    DUPLICATE_REASON,
    Ledger,
    LedgerUnavailableError,
    SimChain,
    TxStatus,
)
from .report import Digest, ReportError, digest_of_bytes, parse
from .verifier import VerdictState, verify, verify_store

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_TAMPERED = 2
EXIT_NOT_LOGGED = 3
EXIT_UNVERIFIABLE = 4
EXIT_LEDGER = 5
EXIT_CONFIG = 64
EXIT_LOCKED = 75


class _Output:
    def __init__(self, as_json: bool):
        self.as_json = as_json

    def emit(self, payload: dict) -> None:
        if self.as_json:
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            for line in _render(payload):
                print(line)

    def fail(self, message: str, code: int) -> int:
        if self.as_json:
            print(json.dumps({"error": message, "exit_code": code}, sort_keys=True))
        else:
            print(f"error: {message}", file=sys.stderr)
        return code


def _render(value: object, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines: list[str] = []
    if isinstance(value, dict):
        for key, val in value.items():
            if isinstance(val, (dict, list)):
                lines.append(f"{pad}{key}:")
                lines.extend(_render(val, indent + 1))
            else:
                lines.append(f"{pad}{key}: {val}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_render(item, indent + 1))
            else:
                lines.append(f"{pad}- {item}")
    else:
        lines.append(f"{pad}{value}")
    return lines


@contextlib.contextmanager
def _store_lock(store_dir: Path):
    """Advisory single-writer lock for commands that mutate the store."""
    import fcntl

    store_dir.mkdir(parents=True, exist_ok=True)
    lock_path = store_dir / ".lock"
    with open(lock_path, "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise StoreLockedError(f"store {store_dir} is locked by another process")
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


class StoreLockedError(Exception):
    pass


def _load_ruleset(cfg: CliConfig) -> Ruleset:
    if cfg.ruleset_path is None:
        return default_ruleset()
    return Ruleset.load(cfg.ruleset_path)


def _open_ledger(cfg: CliConfig) -> tuple[Ledger, "callable"]:
    """Return (ledger, save) where save persists sim-chain state (no-op for rpc)."""
    if cfg.backend == "sim":
        chain_path = cfg.store / "chain.json"
        if chain_path.exists():
            chain = SimChain.load(chain_path)
        else:
            chain = SimChain(cfg.chain)
        return chain, lambda: chain.save(chain_path)
    from .rpc import RpcLedger

    ledger = RpcLedger(
        url=cfg.rpc_url,
        contract=cfg.rpc_contract,
        auditor=cfg.auditor,
        chain_id=cfg.rpc_chain_id,
    )
    return ledger, lambda: None


def _parse_digest(text: str) -> Digest:
    return Digest.from_hex(text.removeprefix("0x").lower())


# --- commands ----------------------------------------------------------------

def cmd_scan(cfg: CliConfig, out: _Output, target_path: str) -> int:
    try:
        ruleset = _load_ruleset(cfg)
        target = load_fixture(target_path, ruleset)
    except (FixtureError, OSError) as exc:
        return out.fail(f"cannot load target: {exc}", EXIT_ANALYSIS)

    with _store_lock(cfg.store):
        store = ArtifactStore(cfg.store)
        ledger, save = _open_ledger(cfg)
        try:
            result = run_workflow(
                target, ruleset, ledger, store,
                auditor=cfg.auditor,
                report_epoch_s=cfg.report_epoch_s,
            )
        except AnalysisError as exc:
            return out.fail(str(exc), EXIT_ANALYSIS)
        except (LedgerSubmitError, LedgerUnavailableError) as exc:
            save()
            return out.fail(str(exc), EXIT_LEDGER)
        save()

    out.emit({
        "report_id": result.report.report_id,
        "report_path": str(result.path),
        "digest": result.digest.hex,
        "tx_id": result.tx.tx_id.hex(),
        "tx_status": result.tx.status.value,
        "already_anchored": result.already_anchored,
        "completed_at_ms": result.completed_at_ms,
        "findings": len(result.report.findings),
    })
    return EXIT_OK


def cmd_log(cfg: CliConfig, out: _Output, report_path: str) -> int:
    try:
        data = Path(report_path).read_bytes()
    except OSError as exc:
        return out.fail(f"cannot read report: {exc}", EXIT_ANALYSIS)
    try:
        parse(data)
    except ReportError as exc:
        return out.fail(f"not a canonical report: {exc}", EXIT_ANALYSIS)
    digest = digest_of_bytes(data)

    with _store_lock(cfg.store):
        ledger, save = _open_ledger(cfg)
        try:
            tx = ledger.submit_log(digest, cfg.auditor)
            ledger.settle_submission(tx)
        except LedgerUnavailableError as exc:
            return out.fail(f"ledger unavailable: {exc}", EXIT_LEDGER)
        save()

    already = tx.status is TxStatus.REVERTED and tx.revert_reason == DUPLICATE_REASON
    if tx.status is TxStatus.REVERTED and not already:
        return out.fail(f"anchoring reverted: {tx.revert_reason}", EXIT_LEDGER)
    out.emit({
        "digest": digest.hex,
        "tx_id": tx.tx_id.hex(),
        "tx_status": tx.status.value,
        "already_anchored": already,
        "revert_reason": tx.revert_reason,
    })
    return EXIT_OK


def _verdict_exit(states: list[VerdictState], had_error: bool) -> int:
    if VerdictState.TAMPERED in states:
        return EXIT_TAMPERED
    if had_error:
        return EXIT_UNVERIFIABLE
    if VerdictState.NOT_LOGGED in states:
        return EXIT_NOT_LOGGED
    return EXIT_OK


def cmd_verify(cfg: CliConfig, out: _Output, report_path: str | None) -> int:
    store = ArtifactStore(cfg.store)
    ledger, _ = _open_ledger(cfg)

    if report_path is not None:
        try:
            data = Path(report_path).read_bytes()
        except OSError as exc:
            return out.fail(f"cannot read report: {exc}", EXIT_ANALYSIS)
        try:
            verdict = verify(data, ledger)
        except LedgerUnavailableError as exc:
            return out.fail(f"unverifiable: {exc}", EXIT_UNVERIFIABLE)
        out.emit({"path": report_path, **verdict.to_dict()})
        return _verdict_exit([verdict.state], had_error=False)

    results = verify_store(store, ledger)
    rows = []
    states: list[VerdictState] = []
    had_error = False
    for item in results:
        if item.verdict is not None:
            states.append(item.verdict.state)
            rows.append({"report_id": item.report_id, **item.verdict.to_dict()})
        else:
            had_error = True
            rows.append({"report_id": item.report_id, "error": item.error})
    counts = {state.value: sum(1 for s in states if s is state) for state in VerdictState}
    out.emit({"reports": rows, "counts": counts, "errors": sum(1 for i in results if i.error)})
    return _verdict_exit(states, had_error)


def cmd_bench(cfg: CliConfig, out: _Output, kind: str, n: int,
              params_path: str | None, seed: int | None) -> int:
    try:
        bench_cfg = BenchConfig() if params_path is None else BenchConfig.from_dict(
            json.loads(Path(params_path).read_text(encoding="utf-8"))
        )
        if seed is not None:
            bench_cfg = replace(bench_cfg, seed=seed)
        if kind == "overhead":
            report = run_overhead_bench(bench_cfg, n)
            if not out.as_json:
                print(report.render_table())
                return EXIT_OK
            out.emit(report.to_json_dict())
        else:
            lat = run_latency_bench(bench_cfg, n)
            out.emit(lat.to_json_dict())
        return EXIT_OK
    except (BenchConfigError, OSError, json.JSONDecodeError) as exc:
        return out.fail(f"bench failed: {exc}", EXIT_CONFIG)


def cmd_metrics(cfg: CliConfig, out: _Output, corpus_dir: str) -> int:
    try:
        ruleset = _load_ruleset(cfg)
        metrics = run_corpus_metrics(corpus_dir, ruleset)
    except (MissingTruthError, FixtureError, OSError) as exc:
        return out.fail(f"metrics failed: {exc}", EXIT_ANALYSIS)
    floats = metrics.as_floats()
    out.emit({
        "tp": metrics.tp,
        "fp": metrics.fp,
        "fn": metrics.fn,
        "precision": "undefined" if floats["precision"] is None else round(floats["precision"], 4),
        "recall": "undefined" if floats["recall"] is None else round(floats["recall"], 4),
        "f1": "undefined" if floats["f1"] is None else round(floats["f1"], 4),
    })
    return EXIT_OK


def cmd_ledger(cfg: CliConfig, out: _Output, action: str, value: str | None) -> int:
    if action == "inspect":
        ledger, _ = _open_ledger(cfg)
        try:
            digest = _parse_digest(value or "")
        except (ValueError, TypeError) as exc:
            return out.fail(f"bad digest: {exc}", EXIT_CONFIG)
        try:
            entry = ledger.get_log(digest)
        except LedgerUnavailableError as exc:
            return out.fail(f"ledger unavailable: {exc}", EXIT_UNVERIFIABLE)
        if entry is None:
            return out.fail(f"{digest.hex} not logged", EXIT_NOT_LOGGED)
        out.emit({
            "report_hash": entry.report_hash.hex,
            "timestamp": entry.timestamp,
            "auditor": "0x" + entry.auditor.hex(),
            "verified": entry.verified,
        })
        return EXIT_OK

    if action == "events":
        ledger, _ = _open_ledger(cfg)
        if not isinstance(ledger, SimChain):
            return out.fail("event listing requires the sim backend", EXIT_CONFIG)
        out.emit({"events": [
            {
                "seq": ev.seq,
                "report_hash": ev.report_hash.hex,
                "auditor": "0x" + ev.auditor.hex(),
                "timestamp": ev.timestamp,
            }
            for ev in ledger.minted_events
        ]})
        return EXIT_OK

    # advance
    if cfg.backend != "sim":
        return out.fail("time advance requires the sim backend", EXIT_CONFIG)
    try:
        delta_ms = int(value or "")
    except ValueError:
        return out.fail(f"advance needs a millisecond count, got {value!r}", EXIT_CONFIG)
    with _store_lock(cfg.store):
        ledger, save = _open_ledger(cfg)
        events = ledger.advance_time(delta_ms)
        save()
    out.emit({
        "now_ms": ledger.now_ms(),
        "fired": [
            {"at_ms": ev.at_ms, "kind": ev.kind, "tx_id": ev.tx_id.hex()} for ev in events
        ],
    })
    return EXIT_OK


# --- argument plumbing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # Global flags live on a parent parser attached to the top level and to
    # every subcommand, so they are accepted on either side of the
    # subcommand word.  SUPPRESS keeps an unset subcommand occurrence from
    # clobbering a value given before it.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="path to JSON config file")
    common.add_argument("--store", default=argparse.SUPPRESS, help="artifact store directory")
    common.add_argument(
        "--backend", choices=["sim", "rpc"], default=argparse.SUPPRESS, help="ledger backend"
    )
    common.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS,
        help="override RNG seed (sim chain / bench)",
    )
    common.add_argument(
        "--json", action="store_true", default=argparse.SUPPRESS,
        help="machine-readable JSON output",
    )

    parser = argparse.ArgumentParser(
        prog="anchorscan",
        description="Integrity-anchored vulnerability analysis workflows.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser(
        "scan", parents=[common], help="analyze a target and anchor its report"
    )
    p_scan.add_argument("target", help="target fixture JSON file")

    p_log = sub.add_parser(
        "log", parents=[common], help="anchor an existing canonical report file"
    )
    p_log.add_argument("report", help="canonical report JSON file")

    p_verify = sub.add_parser(
        "verify", parents=[common], help="verify report integrity against the ledger"
    )
    p_verify.add_argument("report", nargs="?", help="one report file (default: whole store)")
    p_verify.add_argument("--all", action="store_true", help="sweep the whole store")

    p_bench = sub.add_parser("bench", parents=[common], help="run the evaluation accounting")
    p_bench.add_argument("--kind", choices=["overhead", "latency"], default="overhead")
    p_bench.add_argument("--n", type=int, default=100, help="number of runs")
    p_bench.add_argument("--params", help="bench parameter JSON file")

    p_metrics = sub.add_parser(
        "metrics", parents=[common], help="detection metrics over a corpus"
    )
    p_metrics.add_argument("--corpus", required=True, help="corpus directory")

    p_ledger = sub.add_parser(
        "ledger", parents=[common], help="ledger inspection and simulated time"
    )
    ledger_sub = p_ledger.add_subparsers(dest="action", required=True)
    p_inspect = ledger_sub.add_parser("inspect", parents=[common], help="look up one anchored digest")
    p_inspect.add_argument("digest", help="64-hex report digest (0x prefix allowed)")
    ledger_sub.add_parser("events", parents=[common], help="list mint events (sim backend)")
    p_advance = ledger_sub.add_parser("advance", parents=[common], help="advance simulated time")
    p_advance.add_argument("ms", help="milliseconds to advance")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = _Output(as_json=getattr(args, "json", False))
    seed = getattr(args, "seed", None)

    try:
        cfg = load_config(
            getattr(args, "config", None),
            store=getattr(args, "store", None),
            backend=getattr(args, "backend", None),
        )
        if seed is not None:
            cfg = replace(cfg, chain=replace(cfg.chain, rng_seed=seed))
    except ConfigError as exc:
        return out.fail(f"bad configuration: {exc}", EXIT_CONFIG)

    try:
        if args.command == "scan":
            return cmd_scan(cfg, out, args.target)
        if args.command == "log":
            return cmd_log(cfg, out, args.report)
        if args.command == "verify":
            report = None if args.all else args.report
            return cmd_verify(cfg, out, report)
        if args.command == "bench":
            return cmd_bench(cfg, out, args.kind, args.n, args.params, seed)
        if args.command == "metrics":
            return cmd_metrics(cfg, out, args.corpus)
        if args.command == "ledger":
            value = getattr(args, "digest", None) or getattr(args, "ms", None)
            return cmd_ledger(cfg, out, args.action, value)
        raise AssertionError(f"unhandled command {args.command!r}")
    except StoreLockedError as exc:
        return out.fail(str(exc), EXIT_LOCKED)
    except ConfigError as exc:
        return out.fail(f"bad configuration: {exc}", EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
